use thiserror::Error;

/// Errors produced while parsing, building or querying an index.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("node {node}: {op} is invalid on a parent of length {parent_len}")]
    PositionOutOfRange {
        node: u32,
        op: String,
        parent_len: u64,
    },

    #[error("malformed version tree: {0}")]
    MalformedTree(String),

    #[error("version {version} does not exist (tree has {node_count} nodes)")]
    InvalidVersion { version: u64, node_count: u64 },

    #[error("position {position} (length {length}) is out of range for a string of length {len}")]
    RangeOutOfBounds { position: u64, length: u64, len: u64 },

    #[error("rank {rank} is out of range: only {count} segments cross")]
    RankOutOfRange { rank: u64, count: u64 },

    #[error("index {index} is out of range 1..={len}")]
    IndexOutOfRange { index: u64, len: u64 },

    #[error("symbol {symbol} is outside the alphabet of size {sigma}")]
    SymbolOutOfAlphabet { symbol: u64, sigma: u64 },

    #[error("edge into node {0} is not an insertion edge")]
    NotInsertionEdge(u32),

    #[error("invalid segment set: {0}")]
    InvalidSegments(String),

    #[error("duplicate value {0}")]
    Duplicate(i64),

    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error("operation not supported by this index: {0}")]
    Unsupported(String),

    #[error("corrupt index file: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short stable identifier printed by the CLI as `ERR <code>`.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "SYNTAX",
            Error::PositionOutOfRange { .. } => "EDGE_POSITION",
            Error::MalformedTree(_) => "MALFORMED_TREE",
            Error::InvalidVersion { .. } => "INVALID_VERSION",
            Error::RangeOutOfBounds { .. } => "OUT_OF_BOUNDS",
            Error::RankOutOfRange { .. } => "RANK_OUT_OF_RANGE",
            Error::IndexOutOfRange { .. } => "INDEX_OUT_OF_RANGE",
            Error::SymbolOutOfAlphabet { .. } => "BAD_SYMBOL",
            Error::NotInsertionEdge(_) => "NOT_INSERTION",
            Error::InvalidSegments(_) => "INVALID_SEGMENTS",
            Error::Duplicate(_) => "DUPLICATE",
            Error::Internal(_) => "INTERNAL",
            Error::Unsupported(_) => "UNSUPPORTED",
            Error::Format(_) => "FORMAT",
            Error::Io(_) => "IO",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
