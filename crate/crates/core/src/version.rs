//! Version trees: rooted trees whose edges carry single-character edits.
//!
//! Every node denotes the string obtained by applying the edits on its
//! root path to the empty string. Node ids are dense, the root is `0`, and
//! characters are arbitrary 32-bit code points.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A character in a versioned string. Any 32-bit value is allowed.
pub type Symbol = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VersionId(pub u32);

impl VersionId {
    pub const ROOT: VersionId = VersionId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VersionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A single edit on the edge from a parent to a child version.
///
/// `Insert { pos: k, .. }` places the character immediately after position
/// `k` (0 means the front); `Delete` and `Replace` address 1-based positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EditOp {
    Insert { pos: u32, ch: Symbol },
    Delete { pos: u32 },
    Replace { pos: u32, ch: Symbol },
}

impl EditOp {
    /// Length change this edit applies to its parent string.
    pub fn length_delta(self) -> i64 {
        match self {
            EditOp::Insert { .. } => 1,
            EditOp::Delete { .. } => -1,
            EditOp::Replace { .. } => 0,
        }
    }

    /// Whether the edit is applicable to a parent string of length `len`.
    pub fn fits(self, len: u64) -> bool {
        match self {
            EditOp::Insert { pos, .. } => pos as u64 <= len,
            EditOp::Delete { pos } | EditOp::Replace { pos, .. } => pos >= 1 && pos as u64 <= len,
        }
    }

    pub fn is_insert(self) -> bool {
        matches!(self, EditOp::Insert { .. })
    }

    /// Applies the edit to `s` in place. The caller guarantees `fits`.
    pub fn apply(self, s: &mut Vec<Symbol>) {
        match self {
            EditOp::Insert { pos, ch } => s.insert(pos as usize, ch),
            EditOp::Delete { pos } => {
                s.remove(pos as usize - 1);
            }
            EditOp::Replace { pos, ch } => s[pos as usize - 1] = ch,
        }
    }
}

impl fmt::Display for EditOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            EditOp::Insert { pos, ch } => write!(f, "insert {pos} {}", CharToken(ch)),
            EditOp::Delete { pos } => write!(f, "delete {pos}"),
            EditOp::Replace { pos, ch } => write!(f, "replace {pos} {}", CharToken(ch)),
        }
    }
}

/// Textual form of a symbol: `'c'` for visible characters, else the decimal
/// code point.
struct CharToken(Symbol);

impl fmt::Display for CharToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match char::from_u32(self.0) {
            Some(c) if !c.is_control() && !c.is_whitespace() => write!(f, "'{c}'"),
            _ => write!(f, "{}", self.0),
        }
    }
}

fn parse_char_token(tok: &str) -> std::result::Result<Symbol, String> {
    if let Some(inner) = tok.strip_prefix('\'').and_then(|t| t.strip_suffix('\'')) {
        let mut chars = inner.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Ok(c as u32),
            _ => Err(format!("quoted character {tok} must hold exactly one character")),
        }
    } else {
        tok.parse::<u32>()
            .map_err(|_| format!("expected a code point or quoted character, found {tok:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub parent: VersionId,
    pub op: EditOp,
}

/// An immutable, structurally valid version tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VersionTree {
    /// `edges[v - 1]` is the edge into node `v`.
    edges: Vec<Edge>,
    child_start: Vec<u32>,
    child_list: Vec<u32>,
    /// Nodes in breadth-first order from the root.
    order: Vec<u32>,
}

impl VersionTree {
    /// A tree holding only the root (the empty string).
    pub fn singleton() -> Self {
        Self::from_edges_unchecked(Vec::new()).expect("a lone root is well formed")
    }

    /// Builds and fully validates a tree. `edges[v - 1]` is the edge into `v`.
    pub fn new(edges: Vec<Edge>) -> Result<Self> {
        let tree = Self::from_edges_unchecked(edges)?;
        tree.validate()?;
        Ok(tree)
    }

    /// Checks only the shape (parents in range, acyclic); edit positions are
    /// left to [`VersionTree::validate`].
    pub fn from_edges_unchecked(edges: Vec<Edge>) -> Result<Self> {
        let n = edges.len() + 1;
        if n > u32::MAX as usize {
            return Err(Error::MalformedTree(format!("{n} nodes exceed the id space")));
        }
        let mut child_count = vec![0u32; n + 1];
        for (i, e) in edges.iter().enumerate() {
            let v = i + 1;
            let p = e.parent.index();
            if p >= n {
                return Err(Error::MalformedTree(format!(
                    "node {v} has parent {p} but the tree has {n} nodes"
                )));
            }
            if p == v {
                return Err(Error::MalformedTree(format!("node {v} is its own parent")));
            }
            child_count[p + 1] += 1;
        }
        for i in 1..=n {
            child_count[i] += child_count[i - 1];
        }
        let child_start = child_count;
        let mut fill = child_start.clone();
        let mut child_list = vec![0u32; edges.len()];
        for (i, e) in edges.iter().enumerate() {
            let p = e.parent.index();
            child_list[fill[p] as usize] = (i + 1) as u32;
            fill[p] += 1;
        }
        let mut order = Vec::with_capacity(n);
        order.push(0u32);
        let mut head = 0;
        while head < order.len() {
            let u = order[head] as usize;
            head += 1;
            order.extend_from_slice(&child_list[child_start[u] as usize..child_start[u + 1] as usize]);
        }
        if order.len() != n {
            return Err(Error::MalformedTree(format!(
                "{} nodes are unreachable from the root (parent cycle)",
                n - order.len()
            )));
        }
        Ok(Self {
            edges,
            child_start,
            child_list,
            order,
        })
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn contains(&self, v: VersionId) -> bool {
        v.index() < self.node_count()
    }

    pub fn check_version(&self, v: VersionId) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::InvalidVersion {
                version: v.0 as u64,
                node_count: self.node_count() as u64,
            })
        }
    }

    /// The edge into `v`, or `None` for the root.
    pub fn edge(&self, v: VersionId) -> Option<Edge> {
        v.index().checked_sub(1).map(|i| self.edges[i])
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn parent(&self, v: VersionId) -> Option<VersionId> {
        self.edge(v).map(|e| e.parent)
    }

    /// Children of `v` in increasing id order.
    pub fn children(&self, v: VersionId) -> impl ExactSizeIterator<Item = VersionId> + '_ {
        let lo = self.child_start[v.index()] as usize;
        let hi = self.child_start[v.index() + 1] as usize;
        self.child_list[lo..hi].iter().map(|&c| VersionId(c))
    }

    /// Nodes in breadth-first order (parents before children).
    pub fn bfs_order(&self) -> impl Iterator<Item = VersionId> + '_ {
        self.order.iter().map(|&v| VersionId(v))
    }

    pub fn has_replaces(&self) -> bool {
        self.edges
            .iter()
            .any(|e| matches!(e.op, EditOp::Replace { .. }))
    }

    /// String lengths of every node, computed from edit deltas alone.
    /// Fails on the first edge whose position is out of range for its
    /// parent, reporting nodes in breadth-first order.
    pub fn lengths(&self) -> Result<Vec<u64>> {
        let mut len = vec![0u64; self.node_count()];
        for &v in &self.order[1..] {
            let e = self.edges[v as usize - 1];
            let parent_len = len[e.parent.index()];
            if !e.op.fits(parent_len) {
                return Err(Error::PositionOutOfRange {
                    node: v,
                    op: e.op.to_string(),
                    parent_len,
                });
            }
            len[v as usize] = (parent_len as i64 + e.op.length_delta()) as u64;
        }
        Ok(len)
    }

    /// Checks that every edit position is in range for its parent string.
    pub fn validate(&self) -> Result<()> {
        self.lengths().map(|_| ())
    }

    /// Root-to-`v` path, root first.
    pub fn path_to(&self, v: VersionId) -> Vec<VersionId> {
        let mut path = vec![v];
        let mut cur = v;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Reference materialization: replays the root-to-`v` edits on a plain
    /// vector.
    pub fn materialize_naive(&self, v: VersionId) -> Result<Vec<Symbol>> {
        self.check_version(v)?;
        let mut s = Vec::new();
        for w in self.path_to(v).into_iter().skip(1) {
            let op = self.edges[w.index() - 1].op;
            if !op.fits(s.len() as u64) {
                return Err(Error::PositionOutOfRange {
                    node: w.0,
                    op: op.to_string(),
                    parent_len: s.len() as u64,
                });
            }
            op.apply(&mut s);
        }
        Ok(s)
    }

    /// Rewrites every `Replace(k, c)` edge `u -> v` as `u -> w: Delete(k)`
    /// followed by `w -> v: Insert(k - 1, c)` with a fresh node `w`.
    ///
    /// Original nodes keep their ids; the fresh nodes are appended after
    /// them. The returned remapping sends each original id to its id in the
    /// new tree.
    pub fn normalize_replaces(&self) -> (VersionTree, Vec<VersionId>) {
        let n = self.node_count();
        let remap: Vec<VersionId> = (0..n as u32).map(VersionId).collect();
        if !self.has_replaces() {
            return (self.clone(), remap);
        }
        let mut edges = self.edges.clone();
        let mut extra = Vec::new();
        for (i, e) in edges.iter_mut().enumerate() {
            if let EditOp::Replace { pos, ch } = e.op {
                let w = VersionId((n + extra.len()) as u32);
                extra.push(Edge {
                    parent: e.parent,
                    op: EditOp::Delete { pos },
                });
                debug_assert_ne!(i + 1, w.index());
                *e = Edge {
                    parent: w,
                    op: EditOp::Insert { pos: pos - 1, ch },
                };
            }
        }
        edges.extend(extra);
        let tree = VersionTree::from_edges_unchecked(edges)
            .expect("splitting edges preserves the tree shape");
        (tree, remap)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.node_count());
        for (i, e) in self.edges.iter().enumerate() {
            out.push_str(&format!("{} {} {}\n", i + 1, e.parent, e.op));
        }
        out
    }
}

impl FromStr for VersionTree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_version_tree(s)
    }
}

impl fmt::Display for VersionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Parses the line-oriented text format and validates the result.
///
/// The first line holds the node count `n`; each following line is
/// `<id> <parent> <op>` for ids `1..n` in order. Blank lines and lines
/// starting with `#` are ignored. A count of `0` is read as the lone root.
pub fn parse_version_tree(text: &str) -> Result<VersionTree> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let syntax = |line: usize, message: String| Error::Syntax { line, message };

    let (hline, header) = lines
        .next()
        .ok_or_else(|| syntax(1, "missing node count".into()))?;
    let n: usize = header
        .parse()
        .map_err(|_| syntax(hline, format!("expected node count, found {header:?}")))?;
    let n = n.max(1);

    let mut edges = Vec::with_capacity(n - 1);
    for expected in 1..n {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| syntax(hline, format!("expected {} edge lines, found {}", n - 1, expected - 1)))?;
        edges.push(parse_edge_line(ln, line, expected)?);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(syntax(ln, format!("extra line after {} nodes", n)));
    }
    VersionTree::new(edges)
}

fn split_token(s: &str) -> (&str, &str) {
    let s = s.trim_start();
    let end = s.find(char::is_whitespace).unwrap_or(s.len());
    (&s[..end], &s[end..])
}

fn parse_edge_line(ln: usize, line: &str, expected: usize) -> Result<Edge> {
    let err = |message: String| Error::Syntax { line: ln, message };
    let mut rest = line;
    let mut field = |what: &str| {
        let (tok, tail) = split_token(rest);
        rest = tail;
        if tok.is_empty() {
            Err(err(format!("missing {what}")))
        } else {
            Ok(tok)
        }
    };
    let id: usize = field("node id")?
        .parse()
        .map_err(|_| err("node id is not an integer".into()))?;
    if id != expected {
        return Err(err(format!("expected node {expected}, found {id}")));
    }
    let parent: u32 = field("parent id")?
        .parse()
        .map_err(|_| err("parent id is not an integer".into()))?;
    let name = field("operation")?;
    let pos: u32 = field("position")?
        .parse()
        .map_err(|_| err("position is not a non-negative integer".into()))?;
    // The character token is the rest of the line so that `' '` survives.
    let rest = rest.trim();
    let op = match name {
        "insert" | "replace" => {
            if rest.is_empty() {
                return Err(err(format!("{name} needs a character")));
            }
            let ch = parse_char_token(rest).map_err(err)?;
            if name == "insert" {
                EditOp::Insert { pos, ch }
            } else {
                EditOp::Replace { pos, ch }
            }
        }
        "delete" => {
            if !rest.is_empty() {
                return Err(err(format!("unexpected trailing text {rest:?}")));
            }
            EditOp::Delete { pos }
        }
        other => return Err(err(format!("unknown operation {other:?}"))),
    };
    Ok(Edge {
        parent: VersionId(parent),
        op,
    })
}

/// The 8-node example collection {ε, a, ac, c, cc, ab, abb, bb}.
pub const EXAMPLE_TREE_TEXT: &str = "8
1 0 insert 0 'a'
2 1 insert 1 'c'
3 2 delete 1
4 3 insert 1 'c'
5 1 insert 1 'b'
6 5 insert 2 'b'
7 6 delete 1
";

pub fn example_tree() -> VersionTree {
    parse_version_tree(EXAMPLE_TREE_TEXT).expect("example tree is valid")
}

/// Renders symbols as a Rust string, substituting U+FFFD for invalid scalars.
pub fn symbols_to_string(s: &[Symbol]) -> String {
    s.iter()
        .map(|&c| char::from_u32(c).unwrap_or(char::REPLACEMENT_CHARACTER))
        .collect()
}

pub fn str_to_symbols(s: &str) -> Vec<Symbol> {
    s.chars().map(|c| c as u32).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(tree: &VersionTree) -> Vec<String> {
        (0..tree.node_count() as u32)
            .map(|v| symbols_to_string(&tree.materialize_naive(VersionId(v)).unwrap()))
            .collect()
    }

    #[test]
    fn example_collection() {
        let tree = example_tree();
        assert_eq!(tree.node_count(), 8);
        assert_eq!(
            strings(&tree),
            ["", "a", "ac", "c", "cc", "ab", "abb", "bb"]
        );
        assert_eq!(tree.lengths().unwrap(), [0, 1, 2, 1, 2, 2, 3, 2]);
    }

    #[test]
    fn zero_header_is_lone_root() {
        let tree = parse_version_tree("0\n").unwrap();
        assert_eq!(tree.node_count(), 1);
        assert!(tree.materialize_naive(VersionId::ROOT).unwrap().is_empty());
        assert_eq!(parse_version_tree("1").unwrap(), tree);
    }

    #[test]
    fn delete_beyond_parent_length() {
        let text = "4\n1 0 insert 0 'a'\n2 1 insert 1 'b'\n3 1 delete 5\n";
        match parse_version_tree(text) {
            Err(Error::PositionOutOfRange {
                node: 3,
                parent_len: 1,
                ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn delete_on_empty_root_child() {
        let tree = VersionTree::from_edges_unchecked(vec![Edge {
            parent: VersionId::ROOT,
            op: EditOp::Delete { pos: 1 },
        }])
        .unwrap();
        let e = tree.validate().unwrap_err();
        assert_eq!(e.code(), "EDGE_POSITION");
        assert!(e.to_string().contains("node 1"), "{e}");
    }

    #[test]
    fn syntax_errors_report_line() {
        let e = parse_version_tree("3\n1 0 insert 0 'a'\n2 1 frobnicate 1\n").unwrap_err();
        assert_eq!(
            e,
            Error::Syntax {
                line: 3,
                message: "unknown operation \"frobnicate\"".into()
            }
        );
        assert!(matches!(
            parse_version_tree("2\n1 0 insert 0 'ab'\n"),
            Err(Error::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            parse_version_tree("3\n1 0 insert 0 'a'\n"),
            Err(Error::Syntax { .. })
        ));
        assert!(matches!(
            parse_version_tree("x"),
            Err(Error::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn cycles_rejected() {
        let e = VersionTree::from_edges_unchecked(vec![
            Edge {
                parent: VersionId(2),
                op: EditOp::Insert { pos: 0, ch: 1 },
            },
            Edge {
                parent: VersionId(1),
                op: EditOp::Insert { pos: 0, ch: 1 },
            },
        ])
        .unwrap_err();
        assert_eq!(e.code(), "MALFORMED_TREE");
    }

    #[test]
    fn quoted_space_and_numeric_code_points() {
        let tree = parse_version_tree("3\n1 0 insert 0 ' '\n2 1 replace 1 128512\n").unwrap();
        assert_eq!(tree.materialize_naive(VersionId(1)).unwrap(), [32]);
        assert_eq!(tree.materialize_naive(VersionId(2)).unwrap(), [128512]);
        let again = parse_version_tree(&tree.to_text()).unwrap();
        assert_eq!(again, tree);
    }

    #[test]
    fn replace_becomes_delete_then_insert() {
        let tree = parse_version_tree("3\n1 0 insert 0 'a'\n2 1 replace 1 'x'\n").unwrap();
        let (norm, remap) = tree.normalize_replaces();
        assert_eq!(norm.node_count(), 4);
        assert!(!norm.has_replaces());
        let w = norm.parent(remap[2]).unwrap();
        assert_eq!(w, VersionId(3));
        assert_eq!(norm.edge(w).unwrap().op, EditOp::Delete { pos: 1 });
        assert_eq!(
            norm.edge(remap[2]).unwrap().op,
            EditOp::Insert { pos: 0, ch: 'x' as u32 }
        );
        assert_eq!(norm.materialize_naive(remap[2]).unwrap(), ['x' as u32]);
    }

    #[test]
    fn replace_free_tree_unchanged() {
        let tree = example_tree();
        let (norm, remap) = tree.normalize_replaces();
        assert_eq!(norm, tree);
        assert!(remap.iter().enumerate().all(|(i, v)| v.index() == i));
    }

    #[test]
    fn text_round_trip() {
        let tree = example_tree();
        assert_eq!(tree.to_text(), EXAMPLE_TREE_TEXT);
    }
}
