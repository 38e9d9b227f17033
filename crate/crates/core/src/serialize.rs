//! Binary index files. The byte layout is documented in FORMAT.md.

use std::path::Path;

use crate::bits::IntVec;
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::euler::StartTable;
use crate::persistent::{PersistentStringIndex, PrefixSelectIndex};
use crate::segment::SegmentIndex;

pub const MAGIC: &[u8; 5] = b"PSEG1";

const KIND_STRINGS: u8 = 0;
const KIND_PREFIX: u8 = 1;

/// Any index that can live in a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoredIndex {
    Strings(PersistentStringIndex),
    Prefix(PrefixSelectIndex),
}

impl StoredIndex {
    pub fn strings(&self) -> &PersistentStringIndex {
        match self {
            StoredIndex::Strings(s) => s,
            StoredIndex::Prefix(p) => p.strings(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_bytes(MAGIC);
        let (kind, s) = match self {
            StoredIndex::Strings(s) => (KIND_STRINGS, s),
            StoredIndex::Prefix(p) => (KIND_PREFIX, p.strings()),
        };
        w.put_u8(kind);
        w.put_u64(s.lengths.len() as u64);
        w.put_u32s(s.start.as_slice());
        s.lengths.encode(&mut w);
        s.index.encode(&mut w);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.expect(MAGIC)?;
        let kind = r.get_u8()?;
        let n = r.get_u64()? as usize;
        let start = r.get_u32s()?;
        let lengths = IntVec::decode(&mut r)?;
        if n == 0 || start.len() != n || lengths.len() != n {
            return Err(Error::Format("node tables disagree with node count".into()));
        }
        let index = SegmentIndex::decode(&mut r)?;
        if !r.is_empty() {
            return Err(Error::Format("trailing bytes after index".into()));
        }
        let strings = PersistentStringIndex {
            index,
            start: StartTable::from_vec(start),
            lengths,
        };
        match kind {
            KIND_STRINGS => Ok(StoredIndex::Strings(strings)),
            KIND_PREFIX => Ok(StoredIndex::Prefix(PrefixSelectIndex { inner: strings })),
            k => Err(Error::Format(format!("unknown index kind {k}"))),
        }
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::SegmentIndexConfig;
    use crate::slab::Backend;
    use crate::version::example_tree;

    #[test]
    fn round_trip_is_byte_exact() {
        for backend in [Backend::Direct, Backend::Memoized] {
            let cfg = SegmentIndexConfig {
                backend,
                ..SegmentIndexConfig::default()
            };
            let idx = StoredIndex::Strings(PersistentStringIndex::build(&example_tree(), cfg).unwrap());
            let bytes = idx.to_bytes();
            let back = StoredIndex::from_bytes(&bytes).unwrap();
            assert_eq!(back, idx);
            assert_eq!(back.to_bytes(), bytes);
        }
        let p = StoredIndex::Prefix(PrefixSelectIndex::build(&[3, 1, 2, 5, 6, 4], SegmentIndexConfig::default()).unwrap());
        let bytes = p.to_bytes();
        assert_eq!(StoredIndex::from_bytes(&bytes).unwrap(), p);
    }

    #[test]
    fn rejects_damage() {
        let idx = StoredIndex::Strings(PersistentStringIndex::build(&example_tree(), SegmentIndexConfig::default()).unwrap());
        let bytes = idx.to_bytes();
        assert!(matches!(StoredIndex::from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
        assert!(matches!(StoredIndex::from_bytes(b"PSEG2"), Err(Error::Format(_))));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(StoredIndex::from_bytes(&extra), Err(Error::Format(_))));
    }
}
