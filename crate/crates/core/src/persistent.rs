//! Random access into every version of a version tree.

use crate::bits::{bits_for, IntVec};
use crate::error::{Error, Result};
use crate::euler::{reduce, StartTable};
use crate::segment::{SegmentIndex, SegmentIndexConfig, SizeBreakdown};
use crate::version::{Edge, EditOp, Symbol, VersionId, VersionTree};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersistentStringIndex {
    pub(crate) index: SegmentIndex,
    /// Euler start time per original node.
    pub(crate) start: StartTable,
    /// `|S(v)|` per original node.
    pub(crate) lengths: IntVec,
}

impl PersistentStringIndex {
    pub fn build(tree: &VersionTree, config: SegmentIndexConfig) -> Result<Self> {
        tree.validate()?;
        let (normal, remap) = tree.normalize_replaces();
        let red = reduce(&normal)?;
        let index = SegmentIndex::build(&red.segments, config)?;
        let start = StartTable::from_vec(remap.iter().map(|&v| red.start.start(v)).collect());
        let lengths = tree.lengths()?;
        let width = bits_for(lengths.iter().copied().max().unwrap_or(0));
        Ok(Self {
            index,
            start,
            lengths: IntVec::from_slice_with_width(&lengths, width),
        })
    }

    pub fn node_count(&self) -> usize {
        self.lengths.len()
    }

    pub fn segment_index(&self) -> &SegmentIndex {
        &self.index
    }

    pub fn start_table(&self) -> &StartTable {
        &self.start
    }

    fn check(&self, v: VersionId) -> Result<()> {
        if v.index() >= self.lengths.len() {
            return Err(Error::InvalidVersion {
                version: v.0 as u64,
                node_count: self.lengths.len() as u64,
            });
        }
        Ok(())
    }

    /// `|S(v)|`.
    pub fn length(&self, v: VersionId) -> Result<u64> {
        self.check(v)?;
        Ok(self.lengths.get(v.index()))
    }

    fn time(&self, v: VersionId) -> i64 {
        2 * self.start.start(v) as i64
    }

    /// `S(v)[j]`, 1-based.
    pub fn access(&self, v: VersionId, j: u64) -> Result<Symbol> {
        let len = self.length(v)?;
        if j == 0 || j > len {
            return Err(Error::RangeOutOfBounds {
                position: j,
                length: 1,
                len,
            });
        }
        self.index.select_label_unchecked(self.time(v), j)
    }

    /// `S(v)[j ..= j + len - 1]`; empty when `len == 0`.
    pub fn substring(&self, v: VersionId, j: u64, len: u64) -> Result<Vec<Symbol>> {
        let total = self.length(v)?;
        if len == 0 {
            return Ok(Vec::new());
        }
        if j == 0 || j.saturating_add(len - 1) > total {
            return Err(Error::RangeOutOfBounds {
                position: j,
                length: len,
                len: total,
            });
        }
        Ok(self
            .index
            .report_range(self.time(v), j, len)?
            .into_iter()
            .map(|s| s.label)
            .collect())
    }

    /// Checks `len(v) = count_crossing(2 start(v))` for every node; returns
    /// the first node that disagrees.
    pub fn check_consistency(&self) -> Result<()> {
        for v in 0..self.lengths.len() as u32 {
            let v = VersionId(v);
            let c = self.index.count_crossing(self.time(v));
            let len = self.lengths.get(v.index());
            if c != len {
                return Err(Error::Internal(format!(
                    "node {} has length {len} but {c} crossing segments",
                    v.0
                )));
            }
        }
        Ok(())
    }

    pub fn size_breakdown(&self) -> SizeBreakdown {
        self.index.size_breakdown()
    }

    /// Bits for the start table (32 per node) and the packed lengths.
    pub fn table_bits(&self) -> u64 {
        32 * self.start.len() as u64 + self.lengths.size_in_bits()
    }
}

/// Index of the `j`-th smallest value in `A[1..=i]`, through random access
/// on a path of insertions: edge `i` inserts the character `i` after the
/// `r_i` entries of `A[1..i]` smaller than `A[i]`, so `S(v_i)` lists the
/// indices of `A[1..=i]` in value order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixSelectIndex {
    pub(crate) inner: PersistentStringIndex,
}

/// The path tree for `a`; fails on repeated values.
pub fn prefix_select_tree(a: &[i64]) -> Result<VersionTree> {
    let mut sorted = a.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Duplicate(w[0]));
    }
    // Fenwick tree over value ranks.
    let n = a.len();
    let mut fen = vec![0u32; n + 1];
    let mut edges = Vec::with_capacity(n);
    for (i, &x) in a.iter().enumerate() {
        let rank = sorted.partition_point(|&y| y < x) + 1;
        let mut smaller = 0;
        let mut k = rank - 1;
        while k > 0 {
            smaller += fen[k];
            k &= k - 1;
        }
        let mut k = rank;
        while k <= n {
            fen[k] += 1;
            k += k & k.wrapping_neg();
        }
        edges.push(Edge {
            parent: VersionId(i as u32),
            op: EditOp::Insert {
                pos: smaller,
                ch: i as u32 + 1,
            },
        });
    }
    VersionTree::new(edges)
}

impl PrefixSelectIndex {
    pub fn build(a: &[i64], config: SegmentIndexConfig) -> Result<Self> {
        let tree = prefix_select_tree(a)?;
        Ok(Self {
            inner: PersistentStringIndex::build(&tree, config)?,
        })
    }

    /// Length of the array.
    pub fn len(&self) -> usize {
        self.inner.node_count() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// 1-based index of the `j`-th smallest entry of `A[1..=i]`.
    pub fn prefix_select(&self, i: u64, j: u64) -> Result<u64> {
        let n = self.len() as u64;
        if i == 0 || i > n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        if j == 0 || j > i {
            return Err(Error::RankOutOfRange { rank: j, count: i });
        }
        Ok(self.inner.access(VersionId(i as u32), j)? as u64)
    }

    pub fn strings(&self) -> &PersistentStringIndex {
        &self.inner
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::version::{example_tree, str_to_symbols};

    #[test]
    fn example_collection() {
        let idx = PersistentStringIndex::build(&example_tree(), SegmentIndexConfig::default()).unwrap();
        assert_eq!(idx.segment_index().len(), 7);
        let expect = ["", "a", "ac", "c", "cc", "ab", "abb", "bb"];
        for (v, s) in expect.iter().enumerate() {
            let v = VersionId(v as u32);
            let len = idx.length(v).unwrap();
            assert_eq!(idx.substring(v, 1, len).unwrap(), str_to_symbols(s));
        }
        assert_eq!(idx.access(VersionId(6), 2).unwrap(), 'b' as u32);
        assert_eq!(idx.access(VersionId(4), 1).unwrap(), 'c' as u32);
        assert_eq!(idx.access(VersionId(7), 1).unwrap(), 'b' as u32);
        assert!(matches!(idx.access(VersionId(0), 1), Err(Error::RangeOutOfBounds { .. })));
        assert!(matches!(idx.length(VersionId(8)), Err(Error::InvalidVersion { .. })));
        assert_eq!(idx.substring(VersionId(6), 2, 0).unwrap(), Vec::<u32>::new());
        assert!(idx.substring(VersionId(6), 2, 3).is_err());
        idx.check_consistency().unwrap();
    }

    #[test]
    fn lone_root() {
        let idx = PersistentStringIndex::build(&VersionTree::singleton(), SegmentIndexConfig::default()).unwrap();
        assert_eq!(idx.length(VersionId::ROOT).unwrap(), 0);
        assert!(idx.access(VersionId::ROOT, 1).is_err());
    }

    #[test]
    fn replace_edges() {
        let tree = crate::version::parse_version_tree("3\n1 0 insert 0 'a'\n2 1 replace 1 'x'\n").unwrap();
        let idx = PersistentStringIndex::build(&tree, SegmentIndexConfig::default()).unwrap();
        assert_eq!(idx.node_count(), 3);
        assert_eq!(idx.access(VersionId(2), 1).unwrap(), 'x' as u32);
        assert_eq!(idx.access(VersionId(1), 1).unwrap(), 'a' as u32);
    }

    #[test]
    fn prefix_select_example() {
        let a = [3, 1, 2, 5, 6, 4];
        let tree = prefix_select_tree(&a).unwrap();
        assert_eq!(tree.node_count(), 7);
        let ranks: Vec<u32> = tree
            .edges()
            .iter()
            .map(|e| match e.op {
                EditOp::Insert { pos, .. } => pos,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(ranks, [0, 0, 1, 3, 4, 3]);
        let idx = PrefixSelectIndex::build(&a, SegmentIndexConfig::default()).unwrap();
        assert_eq!(idx.prefix_select(3, 1).unwrap(), 2);
        assert_eq!(idx.prefix_select(6, 6).unwrap(), 5);
        assert_eq!(idx.prefix_select(6, 4).unwrap(), 6);
        assert!(matches!(idx.prefix_select(3, 4), Err(Error::RankOutOfRange { .. })));
        assert!(matches!(idx.prefix_select(7, 1), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(PrefixSelectIndex::build(&[1, 1], SegmentIndexConfig::default()), Err(Error::Duplicate(1))));
    }

    #[test]
    fn prefix_select_single() {
        let idx = PrefixSelectIndex::build(&[1], SegmentIndexConfig::default()).unwrap();
        assert_eq!(idx.strings().substring(VersionId(1), 1, 1).unwrap(), [1]);
        assert_eq!(idx.prefix_select(1, 1).unwrap(), 1);
    }
}
