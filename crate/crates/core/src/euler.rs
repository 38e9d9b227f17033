//! Reduction from a version tree to labeled horizontal segments.
//!
//! An Euler tour of the tree maintains a [`MarkedSequence`]: walking down an
//! insertion edge inserts its character unmarked, walking back up marks it;
//! walking down a deletion edge marks the addressed character and walking
//! back up unmarks that same character. Each maximal run of times `[i, j]`
//! during which a character is unmarked becomes one segment spanning
//! `x = 2i - 1 ..= 2j` at height `y` = the character's position in the final
//! sequence. The string of node `v` is then spelled by the labels of the
//! segments crossing `x = 2 * start(v)`, read bottom to top.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::marked::{Handle, MarkedSequence};
use crate::version::{EditOp, Symbol, VersionId, VersionTree};

/// A labeled horizontal segment covering `x1 ..= x2` at height `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Segment {
    pub x1: u32,
    pub x2: u32,
    pub y: u32,
    pub label: Symbol,
}

impl Segment {
    #[inline]
    pub fn crosses(&self, x: i64) -> bool {
        self.x1 as i64 <= x && x <= self.x2 as i64
    }
}

/// Segments sorted by `(y, x1)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SegmentSet {
    segments: Vec<Segment>,
}

impl SegmentSet {
    pub fn new(mut segments: Vec<Segment>) -> Self {
        segments.sort_by_key(|s| (s.y, s.x1));
        Self { segments }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// One `x1 x2 y <codepoint>` line per segment, in `(y, x1)` order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for s in &self.segments {
            let _ = writeln!(out, "{} {} {} {}", s.x1, s.x2, s.y, s.label);
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<Self> {
        let mut segs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let nums: Vec<u32> = line
                .split_whitespace()
                .map(|t| t.parse::<u32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Syntax {
                    line: i + 1,
                    message: "expected four non-negative integers".into(),
                })?;
            let [x1, x2, y, label] = nums[..] else {
                return Err(Error::Syntax {
                    line: i + 1,
                    message: format!("expected 4 fields, found {}", nums.len()),
                });
            };
            if x1 > x2 {
                return Err(Error::Syntax {
                    line: i + 1,
                    message: format!("x1 = {x1} exceeds x2 = {x2}"),
                });
            }
            segs.push(Segment { x1, x2, y, label });
        }
        Ok(Self::new(segs))
    }
}

/// First-visit time of every node in the Euler tour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StartTable {
    start: Vec<u32>,
}

impl StartTable {
    pub fn from_vec(start: Vec<u32>) -> Self {
        Self { start }
    }

    #[inline]
    pub fn start(&self, v: VersionId) -> u32 {
        self.start[v.index()]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.start
    }

    pub fn len(&self) -> usize {
        self.start.len()
    }

    pub fn is_empty(&self) -> bool {
        self.start.is_empty()
    }
}

/// Output of [`reduce`].
#[derive(Debug, Clone)]
pub struct Reduction {
    pub segments: SegmentSet,
    pub start: StartTable,
    /// Character handle created by the insertion edge into each node.
    insert_handle: Vec<Option<u32>>,
    /// Unmarked time intervals per character handle.
    intervals: Vec<Vec<(u32, u32)>>,
    /// Final 1-based position per character handle.
    positions: Vec<u32>,
}

impl Reduction {
    /// Maximal integer intervals during which the character inserted by the
    /// edge into `child` is unmarked, in increasing order.
    pub fn unmarked_intervals(&self, child: VersionId) -> Result<Vec<(u32, u32)>> {
        self.insert_handle
            .get(child.index())
            .copied()
            .flatten()
            .map(|h| self.intervals[h as usize].clone())
            .ok_or(Error::NotInsertionEdge(child.0))
    }

    /// Final y-position of the character inserted by the edge into `child`.
    pub fn position(&self, child: VersionId) -> Option<u32> {
        self.insert_handle
            .get(child.index())
            .copied()
            .flatten()
            .map(|h| self.positions[h as usize])
    }
}

/// Runs the Euler-tour reduction on a replace-free tree.
pub fn reduce(tree: &VersionTree) -> Result<Reduction> {
    reduce_observed(tree, |_, _| {})
}

/// [`reduce`], calling `observe(v, seq)` with the marked sequence as it
/// stands at time `start(v)`, for every node `v`.
pub fn reduce_observed<F>(tree: &VersionTree, mut observe: F) -> Result<Reduction>
where
    F: FnMut(VersionId, &MarkedSequence),
{
    if tree.has_replaces() {
        return Err(Error::Unsupported(
            "reduction needs a replace-free tree; normalize replaces first".into(),
        ));
    }
    let n = tree.node_count();
    let inserts = tree.edges().iter().filter(|e| e.op.is_insert()).count();
    let mut seq = MarkedSequence::with_capacity(inserts);
    let mut start = vec![0u32; n];
    let mut touched: Vec<u32> = vec![u32::MAX; n];
    let mut insert_handle = vec![None; n];
    let mut intervals: Vec<Vec<(u32, u32)>> = Vec::with_capacity(inserts);
    let mut open_since: Vec<u32> = Vec::with_capacity(inserts);

    observe(VersionId::ROOT, &seq);

    let mut time: u32 = 0;
    let mut stack: Vec<(VersionId, usize)> = vec![(VersionId::ROOT, 0)];
    while let Some(&mut (u, ref mut next)) = stack.last_mut() {
        let children = tree.children(u);
        if *next < children.len() {
            let v = tree.children(u).nth(*next).unwrap();
            *next += 1;
            time += 1;
            start[v.index()] = time;
            match tree.edge(v).unwrap().op {
                EditOp::Insert { pos, ch } => {
                    let h = seq.insert_after_unmarked(pos as usize, ch);
                    debug_assert_eq!(h.0 as usize, intervals.len());
                    intervals.push(Vec::new());
                    open_since.push(time);
                    touched[v.index()] = h.0;
                    insert_handle[v.index()] = Some(h.0);
                }
                EditOp::Delete { pos } => {
                    let h = seq.nth_unmarked(pos as usize);
                    seq.mark(h);
                    intervals[h.0 as usize].push((open_since[h.0 as usize], time - 1));
                    touched[v.index()] = h.0;
                }
                EditOp::Replace { .. } => unreachable!("checked above"),
            }
            observe(v, &seq);
            stack.push((v, 0));
        } else {
            stack.pop();
            if u == VersionId::ROOT {
                break;
            }
            time += 1;
            let h = Handle(touched[u.index()]);
            match tree.edge(u).unwrap().op {
                EditOp::Insert { .. } => {
                    seq.mark(h);
                    intervals[h.0 as usize].push((open_since[h.0 as usize], time - 1));
                }
                EditOp::Delete { .. } => {
                    seq.unmark(h);
                    open_since[h.0 as usize] = time;
                }
                EditOp::Replace { .. } => unreachable!("checked above"),
            }
        }
    }
    debug_assert_eq!(time as usize, 2 * (n - 1));
    debug_assert_eq!(seq.unmarked_len(), 0);

    let positions = seq.positions();
    let mut segments = Vec::with_capacity(n.saturating_sub(1));
    for (h, runs) in intervals.iter().enumerate() {
        let label = seq.symbol(Handle(h as u32));
        for &(i, j) in runs {
            segments.push(Segment {
                x1: 2 * i - 1,
                x2: 2 * j,
                y: positions[h],
                label,
            });
        }
    }
    Ok(Reduction {
        segments: SegmentSet::new(segments),
        start: StartTable::from_vec(start),
        insert_handle,
        intervals,
        positions,
    })
}

/// Convenience wrapper: the unmarked intervals of the insertion edge into
/// `child` after reducing `tree`.
pub fn unmarked_intervals(tree: &VersionTree, child: VersionId) -> Result<Vec<(u32, u32)>> {
    tree.check_version(child)?;
    if !tree.edge(child).is_some_and(|e| e.op.is_insert()) {
        return Err(Error::NotInsertionEdge(child.0));
    }
    reduce(tree)?.unmarked_intervals(child)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::version::{example_tree, parse_version_tree, symbols_to_string};

    /// Labels of segments crossing `x`, bottom to top, by a full scan.
    fn crossing_labels(segs: &SegmentSet, x: i64) -> Vec<Symbol> {
        let mut c: Vec<&Segment> = segs.segments().iter().filter(|s| s.crosses(x)).collect();
        c.sort_by_key(|s| s.y);
        c.into_iter().map(|s| s.label).collect()
    }

    #[test]
    fn example_intervals() {
        let tree = example_tree();
        let red = reduce(&tree).unwrap();
        let iv = |v: u32| red.unmarked_intervals(VersionId(v)).unwrap();
        assert_eq!(iv(1), [(1, 2), (6, 9), (11, 13)]);
        assert_eq!(iv(2), [(2, 6)]);
        assert_eq!(iv(4), [(4, 4)]);
        assert_eq!(iv(5), [(8, 12)]);
        assert_eq!(iv(6), [(9, 11)]);
        assert_eq!(red.position(VersionId(1)), Some(1));
        assert!(matches!(
            red.unmarked_intervals(VersionId(3)),
            Err(Error::NotInsertionEdge(3))
        ));
        assert_eq!(red.start.as_slice(), [0, 1, 2, 3, 4, 8, 9, 10]);
    }

    #[test]
    fn example_segments() {
        let tree = example_tree();
        let red = reduce(&tree).unwrap();
        assert_eq!(red.segments.len(), 7);
        let a: Vec<(u32, u32, u32)> = red
            .segments
            .segments()
            .iter()
            .filter(|s| s.label == 'a' as u32)
            .map(|s| (s.x1, s.x2, s.y))
            .collect();
        assert_eq!(a, [(1, 4, 1), (11, 18, 1), (21, 26, 1)]);
        let mut xs: Vec<u32> = red
            .segments
            .segments()
            .iter()
            .flat_map(|s| [s.x1, s.x2])
            .collect();
        xs.sort_unstable();
        xs.dedup();
        assert_eq!(xs.len(), 14);
        for v in 0..8 {
            let got = crossing_labels(&red.segments, 2 * red.start.start(VersionId(v)) as i64);
            assert_eq!(got, tree.materialize_naive(VersionId(v)).unwrap(), "node {v}");
        }
    }

    #[test]
    fn lone_root() {
        let red = reduce(&VersionTree::singleton()).unwrap();
        assert!(red.segments.is_empty());
        assert_eq!(red.start.as_slice(), [0]);
    }

    #[test]
    fn insertion_without_deletions_has_one_interval() {
        let tree = parse_version_tree("3\n1 0 insert 0 'a'\n2 1 insert 1 'b'\n").unwrap();
        assert_eq!(unmarked_intervals(&tree, VersionId(2)).unwrap(), [(2, 2)]);
        assert_eq!(unmarked_intervals(&tree, VersionId(1)).unwrap(), [(1, 3)]);
    }

    #[test]
    fn replace_edges_rejected() {
        let tree = parse_version_tree("3\n1 0 insert 0 'a'\n2 1 replace 1 'b'\n").unwrap();
        assert_eq!(reduce(&tree).unwrap_err().code(), "UNSUPPORTED");
    }

    #[test]
    fn marked_sequence_spells_each_version() {
        let tree = example_tree();
        reduce_observed(&tree, |v, seq| {
            assert_eq!(
                symbols_to_string(&seq.unmarked_symbols()),
                symbols_to_string(&tree.materialize_naive(v).unwrap())
            );
        })
        .unwrap();
    }

    #[test]
    fn dump_round_trip() {
        let red = reduce(&example_tree()).unwrap();
        let text = red.segments.dump();
        assert!(text.starts_with("1 4 1 97\n"));
        assert_eq!(SegmentSet::parse_dump(&text).unwrap(), red.segments);
    }
}
