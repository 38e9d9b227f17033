//! Segment selection: the `j`-th lowest segment crossing a vertical line.
//!
//! Segments are sorted by `(y, x1)` and stored in the leaves of a balanced
//! tree of degree at most `Δ`. An internal node `v` covers a contiguous run
//! of `n_v` y-ranks, split into child slabs of `ceil(n_v / Δ)` segments.
//! Its segments are rank-reduced locally (the `r`-th smallest endpoint gets
//! column `2r - 1`, heights become `1..=n_v`), and the node stores:
//!
//! - `E_v`: for each endpoint in x order, the child slab holding its
//!   segment (0-based; even local columns carry no endpoint and are not
//!   stored);
//! - a [`SlabIndex`] over the local segments.
//!
//! A query at local column `i_v` picks the child slab with
//! `slab_select`, then moves to the child's local column via a rank on
//! `E_v`.

use crate::bits::{bits_for, IntVec, RankBits};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::euler::{Segment, SegmentSet};
use crate::rank_select::{PackedSequence, DEFAULT_SAMPLE_RATE};
use crate::slab::{Backend, RankSegment, RankSpaceSegments, SlabIndex, SlabLayout, MAX_DELTA};

/// Default leaf bucket size.
pub const DEFAULT_BUCKET: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentIndexConfig {
    pub delta: u32,
    pub sample_rate: usize,
    pub backend: Backend,
    /// Subtrees of at most this many segments get no internal node; a
    /// descent reaching one scans its segments. 1 keeps every internal node.
    pub bucket: u32,
}

impl Default for SegmentIndexConfig {
    fn default() -> Self {
        Self {
            delta: 0,
            sample_rate: DEFAULT_SAMPLE_RATE,
            backend: Backend::Direct,
            bucket: DEFAULT_BUCKET,
        }
    }
}

impl SegmentIndexConfig {
    /// `delta == 0` selects [`crate::slab::default_delta`] for `m` segments.
    pub fn resolved_delta(&self, m: usize) -> u32 {
        if self.delta == 0 {
            crate::slab::default_delta(m)
        } else {
            self.delta
        }
    }
}

/// Sorted endpoint coordinates, answering "how many are `<= x`".
#[derive(Debug, Clone, PartialEq, Eq)]
enum EndpointMap {
    /// Bit `x` set iff `x` is an endpoint; the length is the largest
    /// endpoint plus one.
    Dense(RankBits),
    Sparse(Vec<u32>),
}

impl EndpointMap {
    fn new(sorted: &[u32]) -> Self {
        let universe = sorted.last().map_or(0, |&e| e as usize + 1);
        if universe > 16 * sorted.len() + 64 {
            EndpointMap::Sparse(sorted.to_vec())
        } else {
            EndpointMap::Dense(RankBits::from_positions(universe, sorted.iter().map(|&e| e as usize)))
        }
    }

    fn len(&self) -> usize {
        match self {
            EndpointMap::Dense(bits) => bits.count_ones(),
            EndpointMap::Sparse(v) => v.len(),
        }
    }

    /// `(number of endpoints <= x, whether x is one)`.
    #[inline]
    fn rank_le(&self, x: u32) -> (u32, bool) {
        match self {
            EndpointMap::Dense(bits) => {
                let x = x as usize;
                if x >= bits.len() {
                    (bits.count_ones() as u32, false)
                } else {
                    (bits.rank1(x + 1) as u32, bits.get(x))
                }
            }
            EndpointMap::Sparse(v) => {
                let r = v.partition_point(|&e| e <= x);
                (r as u32, r > 0 && v[r - 1] == x)
            }
        }
    }

    #[cfg(test)]
    fn to_vec(&self) -> Vec<u32> {
        match self {
            EndpointMap::Dense(bits) => bits.ones().map(|e| e as u32).collect(),
            EndpointMap::Sparse(v) => v.clone(),
        }
    }

    fn size_in_bits(&self) -> u64 {
        match self {
            EndpointMap::Dense(bits) => bits.size_in_bits(),
            EndpointMap::Sparse(v) => 32 * v.len() as u64,
        }
    }

    fn encode(&self, w: &mut Writer) {
        match self {
            EndpointMap::Dense(bits) => {
                w.put_u8(0);
                bits.encode(w);
            }
            EndpointMap::Sparse(v) => {
                w.put_u8(1);
                w.put_u32s(v);
            }
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self> {
        match r.get_u8()? {
            0 => {
                let bits = RankBits::decode(r)?;
                if bits.len() > u32::MAX as usize + 1 || (!bits.is_empty() && !bits.get(bits.len() - 1)) {
                    return Err(Error::Format("bad endpoint bitvector".into()));
                }
                Ok(EndpointMap::Dense(bits))
            }
            1 => {
                let v = r.get_u32s()?;
                if v.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Format("endpoints not increasing".into()));
                }
                Ok(EndpointMap::Sparse(v))
            }
            t => Err(Error::Format(format!("unknown endpoint map tag {t}"))),
        }
    }
}

/// Segments by y-rank, one packed column per field.
#[derive(Debug, Clone, PartialEq, Eq)]
struct LeafTable {
    x1: IntVec,
    x2: IntVec,
    y: IntVec,
    label: IntVec,
}

impl LeafTable {
    fn new(segs: &[Segment]) -> Self {
        let col = |f: fn(&Segment) -> u32| {
            let v: Vec<u64> = segs.iter().map(|s| f(s) as u64).collect();
            let width = bits_for(v.iter().copied().max().unwrap_or(0));
            IntVec::from_slice_with_width(&v, width)
        };
        Self {
            x1: col(|s| s.x1),
            x2: col(|s| s.x2),
            y: col(|s| s.y),
            label: col(|s| s.label),
        }
    }

    fn len(&self) -> usize {
        self.label.len()
    }

    #[inline]
    fn get(&self, r: usize) -> Segment {
        Segment {
            x1: self.x1.get(r) as u32,
            x2: self.x2.get(r) as u32,
            y: self.y.get(r) as u32,
            label: self.label.get(r) as u32,
        }
    }

    fn encode(&self, w: &mut Writer) {
        for c in [&self.x1, &self.x2, &self.y, &self.label] {
            c.encode(w);
        }
    }

    fn decode(r: &mut Reader<'_>, m: usize) -> Result<Self> {
        let mut cols = Vec::with_capacity(4);
        for _ in 0..4 {
            let c = IntVec::decode(r)?;
            if c.len() != m || c.width() > 32 {
                return Err(Error::Format("leaf table length mismatch".into()));
            }
            cols.push(c);
        }
        let label = cols.pop().unwrap();
        let y = cols.pop().unwrap();
        let x2 = cols.pop().unwrap();
        let x1 = cols.pop().unwrap();
        Ok(Self { x1, x2, y, label })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Node {
    /// Covered y-ranks `lo..hi` (0-based, half open).
    lo: u32,
    hi: u32,
    /// Node id of the first internal child; internal children are a prefix
    /// of the children.
    first_internal_child: u32,
    e: PackedSequence,
    slab: SlabIndex,
}

impl Node {
    fn layout(&self) -> SlabLayout {
        self.slab.layout()
    }
}

/// One step of a descent, for instrumentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DescentStep {
    /// Internal node visited.
    pub node: u32,
    /// Covered y-ranks of the node, `lo..hi`.
    pub range: (u32, u32),
    pub i_v: u32,
    pub j_v: u64,
    /// Child slab chosen, 1-based.
    pub k: u32,
    /// Covered y-ranks of the chosen child.
    pub child_range: (u32, u32),
    pub i_child: u32,
    pub j_child: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentIndex {
    delta: u32,
    sample_rate: usize,
    backend: Backend,
    bucket: u32,
    endpoints: EndpointMap,
    /// Internal nodes in breadth-first order; node 0 is the root.
    nodes: Vec<Node>,
    leaves: LeafTable,
}

/// Sizes of the index parts, in bits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SizeBreakdown {
    pub endpoints: u64,
    pub e_strings: u64,
    pub slab_indexes: u64,
    pub leaves: u64,
    pub labels: u64,
    /// Memoization caches, not part of the serialized payload.
    pub memo: u64,
}

impl SizeBreakdown {
    pub fn payload(&self) -> u64 {
        self.endpoints + self.e_strings + self.slab_indexes + self.leaves + self.labels
    }
}

impl SegmentIndex {
    pub fn build(segs: &SegmentSet, config: SegmentIndexConfig) -> Result<Self> {
        let m = segs.len();
        let delta = config.resolved_delta(m);
        if !(2..=MAX_DELTA).contains(&delta) {
            return Err(Error::InvalidSegments(format!(
                "degree {delta} outside 2..={MAX_DELTA}"
            )));
        }
        if config.sample_rate == 0 {
            return Err(Error::InvalidSegments("sample rate must be positive".into()));
        }
        if config.bucket == 0 {
            return Err(Error::InvalidSegments("bucket size must be positive".into()));
        }
        let bucket = config.bucket;
        let leaves: Vec<Segment> = segs.segments().to_vec();
        for s in &leaves {
            if s.x1 > s.x2 {
                return Err(Error::InvalidSegments(format!(
                    "segment x = {}..={} is reversed",
                    s.x1, s.x2
                )));
            }
        }

        // Endpoint events in x order: (coordinate, y-rank, is_right).
        let mut events: Vec<(u32, u32, bool)> = Vec::with_capacity(2 * m);
        for (r, s) in leaves.iter().enumerate() {
            events.push((s.x1, r as u32, false));
            events.push((s.x2, r as u32, true));
        }
        events.sort_unstable();
        if let Some(w) = events.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidSegments(format!(
                "endpoint x = {} is shared",
                w[0].0
            )));
        }
        let endpoints = EndpointMap::new(&events.iter().map(|e| e.0).collect::<Vec<_>>());

        let mut nodes = Vec::new();
        if m > bucket as usize {
            // Breadth-first: each queue entry is (lo, hi, x-ordered events).
            let mut queue = std::collections::VecDeque::new();
            queue.push_back((0u32, m as u32, events.iter().map(|e| (e.1, e.2)).collect::<Vec<_>>()));
            let mut next_id = 1u32;
            while let Some((lo, hi, ev)) = queue.pop_front() {
                let n_v = (hi - lo) as usize;
                let layout = SlabLayout::new(n_v, delta);
                let size = layout.slab_size;
                let rows = layout.rows;

                // Local rank reduction.
                let mut sym = vec![0u32; 2 * n_v];
                let mut local = vec![RankSegment { x1: 0, x2: 0, y: 0 }; n_v];
                for (k, &(r, is_right)) in ev.iter().enumerate() {
                    let y = r - lo;
                    let col = 2 * k as u32 + 1;
                    sym[k] = y / size;
                    let s = &mut local[y as usize];
                    s.y = y + 1;
                    if is_right {
                        s.x2 = col;
                    } else {
                        s.x1 = col;
                    }
                }
                let rs = RankSpaceSegments::new(local)?;
                let slab = SlabIndex::build(&rs, delta, config.backend)?;
                let e = PackedSequence::new(&sym, rows, config.sample_rate)?;

                let first_internal_child = next_id;
                for k in 0..rows {
                    let clo = lo + k * size;
                    let chi = (clo + size).min(hi);
                    if chi - clo > bucket {
                        let cev: Vec<(u32, bool)> = ev
                            .iter()
                            .copied()
                            .filter(|&(r, _)| (clo..chi).contains(&r))
                            .collect();
                        queue.push_back((clo, chi, cev));
                        next_id += 1;
                    }
                }
                nodes.push(Node {
                    lo,
                    hi,
                    first_internal_child,
                    e,
                    slab,
                });
            }
        }

        Ok(Self {
            delta,
            sample_rate: config.sample_rate,
            backend: config.backend,
            bucket,
            endpoints,
            nodes,
            leaves: LeafTable::new(&leaves),
        })
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.len() == 0
    }

    pub fn delta(&self) -> u32 {
        self.delta
    }

    pub fn sample_rate(&self) -> usize {
        self.sample_rate
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn bucket(&self) -> u32 {
        self.bucket
    }

    pub fn internal_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Segments in y order.
    pub fn segments(&self) -> Vec<Segment> {
        (0..self.len()).map(|r| self.leaves.get(r)).collect()
    }

    /// The segment of y-rank `r` (0-based).
    pub fn segment(&self, r: usize) -> Option<Segment> {
        (r < self.len()).then(|| self.leaves.get(r))
    }

    /// Number of internal nodes on the longest root-to-leaf path.
    pub fn height(&self) -> u32 {
        let mut h = 0;
        let mut n = self.len() as u32;
        while n > self.bucket {
            n = n.div_ceil(self.delta);
            h += 1;
        }
        h
    }

    /// Root column for original coordinate `x`: with `r` endpoints `<= x`,
    /// `2r - 1` if `x` is an endpoint, otherwise `2r`.
    pub fn map_time_to_root(&self, x: i64) -> u32 {
        if x < 0 {
            return 0;
        }
        let x = x.min(u32::MAX as i64) as u32;
        let (r, hit) = self.endpoints.rank_le(x);
        if hit {
            2 * r - 1
        } else {
            2 * r
        }
    }

    /// Number of segments crossing `x`.
    pub fn count_crossing(&self, x: i64) -> u64 {
        self.count_at(x, self.map_time_to_root(x))
    }

    #[inline]
    fn count_at(&self, x: i64, col: u32) -> u64 {
        match self.nodes.first() {
            Some(root) => root.slab.slab_sum_unchecked(col, root.layout().rows),
            None => (0..self.len()).filter(|&r| self.leaves.get(r).crosses(x)).count() as u64,
        }
    }

    /// y-rank of the `j`-th segment of ranks `lo..hi` crossing `x`.
    fn scan_bucket(&self, lo: u32, hi: u32, x: i64, j: u64) -> Result<u32> {
        let mut seen = 0;
        for r in lo..hi {
            let l = &self.leaves;
            if l.x1.get(r as usize) as i64 <= x && x <= l.x2.get(r as usize) as i64 {
                seen += 1;
                if seen == j {
                    return Ok(r);
                }
            }
        }
        Err(Error::Internal(format!(
            "bucket {lo}..{hi} has {seen} segments crossing {x}, wanted {j}"
        )))
    }

    /// The segment of crossing rank `j` (1-based, bottom to top) at `x`.
    pub fn segment_select(&self, x: i64, j: u64) -> Result<Segment> {
        self.select_rank(x, j, None).map(|r| self.leaves.get(r as usize))
    }

    /// [`SegmentIndex::segment_select`] that also records every descent step.
    pub fn segment_select_traced(&self, x: i64, j: u64) -> Result<(Segment, Vec<DescentStep>)> {
        let mut trace = Vec::new();
        let r = self.select_rank(x, j, Some(&mut trace))?;
        Ok((self.leaves.get(r as usize), trace))
    }

    /// Segments of crossing ranks `j..j + len` at `x`, bottom to top.
    pub fn report_range(&self, x: i64, j: u64, len: u64) -> Result<Vec<Segment>> {
        let total = self.count_crossing(x);
        if j == 0 || j.saturating_add(len).saturating_sub(1) > total {
            return Err(Error::RangeOutOfBounds {
                position: j,
                length: len,
                len: total,
            });
        }
        (j..j + len).map(|r| self.segment_select(x, r)).collect()
    }

    fn select_rank(&self, x: i64, j: u64, trace: Option<&mut Vec<DescentStep>>) -> Result<u32> {
        let col = self.map_time_to_root(x);
        let total = self.count_at(x, col);
        if j == 0 || j > total {
            return Err(Error::RankOutOfRange { rank: j, count: total });
        }
        if self.nodes.is_empty() {
            return self.scan_bucket(0, self.len() as u32, x, j);
        }
        self.descend(x, col, j, trace)
    }

    /// Label of the `j`-th crossing segment at `x`, for `1 <= j <=
    /// count_crossing(x)`; fails on larger `j` only through an internal
    /// error.
    pub(crate) fn select_label_unchecked(&self, x: i64, j: u64) -> Result<u32> {
        let r = if self.nodes.is_empty() {
            self.scan_bucket(0, self.len() as u32, x, j)?
        } else {
            self.descend(x, self.map_time_to_root(x), j, None)?
        };
        Ok(self.leaves.label.get(r as usize) as u32)
    }

    fn descend(&self, x: i64, col: u32, j: u64, mut trace: Option<&mut Vec<DescentStep>>) -> Result<u32> {
        let mut node_id = 0usize;
        let mut i_v = col;
        let mut j_v = j;
        loop {
            let node = &self.nodes[node_id];
            let layout = node.layout();
            let (k, below) = node.slab.select_with_prefix(i_v, j_v)?;
            let j_child = j_v - below;
            // Endpoints sit at odd columns, so the first `i_v` columns hold
            // `(i_v + 1) / 2` of them.
            let p = (i_v as usize).div_ceil(2);
            let r_k = node.e.rank_unchecked(p, k - 1) as u32;
            let i_child = if i_v % 2 == 1 && node.e.get(p) == k - 1 {
                2 * r_k - 1
            } else {
                2 * r_k
            };
            let clo = node.lo + (k - 1) * layout.slab_size;
            let chi = (clo + layout.slab_size).min(node.hi);
            if let Some(t) = trace.as_deref_mut() {
                t.push(DescentStep {
                    node: node_id as u32,
                    range: (node.lo, node.hi),
                    i_v,
                    j_v,
                    k,
                    child_range: (clo, chi),
                    i_child,
                    j_child,
                });
            }
            if chi - clo <= self.bucket {
                return self.scan_bucket(clo, chi, x, j_child);
            }
            node_id = (node.first_internal_child + k - 1) as usize;
            i_v = i_child;
            j_v = j_child;
        }
    }

    /// Local rank-space segments of internal node `node`, with their y-ranks.
    pub fn local_segments(&self, node: u32) -> Option<(u32, u32, Vec<RankSegment>)> {
        let n = self.nodes.get(node as usize)?;
        let mut segs = vec![RankSegment { x1: 0, x2: 0, y: 0 }; (n.hi - n.lo) as usize];
        let slab_size = n.layout().slab_size;
        let mut seen = vec![0u32; n.layout().rows as usize + 1];
        // Replay E_v to recover each slab's endpoints in x order, then match
        // them to segments via the leaves' own x order.
        let mut by_slab: Vec<Vec<(u32, u32, bool)>> = vec![Vec::new(); n.layout().rows as usize + 1];
        for r in n.lo..n.hi {
            let s = self.leaves.get(r as usize);
            let slab = (r - n.lo) / slab_size + 1;
            by_slab[slab as usize].push((s.x1, r, false));
            by_slab[slab as usize].push((s.x2, r, true));
        }
        for v in &mut by_slab {
            v.sort_unstable();
        }
        for p in 1..=n.e.len() {
            let col = 2 * p - 1;
            let slab = n.e.get(p) as usize + 1;
            let (_, r, is_right) = by_slab[slab][seen[slab] as usize];
            seen[slab] += 1;
            let s = &mut segs[(r - n.lo) as usize];
            s.y = r - n.lo + 1;
            if is_right {
                s.x2 = col as u32;
            } else {
                s.x1 = col as u32;
            }
        }
        Some((n.lo, n.hi, segs))
    }

    /// Per-node slab indexes, for diagnostics.
    pub fn slab_index(&self, node: u32) -> Option<&SlabIndex> {
        self.nodes.get(node as usize).map(|n| &n.slab)
    }

    pub fn size_breakdown(&self) -> SizeBreakdown {
        let l = &self.leaves;
        let mut b = SizeBreakdown {
            endpoints: self.endpoints.size_in_bits(),
            leaves: l.x1.size_in_bits() + l.x2.size_in_bits() + l.y.size_in_bits(),
            labels: l.label.size_in_bits(),
            ..SizeBreakdown::default()
        };
        for n in &self.nodes {
            b.e_strings += n.e.size_in_bits();
            b.slab_indexes += n.slab.size_in_bits() + 3 * 32;
            b.memo += n.slab.memo_size_in_bits();
        }
        b
    }

    /// Upper bound on the number of internal nodes a descent visits: the
    /// smallest `h` with `bucket * Δ^h >= m`.
    pub fn height_bound(&self) -> u32 {
        let m = self.len() as u64;
        let mut h = 0;
        let mut cap = self.bucket as u64;
        while cap < m {
            cap = cap.saturating_mul(self.delta as u64);
            h += 1;
        }
        h
    }

    pub fn encode(&self, w: &mut Writer) {
        w.put_u32(self.delta);
        w.put_u64(self.sample_rate as u64);
        w.put_u32(self.bucket);
        w.put_u8(match self.backend {
            Backend::Direct => 0,
            Backend::Memoized => 1,
        });
        w.put_u64(self.leaves.len() as u64);
        w.put_u64(self.nodes.len() as u64);
        self.endpoints.encode(w);
        for n in &self.nodes {
            w.put_u32(n.lo);
            w.put_u32(n.hi);
            w.put_u32(n.first_internal_child);
            n.e.encode(w);
        }
        for n in &self.nodes {
            n.slab.encode(w);
        }
        self.leaves.encode(w);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let delta = r.get_u32()?;
        let sample_rate = r.get_u64()? as usize;
        let bucket = r.get_u32()?;
        let backend = match r.get_u8()? {
            0 => Backend::Direct,
            1 => Backend::Memoized,
            b => return Err(Error::Format(format!("unknown backend tag {b}"))),
        };
        let m = r.get_u64()? as usize;
        let count = r.get_u64()? as usize;
        if !(2..=MAX_DELTA).contains(&delta) || sample_rate == 0 || bucket == 0 || count > m {
            return Err(Error::Format("bad segment index header".into()));
        }
        let endpoints = EndpointMap::decode(r)?;
        if endpoints.len() != 2 * m {
            return Err(Error::Format("endpoint count mismatch".into()));
        }
        if endpoints.len() != 2 * m {
            return Err(Error::Format("endpoint array length mismatch".into()));
        }
        let mut heads = Vec::with_capacity(count);
        for _ in 0..count {
            let lo = r.get_u32()?;
            let hi = r.get_u32()?;
            let first = r.get_u32()?;
            let e = PackedSequence::decode(r)?;
            heads.push((lo, hi, first, e));
        }
        let mut nodes = Vec::with_capacity(count);
        for (lo, hi, first_internal_child, e) in heads {
            let slab = SlabIndex::decode(r)?;
            let n_v = hi.checked_sub(lo).unwrap_or(0) as usize;
            if n_v <= bucket as usize
                || hi as usize > m
                || e.len() != 2 * n_v
                || e.sigma() != slab.layout().rows
                || slab.layout().m as usize != n_v
                || slab.delta() != delta
            {
                return Err(Error::Format("inconsistent segment index node".into()));
            }
            nodes.push(Node {
                lo,
                hi,
                first_internal_child,
                e,
                slab,
            });
        }
        let leaves = LeafTable::decode(r, m)?;
        if (m > bucket as usize) != !nodes.is_empty() {
            return Err(Error::Format("missing root node".into()));
        }
        Ok(Self {
            delta,
            sample_rate,
            backend,
            bucket,
            endpoints,
            nodes,
            leaves,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler::reduce;
    use crate::testkit::naive_segment_select;
    use crate::version::{example_tree, VersionId};

    fn example() -> (SegmentIndex, Vec<u32>) {
        let red = reduce(&example_tree()).unwrap();
        let cfg = SegmentIndexConfig {
            delta: 2,
            bucket: 1,
            ..SegmentIndexConfig::default()
        };
        let idx = SegmentIndex::build(&red.segments, cfg).unwrap();
        (idx, red.start.as_slice().to_vec())
    }

    #[test]
    fn example_queries() {
        let (idx, start) = example();
        assert_eq!(idx.len(), 7);
        assert_eq!(idx.height(), 3);
        let x6 = 2 * start[6] as i64;
        assert_eq!(idx.segment_select(x6, 2).unwrap().label, 'b' as u32);
        assert_eq!(idx.count_crossing(x6), 3);
        let x4 = 2 * start[4] as i64;
        let cc: Vec<u32> = idx.report_range(x4, 1, 2).unwrap().iter().map(|s| s.label).collect();
        assert_eq!(cc, ['c' as u32, 'c' as u32]);
        assert_eq!(idx.count_crossing(0), 0);
        assert!(matches!(idx.segment_select(x6, 4), Err(Error::RankOutOfRange { rank: 4, count: 3 })));
        for node in 0..idx.internal_nodes() as u32 {
            let (_, _, local) = idx.local_segments(node).unwrap();
            let segs = RankSpaceSegments::new(local).unwrap();
            let report = crate::slab::verify_grid_properties(idx.slab_index(node).unwrap(), &segs);
            assert!(report.all_passed(), "{:?}", report.first_failure());
        }
        let _ = VersionId::ROOT;
    }

    #[test]
    fn time_mapping() {
        let (idx, _) = example();
        let ends = idx.endpoints.to_vec();
        assert_eq!(idx.map_time_to_root(-3), 0);
        assert_eq!(idx.map_time_to_root(0), 0);
        for (k, &e) in ends.iter().enumerate() {
            assert_eq!(idx.map_time_to_root(e as i64), 2 * k as u32 + 1);
        }
        for x in 0..=30i64 {
            let scan = idx.segments().iter().filter(|s| s.crosses(x)).count() as u64;
            assert_eq!(idx.count_crossing(x), scan, "x = {x}");
        }
    }

    #[test]
    fn single_segment() {
        let segs = SegmentSet::new(vec![Segment { x1: 3, x2: 8, y: 1, label: 7 }]);
        let idx = SegmentIndex::build(&segs, SegmentIndexConfig::default()).unwrap();
        assert_eq!(idx.internal_nodes(), 0);
        assert_eq!(idx.segment_select(5, 1).unwrap().label, 7);
        assert_eq!(idx.count_crossing(2), 0);
        assert!(idx.segment_select(9, 1).is_err());
    }

    #[test]
    fn rejects_shared_endpoint() {
        let segs = SegmentSet::new(vec![
            Segment { x1: 1, x2: 4, y: 1, label: 0 },
            Segment { x1: 4, x2: 6, y: 2, label: 0 },
        ]);
        assert!(matches!(
            SegmentIndex::build(&segs, SegmentIndexConfig::default()),
            Err(Error::InvalidSegments(_))
        ));
    }

    #[test]
    fn exhaustive_against_scan() {
        use crate::testkit::{gen_version_tree, GeneratorConfig};
        for seed in 0..6 {
            let tree = gen_version_tree(&GeneratorConfig {
                seed,
                nodes: 150,
                ..GeneratorConfig::default()
            });
            let red = reduce(&tree.normalize_replaces().0).unwrap();
            for (delta, bucket) in [(2, 1), (3, 1), (5, 1), (2, 5), (4, 16)] {
                let cfg = SegmentIndexConfig {
                    delta,
                    sample_rate: 4,
                    backend: if seed % 2 == 0 { Backend::Direct } else { Backend::Memoized },
                    bucket,
                };
                let idx = SegmentIndex::build(&red.segments, cfg).unwrap();
                let max_x = idx.endpoints.to_vec().last().copied().unwrap_or(0) as i64 + 1;
                for x in 0..=max_x {
                    let c = idx.count_crossing(x);
                    for j in 1..=c {
                        let (got, trace) = idx.segment_select_traced(x, j).unwrap();
                        assert_eq!(got, naive_segment_select(&red.segments, x, j).unwrap());
                        assert!(trace.len() as u32 <= idx.height_bound());
                    }
                }
            }
        }
    }

    #[test]
    fn encode_decode_round_trip() {
        let (idx, _) = example();
        let mut w = Writer::new();
        idx.encode(&mut w);
        let bytes = w.into_bytes();
        let mut r = Reader::new(&bytes);
        let back = SegmentIndex::decode(&mut r).unwrap();
        assert!(r.is_empty());
        assert_eq!(back, idx);
    }
}
