//! Slab selection over rank-space segments.
//!
//! Segments are split by height into `rows` contiguous slabs. Conceptually
//! the structure encodes the prefix grid `P(i, j)` = number of segments in
//! slabs `1..=j` crossing column `i`, without ever storing it. The grid is
//! cut into blocks of `b = rows * ceil(log2 m)` columns; a block's rows are
//! grouped wherever the block's first column jumps by more than `b` between
//! adjacent rows, and each group keeps its bottom-left value as its
//! representative. Within a block, a column group of `rows` columns crossed
//! with a row group forms a cell; a cell is fully described by its leftmost
//! column (relative to the representative) plus the per-column updates,
//! which is the [`NormalizedCellCode`].
//!
//! Column `c` carries at most one update: a segment starting at `c`, or a
//! segment that ended at `c - 1`. A column without an update repeats its
//! left neighbour, so the grid is only kept for the columns that carry one
//! (at most `2m` of the `4m`); a rank bitvector maps a column to the last
//! such column at or before it.

use std::collections::HashMap;

use crate::bits::{bits_for, ceil_log2, low_mask, IntVec, RankBits};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

/// Largest supported slab count.
pub const MAX_DELTA: u32 = 64;

/// `max(2, ceil(sqrt(ceil(log2 m))))`, capped at [`MAX_DELTA`].
pub fn default_delta(m: usize) -> u32 {
    let l = ceil_log2(m as u64) as f64;
    (l.sqrt().ceil() as u32).clamp(2, MAX_DELTA)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RankSegment {
    pub x1: u32,
    pub x2: u32,
    pub y: u32,
}

/// Segments in rank space: heights are exactly `1..=m` and every column in
/// `1..=4m` carries at most one update.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RankSpaceSegments {
    /// Indexed by `y - 1`.
    segs: Vec<RankSegment>,
}

impl RankSpaceSegments {
    pub fn new(segs: Vec<RankSegment>) -> Result<Self> {
        let m = segs.len();
        let cols = 4 * m as u64;
        let mut by_y = vec![None; m];
        for s in &segs {
            if s.y == 0 || s.y as usize > m || by_y[s.y as usize - 1].is_some() {
                return Err(Error::InvalidSegments(format!(
                    "heights must be a permutation of 1..={m}; bad or repeated y = {}",
                    s.y
                )));
            }
            if s.x1 == 0 || s.x1 >= s.x2 || s.x2 as u64 > cols {
                return Err(Error::InvalidSegments(format!(
                    "segment x = {}..={} is not within 1..={cols} with x1 < x2",
                    s.x1, s.x2
                )));
            }
            by_y[s.y as usize - 1] = Some(*s);
        }
        let mut used = vec![false; cols as usize + 2];
        for s in &segs {
            for c in [s.x1 as usize, s.x2 as usize + 1] {
                if used[c] {
                    return Err(Error::InvalidSegments(format!(
                        "column {c} carries more than one update"
                    )));
                }
                used[c] = true;
            }
        }
        Ok(Self {
            segs: by_y.into_iter().map(Option::unwrap).collect(),
        })
    }

    /// Wraps segments without any checks. Only meant for fault injection in
    /// tests of [`verify_grid_properties`].
    pub fn new_unchecked(mut segs: Vec<RankSegment>) -> Self {
        segs.sort_by_key(|s| s.y);
        Self { segs }
    }

    pub fn len(&self) -> usize {
        self.segs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segs.is_empty()
    }

    pub fn segments(&self) -> &[RankSegment] {
        &self.segs
    }
}

/// Slab geometry shared by the index and the brute-force oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlabLayout {
    pub m: u32,
    /// Requested slab count.
    pub delta: u32,
    /// Segments per slab, `ceil(m / delta)`.
    pub slab_size: u32,
    /// Effective slab count `ceil(m / slab_size)`; the grid's row count.
    pub rows: u32,
}

impl SlabLayout {
    pub fn new(m: usize, delta: u32) -> Self {
        let m = m as u32;
        let slab_size = m.div_ceil(delta).max(1);
        Self {
            m,
            delta,
            slab_size,
            rows: m.div_ceil(slab_size),
        }
    }

    #[inline]
    pub fn slab_of(&self, y: u32) -> u32 {
        (y - 1) / self.slab_size + 1
    }

    pub fn columns(&self) -> u32 {
        4 * self.m
    }
}

/// Which code path answers normalized-cell queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Recompute from the leftmost column and updates on every query.
    #[default]
    Direct,
    /// Materialize every distinct cell code once at build time and look up.
    Memoized,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Backend::Direct),
            "memoized" => Ok(Backend::Memoized),
            other => Err(Error::Unsupported(format!("unknown backend {other:?}"))),
        }
    }
}

/// A column update as seen from inside a cell: rows `from_row..` of the
/// cell change by `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalUpdate {
    pub from_row: u32,
    pub delta: i8,
}

/// Read access to one normalized cell. Rows and columns are 1-based.
pub trait Cell {
    fn height(&self) -> usize;
    fn width(&self) -> usize;
    /// Normalized value in the cell's leftmost column.
    fn left(&self, row: usize) -> i64;
    /// Update entering local column `col >= 2`, if it affects this cell.
    fn update(&self, col: usize) -> Option<LocalUpdate>;
}

fn check_extent<C: Cell + ?Sized>(cell: &C, col: usize, row: Option<usize>) -> Result<()> {
    let bad_col = col == 0 || col > cell.width();
    let bad_row = row.is_some_and(|r| r == 0 || r > cell.height());
    if bad_col || bad_row {
        return Err(Error::IndexOutOfRange {
            index: if bad_col { col } else { row.unwrap() } as u64,
            len: if bad_col { cell.width() } else { cell.height() } as u64,
        });
    }
    Ok(())
}

/// `Ĉ(col, row)`.
pub fn cell_access<C: Cell + ?Sized>(cell: &C, col: usize, row: usize) -> Result<i64> {
    check_extent(cell, col, Some(row))?;
    Ok(cell_access_unchecked(cell, col, row))
}

#[inline]
fn cell_access_unchecked<C: Cell + ?Sized>(cell: &C, col: usize, row: usize) -> i64 {
    let mut v = cell.left(row);
    for c in 2..=col {
        if let Some(u) = cell.update(c) {
            if row as u32 >= u.from_row {
                v += u.delta as i64;
            }
        }
    }
    v
}

/// Smallest local row `k` with `Ĉ(col, k) >= target`.
pub fn cell_predecessor<C: Cell + ?Sized>(cell: &C, col: usize, target: i64) -> Result<usize> {
    check_extent(cell, col, None)?;
    cell_predecessor_unchecked(cell, col, target)
}

fn cell_predecessor_unchecked<C: Cell + ?Sized>(cell: &C, col: usize, target: i64) -> Result<usize> {
    let mut ups = [(0u8, 0i8); MAX_DELTA as usize];
    let mut n = 0;
    for c in 2..=col {
        if let Some(u) = cell.update(c) {
            ups[n] = (u.from_row as u8, u.delta);
            n += 1;
        }
    }
    for row in 1..=cell.height() {
        let shift: i64 = ups[..n]
            .iter()
            .filter(|u| u.0 as usize <= row)
            .map(|u| u.1 as i64)
            .sum();
        if cell.left(row) + shift >= target {
            return Ok(row);
        }
    }
    Err(Error::Internal(format!(
        "no row of the cell reaches {target} in column {col}"
    )))
}

fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

fn unzigzag(v: u64) -> i64 {
    ((v >> 1) as i64) ^ -((v & 1) as i64)
}

/// Self-contained bit encoding of a normalized cell.
///
/// Layout, low bits first: height (7), width (7), leftmost-value width (7),
/// `height` zigzag leftmost values, then `width` update codes of
/// `bits_for(2 * (height + 1))` bits each (0 = no update, otherwise
/// `1 + 2 * (from_row - 1) + [delta < 0]`). Updates in the first column and
/// updates that miss every row are normalized to 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NormalizedCellCode {
    bits: Vec<u64>,
}

impl NormalizedCellCode {
    pub fn new(left: &[i64], updates: &[Option<LocalUpdate>]) -> Self {
        let h = left.len();
        let w = updates.len();
        assert!((1..=MAX_DELTA as usize).contains(&h) && (1..=MAX_DELTA as usize).contains(&w));
        let lw = bits_for(left.iter().map(|&v| zigzag(v)).max().unwrap_or(0));
        let uw = bits_for(2 * (h as u64 + 1));
        let total = 21 + h as u64 * lw as u64 + w as u64 * uw as u64;
        let mut out = IntVec::with_len(1, total as usize);
        let mut pos = 0u64;
        let mut put = |v: u64, n: u32| {
            write_bits(&mut out, pos, v, n);
            pos += n as u64;
        };
        put(h as u64 - 1, 7);
        put(w as u64 - 1, 7);
        put(lw as u64, 7);
        for &v in left {
            put(zigzag(v), lw);
        }
        for (i, u) in updates.iter().enumerate() {
            let code = match u {
                Some(u) if i > 0 && (u.from_row as usize) <= h && u.delta != 0 => {
                    debug_assert!(u.from_row >= 1 && u.delta.abs() == 1);
                    1 + 2 * (u.from_row as u64 - 1) + u64::from(u.delta < 0)
                }
                _ => 0,
            };
            put(code, uw);
        }
        Self {
            bits: out.words().to_vec(),
        }
    }

    fn read(&self, pos: u64, n: u32) -> u64 {
        if n == 0 {
            return 0;
        }
        let word = (pos / 64) as usize;
        let off = (pos % 64) as u32;
        let lo = self.bits.get(word).copied().unwrap_or(0) >> off;
        let v = if off + n > 64 {
            lo | (self.bits.get(word + 1).copied().unwrap_or(0) << (64 - off))
        } else {
            lo
        };
        v & low_mask(n)
    }

    fn left_width(&self) -> u32 {
        self.read(14, 7) as u32
    }

    fn update_width(&self) -> u32 {
        bits_for(2 * (self.height() as u64 + 1))
    }

    /// Length of the encoding in bits.
    pub fn len_bits(&self) -> u64 {
        21 + self.height() as u64 * self.left_width() as u64
            + self.width() as u64 * self.update_width() as u64
    }

    /// Materializes every entry, column-major.
    pub fn materialize(&self) -> MaterializedCell {
        let (h, w) = (self.height(), self.width());
        let mut values = Vec::with_capacity(h * w);
        let mut col: Vec<i64> = (1..=h).map(|r| self.left(r)).collect();
        for c in 1..=w {
            if let Some(u) = self.update(c) {
                for v in &mut col[u.from_row as usize - 1..] {
                    *v += u.delta as i64;
                }
            }
            values.extend(col.iter().map(|&v| v as i32));
        }
        MaterializedCell {
            height: h as u8,
            width: w as u8,
            values,
        }
    }
}

fn write_bits(out: &mut IntVec, pos: u64, v: u64, n: u32) {
    for k in 0..n {
        out.set((pos + k as u64) as usize, (v >> k) & 1);
    }
}

impl Cell for NormalizedCellCode {
    fn height(&self) -> usize {
        self.read(0, 7) as usize + 1
    }

    fn width(&self) -> usize {
        self.read(7, 7) as usize + 1
    }

    fn left(&self, row: usize) -> i64 {
        let lw = self.left_width();
        unzigzag(self.read(21 + (row as u64 - 1) * lw as u64, lw))
    }

    fn update(&self, col: usize) -> Option<LocalUpdate> {
        let base = 21 + self.height() as u64 * self.left_width() as u64;
        let uw = self.update_width();
        let code = self.read(base + (col as u64 - 1) * uw as u64, uw);
        (code != 0).then(|| LocalUpdate {
            from_row: ((code - 1) / 2 + 1) as u32,
            delta: if (code - 1) % 2 == 1 { -1 } else { 1 },
        })
    }
}

/// A fully expanded cell, column-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaterializedCell {
    height: u8,
    width: u8,
    values: Vec<i32>,
}

impl MaterializedCell {
    #[inline]
    pub fn at(&self, col: usize, row: usize) -> i64 {
        self.values[(col - 1) * self.height as usize + row - 1] as i64
    }

    #[inline]
    pub fn predecessor(&self, col: usize, target: i64) -> Option<usize> {
        let h = self.height as usize;
        let column = &self.values[(col - 1) * h..col * h];
        let k = column.partition_point(|&v| (v as i64) < target);
        (k < h).then_some(k + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct MemoCache {
    /// Per (column group, row-group slot): id of the distinct cell.
    cell_ids: IntVec,
    /// Start of each distinct cell's column-major values in `values`.
    offsets: Vec<u32>,
    values: Vec<i32>,
}

impl MemoCache {
    #[inline]
    fn column(&self, slot: usize, height: usize, col: usize) -> &[i32] {
        let off = self.offsets[self.cell_ids.get(slot) as usize] as usize + (col - 1) * height;
        &self.values[off..off + height]
    }
}

/// Compact slab-sum / slab-select structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlabIndex {
    layout: SlabLayout,
    /// Block width `b`, a multiple of `rows`.
    block_width: u32,
    /// Bit `c - 1` set iff column `c` carries an update. The kept grid
    /// columns are numbered `1..=active.count_ones()` in this order.
    active: RankBits,
    /// Per kept column (index `k - 1`): `2 * (slab - 1) + 1` = start,
    /// `2 * (slab - 1) + 2` = end.
    updates: IntVec,
    /// Per block: bit `r - 1` set iff row `r` starts a row group.
    group_starts: Vec<u64>,
    /// Per block, `rows` slots: representative of each row group.
    reps: IntVec,
    /// Per column group and row: leftmost cell value minus the
    /// representative, plus `block_width`.
    leftcol: IntVec,
    backend: Backend,
    memo: Option<MemoCache>,
}

/// View of one cell of a [`SlabIndex`] that reads straight from its arrays.
struct StoredCell<'a> {
    idx: &'a SlabIndex,
    group: usize,
    lo: u32,
    hi: u32,
    width: usize,
}

impl Cell for StoredCell<'_> {
    fn height(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    fn width(&self) -> usize {
        self.width
    }

    #[inline]
    fn left(&self, row: usize) -> i64 {
        let rows = self.idx.layout.rows as usize;
        self.idx
            .leftcol
            .get(self.group * rows + self.lo as usize - 1 + row - 1) as i64
            - self.idx.block_width as i64
    }

    #[inline]
    fn update(&self, col: usize) -> Option<LocalUpdate> {
        let rows = self.idx.layout.rows as usize;
        let code = self.idx.updates.get(self.group * rows + col - 1) as u32;
        if code == 0 {
            return None;
        }
        let slab = (code - 1) / 2 + 1;
        let delta = if (code - 1) % 2 == 0 { 1 } else { -1 };
        if slab > self.hi {
            return None;
        }
        Some(LocalUpdate {
            from_row: slab.saturating_sub(self.lo) + 1,
            delta,
        })
    }
}

/// Location of the cell holding a grid entry.
#[derive(Debug, Clone, Copy)]
struct CellPos {
    block: usize,
    group: usize,
    /// 0-based row group within the block.
    row_group: usize,
    lo: u32,
    hi: u32,
    local_col: usize,
}

impl SlabIndex {
    /// Builds the index with `delta` slabs over `segs`.
    pub fn build(segs: &RankSpaceSegments, delta: u32, backend: Backend) -> Result<Self> {
        if !(2..=MAX_DELTA).contains(&delta) {
            return Err(Error::InvalidSegments(format!(
                "slab count {delta} outside 2..={MAX_DELTA}"
            )));
        }
        let layout = SlabLayout::new(segs.len(), delta);
        let rows = layout.rows.max(1) as usize;
        let cols = layout.columns() as usize;
        let block_width = (rows as u32) * ceil_log2(layout.m as u64).max(1);
        let b = block_width as usize;

        let mut col_update = vec![0u64; cols + 2];
        for s in segs.segments() {
            let slab = layout.slab_of(s.y) as u64;
            for (c, code) in [(s.x1 as usize, 2 * (slab - 1) + 1), (s.x2 as usize + 1, 2 * (slab - 1) + 2)] {
                if c > cols + 1 || col_update[c] != 0 {
                    return Err(Error::InvalidSegments(format!(
                        "column {c} carries more than one update or lies outside 1..={cols}"
                    )));
                }
                col_update[c] = code;
            }
        }
        let active = RankBits::from_positions(cols, (1..=cols).filter(|&c| col_update[c] != 0).map(|c| c - 1));
        let kept: Vec<u64> = active.ones().map(|p| col_update[p + 1]).collect();
        let cols = kept.len();
        let updates = IntVec::from_slice_with_width(&kept, bits_for(2 * rows as u64));

        let blocks = cols.div_ceil(b);
        let groups = cols.div_ceil(rows);
        let mut group_starts = vec![0u64; blocks];
        let mut reps_raw = vec![0u64; blocks * rows];
        let mut left_raw = vec![0u64; groups * rows];

        let mut count = vec![0i64; rows + 1];
        let mut prefix = vec![0i64; rows + 1];
        let mut rep_of_row = vec![0i64; rows + 1];
        for c in 1..=cols {
            let code = kept[c - 1];
            let slab = ((code - 1) / 2 + 1) as usize;
            count[slab] += if (code - 1) % 2 == 0 { 1 } else { -1 };
            let at_block = (c - 1) % b == 0;
            let at_group = (c - 1) % rows == 0;
            if !(at_block || at_group) {
                continue;
            }
            for r in 1..=rows {
                prefix[r] = prefix[r - 1] + count[r];
            }
            if at_block {
                let block = (c - 1) / b;
                let mut mask = 0u64;
                let mut g = 0usize;
                for r in 1..=rows {
                    if r == 1 || prefix[r] - prefix[r - 1] > b as i64 {
                        if r > 1 {
                            g += 1;
                        }
                        mask |= 1 << (r - 1);
                        reps_raw[block * rows + g] = prefix[r] as u64;
                    }
                    rep_of_row[r] = reps_raw[block * rows + g] as i64;
                }
                group_starts[block] = mask;
            }
            let group = (c - 1) / rows;
            for r in 1..=rows {
                let v = prefix[r] - rep_of_row[r] + b as i64;
                debug_assert!(v >= 0, "leftmost value below representative by more than b");
                left_raw[group * rows + r - 1] = v as u64;
            }
        }

        let mut idx = Self {
            layout,
            block_width,
            active,
            updates,
            group_starts,
            reps: IntVec::from_slice_with_width(&reps_raw, bits_for(layout.m as u64)),
            leftcol: IntVec::from_slice(&left_raw),
            backend,
            memo: None,
        };
        if backend == Backend::Memoized {
            idx.memo = Some(idx.build_memo());
        }
        Ok(idx)
    }

    fn build_memo(&self) -> MemoCache {
        let rows = self.layout.rows as usize;
        let groups = self.kept_columns().div_ceil(rows.max(1));
        let mut ids = vec![0u64; groups * rows];
        let mut interned: HashMap<NormalizedCellCode, u32> = HashMap::new();
        let mut offsets = Vec::new();
        let mut values = Vec::new();
        for group in 0..groups {
            let first_col = group * rows + 1;
            let block = (first_col - 1) / self.block_width as usize;
            for (slot, (lo, hi)) in self.row_groups(block).into_iter().enumerate() {
                let cell = self.stored_cell(group, lo, hi);
                let code = self.encode_cell(&cell);
                let id = *interned.entry(code).or_insert_with_key(|code| {
                    offsets.push(values.len() as u32);
                    values.extend(code.materialize().values);
                    (offsets.len() - 1) as u32
                });
                ids[group * rows + slot] = id as u64;
            }
        }
        MemoCache {
            cell_ids: IntVec::from_slice(&ids),
            offsets,
            values,
        }
    }

    fn encode_cell<C: Cell>(&self, cell: &C) -> NormalizedCellCode {
        let left: Vec<i64> = (1..=cell.height()).map(|r| cell.left(r)).collect();
        let ups: Vec<Option<LocalUpdate>> = (1..=cell.width())
            .map(|c| if c == 1 { None } else { cell.update(c) })
            .collect();
        NormalizedCellCode::new(&left, &ups)
    }

    fn stored_cell(&self, group: usize, lo: u32, hi: u32) -> StoredCell<'_> {
        let rows = self.layout.rows as usize;
        let cols = self.kept_columns();
        StoredCell {
            idx: self,
            group,
            lo,
            hi,
            width: rows.min(cols - group * rows),
        }
    }

    /// `(first_row, last_row)` of each row group of `block`, bottom to top.
    pub fn row_groups(&self, block: usize) -> Vec<(u32, u32)> {
        let rows = self.layout.rows;
        let mask = self.group_starts[block];
        let starts: Vec<u32> = (1..=rows).filter(|r| mask >> (r - 1) & 1 == 1).collect();
        starts
            .iter()
            .enumerate()
            .map(|(g, &lo)| (lo, starts.get(g + 1).map_or(rows, |&n| n - 1)))
            .collect()
    }

    /// Representatives of `block`'s row groups, bottom to top.
    pub fn representatives(&self, block: usize) -> Vec<u64> {
        let rows = self.layout.rows as usize;
        (0..self.group_starts[block].count_ones() as usize)
            .map(|g| self.reps.get(block * rows + g))
            .collect()
    }

    pub fn layout(&self) -> SlabLayout {
        self.layout
    }

    pub fn block_width(&self) -> u32 {
        self.block_width
    }

    pub fn block_count(&self) -> usize {
        self.group_starts.len()
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// Number of grid columns, `4m`.
    pub fn columns(&self) -> u32 {
        self.layout.columns()
    }

    /// Number of columns carrying an update; the grid is kept only for these.
    pub fn kept_columns(&self) -> usize {
        self.updates.len()
    }

    /// Kept column holding the values of column `col`; 0 before the first
    /// update.
    #[inline]
    fn kept_column(&self, col: u32) -> u32 {
        self.active.rank1(col as usize) as u32
    }

    /// Returns the slab-count parameter this index was built with.
    pub fn delta(&self) -> u32 {
        self.layout.delta
    }

    /// Cell of kept column `col` and row `row`.
    #[inline]
    fn locate(&self, col: u32, row: u32) -> CellPos {
        let rows = self.layout.rows as usize;
        let c = col as usize - 1;
        let block = c / self.block_width as usize;
        let group = c / rows;
        let mask = self.group_starts[block];
        let below = mask & low_mask(row);
        let row_group = below.count_ones() as usize - 1;
        let lo = 64 - below.leading_zeros();
        let above = mask & !low_mask(row);
        let hi = if above == 0 {
            self.layout.rows
        } else {
            above.trailing_zeros()
        };
        CellPos {
            block,
            group,
            row_group,
            lo,
            hi,
            local_col: c % rows + 1,
        }
    }

    #[inline]
    fn rep(&self, block: usize, row_group: usize) -> i64 {
        self.reps.get(block * self.layout.rows as usize + row_group) as i64
    }

    /// Value of the cell at `pos`, local row `row`.
    #[inline]
    fn cell_value(&self, pos: &CellPos, row: usize) -> i64 {
        match &self.memo {
            Some(memo) => {
                let slot = pos.group * self.layout.rows as usize + pos.row_group;
                let h = (pos.hi - pos.lo + 1) as usize;
                memo.column(slot, h, pos.local_col)[row - 1] as i64
            }
            None => cell_access_unchecked(
                &self.stored_cell(pos.group, pos.lo, pos.hi),
                pos.local_col,
                row,
            ),
        }
    }

    /// Every row of the cell at `pos` in its column `pos.local_col`,
    /// relative to the representative; returns the cell height.
    fn cell_column(&self, pos: &CellPos, out: &mut [i64; MAX_DELTA as usize]) -> usize {
        let h = (pos.hi - pos.lo + 1) as usize;
        match &self.memo {
            Some(memo) => {
                let slot = pos.group * self.layout.rows as usize + pos.row_group;
                for (o, &v) in out.iter_mut().zip(memo.column(slot, h, pos.local_col)) {
                    *o = v as i64;
                }
            }
            None => {
                let cell = self.stored_cell(pos.group, pos.lo, pos.hi);
                for (r, o) in out[..h].iter_mut().enumerate() {
                    *o = cell.left(r + 1);
                }
                for c in 2..=pos.local_col {
                    if let Some(u) = cell.update(c) {
                        for v in &mut out[u.from_row as usize - 1..h] {
                            *v += u.delta as i64;
                        }
                    }
                }
            }
        }
        h
    }

    fn check_column(&self, col: u32) -> Result<()> {
        if col > self.columns() {
            return Err(Error::IndexOutOfRange {
                index: col as u64,
                len: self.columns() as u64,
            });
        }
        Ok(())
    }

    /// Number of segments in slabs `1..=slab` crossing column `col`.
    /// Column 0 lies before every segment; slabs beyond the effective count
    /// behave like the topmost one.
    pub fn slab_sum(&self, col: u32, slab: u32) -> Result<u64> {
        self.check_column(col)?;
        if slab > self.layout.delta.max(self.layout.rows) {
            return Err(Error::IndexOutOfRange {
                index: slab as u64,
                len: self.layout.delta as u64,
            });
        }
        Ok(self.slab_sum_unchecked(col, slab))
    }

    #[inline]
    pub fn slab_sum_unchecked(&self, col: u32, slab: u32) -> u64 {
        self.kept_sum(self.kept_column(col), slab)
    }

    #[inline]
    fn kept_sum(&self, col: u32, slab: u32) -> u64 {
        let slab = slab.min(self.layout.rows);
        if col == 0 || slab == 0 {
            return 0;
        }
        let pos = self.locate(col, slab);
        let v = self.cell_value(&pos, (slab - pos.lo + 1) as usize) + self.rep(pos.block, pos.row_group);
        debug_assert!(v >= 0);
        v as u64
    }

    /// Total number of segments crossing `col`.
    pub fn crossing(&self, col: u32) -> Result<u64> {
        self.slab_sum(col, self.layout.rows)
    }

    /// Smallest slab `k` with `slab_sum(col, k) >= target`.
    pub fn slab_select(&self, col: u32, target: u64) -> Result<u32> {
        self.check_column(col)?;
        let total = self.slab_sum_unchecked(col, self.layout.rows);
        if target == 0 || target > total {
            return Err(Error::RankOutOfRange {
                rank: target,
                count: total,
            });
        }
        self.slab_select_unchecked(col, target)
    }

    /// [`SlabIndex::slab_select`] for `1 <= target <= crossing(col)`.
    pub fn slab_select_unchecked(&self, col: u32, target: u64) -> Result<u32> {
        self.select_with_prefix(col, target).map(|(k, _)| k)
    }

    /// `(k, slab_sum(col, k - 1))` for `k = slab_select(col, target)`, with
    /// `1 <= target <= crossing(col)`.
    pub fn select_with_prefix(&self, col: u32, target: u64) -> Result<(u32, u64)> {
        let kept = self.kept_column(col);
        if kept == 0 {
            return Err(Error::Internal(format!("column {col} is crossed by no segment")));
        }
        let col = kept;
        let rows = self.layout.rows as usize;
        let c = col as usize - 1;
        let block = c / self.block_width as usize;
        let mask = self.group_starts[block];
        let ngroups = mask.count_ones() as usize;
        let t = target as i64;

        // Last row group whose representative is <= target, if any.
        let (mut lo, mut hi) = (0usize, ngroups);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.rep(block, mid) <= t {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let pred = lo.saturating_sub(1);

        let first = pred.saturating_sub(1);
        let last = (pred + 2).min(ngroups - 1);
        let group = c / rows;
        let local_col = c % rows + 1;
        let mut found = None;
        // Top value of the previous candidate, i.e. the row just below the
        // current one.
        let mut below = None;
        for g in first..=last {
            let lo_row = nth_set_bit(mask, g) + 1;
            let hi_row = if g + 1 < ngroups {
                nth_set_bit(mask, g + 1)
            } else {
                rows as u32
            };
            let pos = CellPos {
                block,
                group,
                row_group: g,
                lo: lo_row,
                hi: hi_row,
                local_col,
            };
            let top = self.cell_value(&pos, (hi_row - lo_row + 1) as usize) + self.rep(block, g);
            if top >= t {
                found = Some(pos);
                break;
            }
            below = Some(top);
        }
        let pos = found.ok_or_else(|| {
            Error::Internal(format!(
                "no candidate cell reaches {target} in column {col}"
            ))
        })?;
        let rep = self.rep(block, pos.row_group);
        let mut column = [0i64; MAX_DELTA as usize];
        let h = self.cell_column(&pos, &mut column);
        let k = column[..h].partition_point(|&v| v < t - rep) + 1;
        if k > h {
            return Err(Error::Internal(format!("no row of the cell reaches {target}")));
        }
        let prefix = if k > 1 {
            column[k - 2] + rep
        } else if pos.lo == 1 {
            0
        } else {
            match below {
                Some(v) => v,
                None => self.kept_sum(col, pos.lo - 1) as i64,
            }
        };
        Ok((pos.lo - 1 + k as u32, prefix as u64))
    }

    /// Code of the cell holding grid entry `(col, slab)`. Columns before
    /// the first update are all zero and lie in no cell.
    pub fn cell_code(&self, col: u32, slab: u32) -> Result<NormalizedCellCode> {
        self.check_column(col)?;
        let kept = self.kept_column(col);
        if kept == 0 || slab == 0 || slab > self.layout.rows {
            return Err(Error::IndexOutOfRange {
                index: if kept == 0 { col } else { slab } as u64,
                len: self.layout.rows as u64,
            });
        }
        let pos = self.locate(kept, slab);
        Ok(self.encode_cell(&self.stored_cell(pos.group, pos.lo, pos.hi)))
    }

    /// Local coordinates `(col', row')` of grid entry `(col, slab)` within
    /// its cell, and the cell's representative. Requires a cell, see
    /// [`SlabIndex::cell_code`].
    pub fn cell_coordinates(&self, col: u32, slab: u32) -> (usize, usize, i64) {
        let pos = self.locate(self.kept_column(col), slab);
        (
            pos.local_col,
            (slab - pos.lo + 1) as usize,
            self.rep(pos.block, pos.row_group),
        )
    }

    /// Payload size in bits, excluding the memoization cache.
    pub fn size_in_bits(&self) -> u64 {
        self.active.size_in_bits()
            + self.updates.size_in_bits()
            + self.group_starts.len() as u64 * 64
            + self.reps.size_in_bits()
            + self.leftcol.size_in_bits()
            + 4 * 64
    }

    /// Size of the memoization cache in bits (0 for the direct backend).
    pub fn memo_size_in_bits(&self) -> u64 {
        self.memo.as_ref().map_or(0, |m| {
            m.cell_ids.size_in_bits() + 32 * (m.offsets.len() + m.values.len()) as u64
        })
    }

    /// Number of distinct cell codes held by the memoization cache.
    pub fn distinct_cells(&self) -> Option<usize> {
        self.memo.as_ref().map(|m| m.offsets.len())
    }

    pub fn encode(&self, w: &mut Writer) {
        w.put_u32(self.layout.m);
        w.put_u32(self.layout.delta);
        w.put_u32(self.block_width);
        w.put_u8(match self.backend {
            Backend::Direct => 0,
            Backend::Memoized => 1,
        });
        self.active.encode(w);
        self.updates.encode(w);
        w.put_u64s(&self.group_starts);
        self.reps.encode(w);
        self.leftcol.encode(w);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let m = r.get_u32()?;
        let delta = r.get_u32()?;
        let block_width = r.get_u32()?;
        let backend = match r.get_u8()? {
            0 => Backend::Direct,
            1 => Backend::Memoized,
            b => return Err(Error::Format(format!("unknown backend tag {b}"))),
        };
        if !(2..=MAX_DELTA).contains(&delta) {
            return Err(Error::Format(format!("slab count {delta} out of range")));
        }
        let layout = SlabLayout::new(m as usize, delta);
        let active = RankBits::decode(r)?;
        let updates = IntVec::decode(r)?;
        let group_starts = r.get_u64s()?;
        let reps = IntVec::decode(r)?;
        let leftcol = IntVec::decode(r)?;
        let rows = layout.rows as usize;
        let cols = updates.len();
        let expect_ok = block_width as usize
            == rows.max(1) * ceil_log2(m as u64).max(1) as usize
            && active.len() == layout.columns() as usize
            && active.count_ones() == cols
            && updates.iter().all(|u| u != 0 && u <= 2 * rows as u64)
            && group_starts.len() == cols.div_ceil(block_width as usize)
            && reps.len() == group_starts.len() * rows
            && leftcol.len() == cols.div_ceil(rows.max(1)) * rows
            && group_starts.iter().all(|&g| g & 1 == 1 && g >> rows == 0);
        if !expect_ok {
            return Err(Error::Format("inconsistent slab index sections".into()));
        }
        let mut idx = Self {
            layout,
            block_width,
            active,
            updates,
            group_starts,
            reps,
            leftcol,
            backend,
            memo: None,
        };
        if backend == Backend::Memoized {
            idx.memo = Some(idx.build_memo());
        }
        Ok(idx)
    }
}

/// 0-based position of the `n`-th (0-based) set bit of `mask`.
#[inline]
fn nth_set_bit(mut mask: u64, n: usize) -> u32 {
    for _ in 0..n {
        mask &= mask - 1;
    }
    mask.trailing_zeros()
}

/// Outcome of one checked grid property.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub passed: bool,
    pub counterexample: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridReport {
    pub checks: Vec<PropertyCheck>,
}

impl GridReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| !c.passed)
    }
}

/// Property names reported by [`verify_grid_properties`].
pub const ADJACENT_ROW_STEP: &str = "adjacent-column-step";
pub const ROW_GROUP_SPREAD: &str = "row-group-column-spread";
pub const NONADJACENT_GROUP_GAP: &str = "nonadjacent-group-gap";
pub const REPRESENTATIVE_SEPARATION: &str = "representative-separation";
pub const STORED_DECOMPOSITION: &str = "stored-decomposition";

/// Re-sweeps the prefix grid of `segs` (without trusting any validation)
/// using `idx`'s slab layout and block width, and checks the structural
/// grid properties block by block (blocks run over the kept columns):
///
/// - adjacent entries in a row differ by at most 1;
/// - adjacent rows of one row group differ by at most `2b` in every column;
/// - entries of non-adjacent row groups differ by more than `b`;
/// - everything at or below the first row of group `l - 1` is below the
///   representative `r_l`, everything in groups `l + 1` and up is above it;
/// - the kept columns, row groups and representatives stored in `idx`
///   equal the ones recomputed from the grid.
pub fn verify_grid_properties(idx: &SlabIndex, segs: &RankSpaceSegments) -> GridReport {
    let layout = idx.layout;
    let rows = layout.rows.max(1) as usize;
    let cols = layout.columns() as usize;
    let b = idx.block_width as i64;

    let mut delta_at = vec![vec![0i64; rows + 1]; cols + 2];
    for s in segs.segments() {
        let slab = (layout.slab_of(s.y) as usize).min(rows);
        if (s.x1 as usize) <= cols + 1 {
            delta_at[s.x1 as usize][slab] += 1;
        }
        if (s.x2 as usize + 1) <= cols + 1 {
            delta_at[s.x2 as usize + 1][slab] -= 1;
        }
    }

    let mut failures: HashMap<&'static str, String> = HashMap::new();
    let mut fail = |name: &'static str, msg: String| {
        failures.entry(name).or_insert(msg);
    };

    let mut count = vec![0i64; rows + 1];
    let mut prev: Vec<i64> = vec![0; rows + 1];
    let mut block_grid: Vec<Vec<i64>> = Vec::new();
    let mut block_first_col = 1usize;
    // Kept columns seen so far.
    let mut kept = 0usize;
    let flush = |grid: &Vec<Vec<i64>>, first_col: usize, fail: &mut dyn FnMut(&'static str, String)| {
        if grid.is_empty() {
            return;
        }
        let block = (first_col - 1) / b as usize;
        // Row groups from the block's first column.
        let first = &grid[0];
        let mut groups: Vec<(usize, usize)> = Vec::new();
        for r in 1..=rows {
            if r == 1 || first[r] - first[r - 1] > b {
                groups.push((r, r));
            } else {
                groups.last_mut().unwrap().1 = r;
            }
        }
        let reps: Vec<i64> = groups.iter().map(|&(lo, _)| first[lo]).collect();
        let stored: Vec<(usize, usize)> = idx
            .row_groups(block)
            .into_iter()
            .map(|(lo, hi)| (lo as usize, hi as usize))
            .collect();
        let stored_reps: Vec<i64> = idx.representatives(block).into_iter().map(|v| v as i64).collect();
        if stored != groups || stored_reps != reps {
            fail(
                STORED_DECOMPOSITION,
                format!("block {block}: stored groups {stored:?} reps {stored_reps:?}, grid gives {groups:?} {reps:?}"),
            );
        }
        for (k, col) in grid.iter().enumerate() {
            let c = first_col + k;
            for &(lo, hi) in &groups {
                for r in lo + 1..=hi {
                    if (col[r] - col[r - 1]).abs() > 2 * b {
                        fail(
                            ROW_GROUP_SPREAD,
                            format!("kept column {c}, rows {} and {r}: {} vs {}", r - 1, col[r - 1], col[r]),
                        );
                    }
                }
            }
            for g in 0..groups.len() {
                for h in g + 2..groups.len() {
                    for r1 in groups[g].0..=groups[g].1 {
                        for r2 in groups[h].0..=groups[h].1 {
                            if (col[r2] - col[r1]).abs() <= b {
                                fail(
                                    NONADJACENT_GROUP_GAP,
                                    format!("kept column {c}, rows {r1} and {r2}: {} vs {}", col[r1], col[r2]),
                                );
                            }
                        }
                    }
                }
            }
            for l in 1..groups.len() {
                let rep = reps[l];
                let upto = groups[l - 1].0;
                if let Some(r) = (1..=upto).find(|&r| col[r] >= rep) {
                    fail(
                        REPRESENTATIVE_SEPARATION,
                        format!("kept column {c}, row {r} = {} not below representative {rep} of group {l}", col[r]),
                    );
                }
                if let Some(lo) = groups.get(l + 1).map(|g| g.0) {
                    if let Some(r) = (lo..=rows).find(|&r| col[r] <= rep) {
                        fail(
                            REPRESENTATIVE_SEPARATION,
                            format!("kept column {c}, row {r} = {} not above representative {rep} of group {l}", col[r]),
                        );
                    }
                }
            }
        }
    };

    for c in 1..=cols {
        for r in 1..=rows {
            count[r] += delta_at[c][r];
        }
        let mut col = vec![0i64; rows + 1];
        for r in 1..=rows {
            col[r] = col[r - 1] + count[r];
        }
        if let Some(r) = (1..=rows).find(|&r| (col[r] - prev[r]).abs() > 1) {
            fail(
                ADJACENT_ROW_STEP,
                format!("row {r}, columns {} and {c}: {} vs {}", c - 1, prev[r], col[r]),
            );
        }
        let has_update = delta_at[c].iter().any(|&d| d != 0);
        if idx.active.get(c - 1) != has_update {
            fail(
                STORED_DECOMPOSITION,
                format!("column {c}: stored update flag disagrees with the segments"),
            );
        }
        if idx.active.get(c - 1) {
            kept += 1;
            if (kept - 1) % b as usize == 0 {
                flush(&block_grid, block_first_col, &mut fail);
                block_grid.clear();
                block_first_col = kept;
            }
            block_grid.push(col.clone());
        }
        prev = col;
    }
    flush(&block_grid, block_first_col, &mut fail);

    let checks = [
        ADJACENT_ROW_STEP,
        ROW_GROUP_SPREAD,
        NONADJACENT_GROUP_GAP,
        REPRESENTATIVE_SEPARATION,
        STORED_DECOMPOSITION,
    ]
    .into_iter()
    .map(|name| {
        let counterexample = failures.get(name).cloned();
        PropertyCheck {
            name,
            passed: counterexample.is_none(),
            counterexample,
        }
    })
    .collect();
    GridReport { checks }
}
