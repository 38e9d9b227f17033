//! Oracles, generators, fault injectors and a baseline for comparison.
//!
//! Everything here favors obviousness over speed.

use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::euler::{Segment, SegmentSet};
use crate::slab::{RankSegment, RankSpaceSegments, SlabLayout};
use crate::version::{Edge, EditOp, Symbol, VersionId, VersionTree};

/// Environment variable that overrides generator seeds.
pub const SEED_ENV: &str = "VERSTRING_SEED";

/// `VERSTRING_SEED` if set and numeric, else `default`.
pub fn seed_from_env(default: u64) -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(default)
}

/// The `j`-th lowest segment crossing `x`, by scanning and sorting.
pub fn naive_segment_select(segs: &SegmentSet, x: i64, j: u64) -> Result<Segment> {
    let mut crossing: Vec<Segment> = segs.segments().iter().copied().filter(|s| s.crosses(x)).collect();
    crossing.sort_by_key(|s| (s.y, s.x1));
    let count = crossing.len() as u64;
    if j == 0 || j > count {
        return Err(Error::RankOutOfRange { rank: j, count });
    }
    Ok(crossing[j as usize - 1])
}

/// Labels of the segments crossing `x`, bottom to top.
pub fn naive_crossing_labels(segs: &SegmentSet, x: i64) -> Vec<Symbol> {
    let mut crossing: Vec<Segment> = segs.segments().iter().copied().filter(|s| s.crosses(x)).collect();
    crossing.sort_by_key(|s| (s.y, s.x1));
    crossing.into_iter().map(|s| s.label).collect()
}

/// Per-slab crossing counts at column `col`: entry `k - 1` counts the
/// segments of slab `k` with `x1 <= col <= x2`.
pub fn naive_slab_counts(segs: &RankSpaceSegments, layout: SlabLayout, col: u32) -> Vec<u64> {
    let mut counts = vec![0u64; layout.rows as usize];
    for s in segs.segments() {
        if s.x1 <= col && col <= s.x2 {
            counts[layout.slab_of(s.y) as usize - 1] += 1;
        }
    }
    counts
}

/// `(slab_sum(col, slab), slab_select(col, target))` by scanning.
pub fn naive_slab_queries(
    segs: &RankSpaceSegments,
    layout: SlabLayout,
    col: u32,
    slab: u32,
    target: u64,
) -> (u64, Option<u32>) {
    let counts = naive_slab_counts(segs, layout, col);
    let sum = counts[..(slab as usize).min(counts.len())].iter().sum();
    let mut acc = 0;
    let mut select = None;
    for (k, c) in counts.iter().enumerate() {
        acc += c;
        if target >= 1 && acc >= target {
            select = Some(k as u32 + 1);
            break;
        }
    }
    (sum, select)
}

/// A random valid rank-space instance with `m` segments.
///
/// Endpoints occupy the odd columns `1, 3, .., 4m - 1` and are paired
/// within windows of random size, so instances range from many short
/// segments to long nested ones. Heights are either a random permutation
/// or follow the left endpoints.
pub fn random_rank_space<R: rand::Rng>(rng: &mut R, m: usize) -> RankSpaceSegments {
    let mut cols: Vec<u32> = (0..2 * m as u32).map(|k| 2 * k + 1).collect();
    let window = match rng.random_range(0..3) {
        0 => 2,
        1 => 2 * rng.random_range(1..=8usize),
        _ => 2 * m.max(1),
    };
    for chunk in cols.chunks_mut(window) {
        chunk.shuffle(rng);
    }
    let mut pairs: Vec<(u32, u32)> = cols
        .chunks(2)
        .map(|p| (p[0].min(p[1]), p[0].max(p[1])))
        .collect();
    if rng.random_bool(0.5) {
        pairs.sort_unstable();
    } else {
        pairs.shuffle(rng);
    }
    let segs = pairs
        .into_iter()
        .enumerate()
        .map(|(i, (x1, x2))| RankSegment { x1, x2, y: i as u32 + 1 })
        .collect();
    RankSpaceSegments::new(segs).expect("generator emits valid rank-space segments")
}

/// Moves the start of one segment onto the column of another segment's
/// start, so that column carries two updates.
pub fn inject_double_update(segs: &RankSpaceSegments) -> RankSpaceSegments {
    let mut v = segs.segments().to_vec();
    assert!(v.len() >= 2, "need two segments to inject a fault");
    v.sort_by_key(|s| s.x1);
    let target = v[0].x1;
    let last = v.len() - 1;
    let victim = (1..v.len()).find(|&i| v[i].x2 > target).unwrap_or(last);
    v[victim].x1 = target;
    RankSpaceSegments::new_unchecked(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Total node count including the root.
    pub nodes: usize,
    /// Relative weights of insert, delete and replace edges. Deletes and
    /// replaces fall back to inserts on empty parents.
    pub op_weights: [u32; 3],
    /// Probability that a new node hangs below the previous one.
    pub path_bias: f64,
    /// Characters are drawn from the first `alphabet` lowercase letters
    /// (and code points above them when `alphabet > 26`).
    pub alphabet: u32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            nodes: 100,
            op_weights: [6, 3, 1],
            path_bias: 0.5,
            alphabet: 4,
        }
    }
}

/// Seeded random version tree; every edge is valid for its parent.
pub fn gen_version_tree(cfg: &GeneratorConfig) -> VersionTree {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.nodes.max(1);
    let mut len = vec![0u64; n];
    let mut edges = Vec::with_capacity(n - 1);
    let total: u32 = cfg.op_weights.iter().sum::<u32>().max(1);
    let alphabet = cfg.alphabet.max(1);
    for v in 1..n {
        let parent = if v == 1 || rng.random_bool(cfg.path_bias.clamp(0.0, 1.0)) {
            v - 1
        } else {
            rng.random_range(0..v)
        };
        let pl = len[parent];
        let roll = rng.random_range(0..total);
        let ch = {
            let c = rng.random_range(0..alphabet);
            if c < 26 { 'a' as u32 + c } else { 0x100 + c }
        };
        let op = if pl == 0 || roll < cfg.op_weights[0] {
            EditOp::Insert {
                pos: rng.random_range(0..=pl) as u32,
                ch,
            }
        } else if roll < cfg.op_weights[0] + cfg.op_weights[1] {
            EditOp::Delete {
                pos: rng.random_range(1..=pl) as u32,
            }
        } else {
            EditOp::Replace {
                pos: rng.random_range(1..=pl) as u32,
                ch,
            }
        };
        len[v] = (pl as i64 + op.length_delta()) as u64;
        edges.push(Edge {
            parent: VersionId(parent as u32),
            op,
        });
    }
    VersionTree::new(edges).expect("generator emits valid trees")
}

/// Every node's string, computed top-down by copying the parent's string.
pub fn materialize_all(tree: &VersionTree) -> Vec<Vec<Symbol>> {
    let mut out: Vec<Vec<Symbol>> = vec![Vec::new(); tree.node_count()];
    for v in tree.bfs_order().collect::<Vec<_>>() {
        if let Some(e) = tree.edge(v) {
            let mut s = out[e.parent.index()].clone();
            e.op.apply(&mut s);
            out[v.index()] = s;
        }
    }
    out
}

#[derive(Debug)]
struct BstNode {
    left: Link,
    right: Link,
    prio: u64,
    size: u32,
    symbol: Symbol,
}

type Link = Option<Rc<BstNode>>;

fn size(t: &Link) -> u32 {
    t.as_ref().map_or(0, |n| n.size)
}

fn node(left: Link, right: Link, prio: u64, symbol: Symbol) -> Link {
    let size = size(&left) + size(&right) + 1;
    Some(Rc::new(BstNode {
        left,
        right,
        prio,
        size,
        symbol,
    }))
}

/// Splits into the first `k` elements and the rest, copying the path.
fn split(t: &Link, k: u32) -> (Link, Link) {
    match t {
        None => (None, None),
        Some(n) => {
            let ls = size(&n.left);
            if k <= ls {
                let (a, b) = split(&n.left, k);
                (a, node(b, n.right.clone(), n.prio, n.symbol))
            } else {
                let (a, b) = split(&n.right, k - ls - 1);
                (node(n.left.clone(), a, n.prio, n.symbol), b)
            }
        }
    }
}

fn merge(a: &Link, b: &Link) -> Link {
    match (a, b) {
        (None, _) => b.clone(),
        (_, None) => a.clone(),
        (Some(x), Some(y)) => {
            if x.prio > y.prio {
                node(x.left.clone(), merge(&x.right, b), x.prio, x.symbol)
            } else {
                node(merge(a, &y.left), y.right.clone(), y.prio, y.symbol)
            }
        }
    }
}

/// Path-copying persistent treap holding every version of a tree.
#[derive(Debug)]
pub struct BaselinePersistentBst {
    roots: Vec<Link>,
}

impl BaselinePersistentBst {
    pub fn len(&self, v: VersionId) -> u64 {
        size(&self.roots[v.index()]) as u64
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// `S(v)[j]`, 1-based.
    pub fn access(&self, v: VersionId, j: u64) -> Option<Symbol> {
        let mut t = self.roots.get(v.index())?.as_ref();
        let mut j = u32::try_from(j).ok()?;
        while let Some(n) = t {
            let ls = size(&n.left);
            if j <= ls {
                t = n.left.as_ref();
            } else if j == ls + 1 {
                return Some(n.symbol);
            } else {
                j -= ls + 1;
                t = n.right.as_ref();
            }
        }
        None
    }

    pub fn string(&self, v: VersionId) -> Vec<Symbol> {
        fn walk(t: &Link, out: &mut Vec<Symbol>) {
            if let Some(n) = t {
                walk(&n.left, out);
                out.push(n.symbol);
                walk(&n.right, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.roots[v.index()], &mut out);
        out
    }
}

/// Builds the baseline by applying each edge to its parent's version.
pub fn baseline_persistent_bst(tree: &VersionTree) -> BaselinePersistentBst {
    let mut roots: Vec<Link> = vec![None; tree.node_count()];
    let mut counter = 0u64;
    let mut prio = || {
        counter += 1;
        let mut x = counter.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        x ^= x >> 31;
        x.wrapping_mul(0xBF58_476D_1CE4_E5B9)
    };
    for v in tree.bfs_order().collect::<Vec<_>>() {
        let Some(e) = tree.edge(v) else { continue };
        let t = &roots[e.parent.index()];
        let new = match e.op {
            EditOp::Insert { pos, ch } => {
                let (a, b) = split(t, pos);
                merge(&merge(&a, &node(None, None, prio(), ch)), &b)
            }
            EditOp::Delete { pos } => {
                let (a, rest) = split(t, pos - 1);
                let (_, b) = split(&rest, 1);
                merge(&a, &b)
            }
            EditOp::Replace { pos, ch } => {
                let (a, rest) = split(t, pos - 1);
                let (_, b) = split(&rest, 1);
                merge(&merge(&a, &node(None, None, prio(), ch)), &b)
            }
        };
        roots[v.index()] = new;
    }
    BaselinePersistentBst { roots }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::version::{example_tree, str_to_symbols};

    #[test]
    fn generator_is_deterministic_and_valid() {
        let cfg = GeneratorConfig {
            seed: 42,
            nodes: 300,
            ..GeneratorConfig::default()
        };
        let a = gen_version_tree(&cfg);
        assert_eq!(a.to_text(), gen_version_tree(&cfg).to_text());
        assert_eq!(a.node_count(), 300);
        a.validate().unwrap();
        let all = materialize_all(&a);
        for v in 0..300 {
            let v = VersionId(v);
            assert_eq!(all[v.index()], a.materialize_naive(v).unwrap());
        }
    }

    #[test]
    fn baseline_matches_example() {
        let t = example_tree();
        let b = baseline_persistent_bst(&t);
        let expect = ["", "a", "ac", "c", "cc", "ab", "abb", "bb"];
        for (v, s) in expect.iter().enumerate() {
            assert_eq!(b.string(VersionId(v as u32)), str_to_symbols(s));
        }
        assert_eq!(b.access(VersionId(0), 1), None);
        assert_eq!(b.access(VersionId(6), 2), Some('b' as u32));
    }

    #[test]
    fn baseline_matches_naive_on_random_trees() {
        for seed in 0..5 {
            let t = gen_version_tree(&GeneratorConfig {
                seed,
                nodes: 400,
                ..GeneratorConfig::default()
            });
            let b = baseline_persistent_bst(&t);
            let all = materialize_all(&t);
            for (v, s) in all.iter().enumerate() {
                let v = VersionId(v as u32);
                assert_eq!(b.len(v), s.len() as u64);
                for (j, &c) in s.iter().enumerate() {
                    assert_eq!(b.access(v, j as u64 + 1), Some(c));
                }
            }
        }
    }

    #[test]
    fn slab_oracle_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let segs = random_rank_space(&mut rng, 50);
        let layout = SlabLayout::new(50, 4);
        for col in 0..=200 {
            let mut prev = 0;
            for slab in 0..=layout.rows {
                let (sum, _) = naive_slab_queries(&segs, layout, col, slab, 0);
                assert!(sum >= prev);
                prev = sum;
            }
            assert_eq!(naive_slab_queries(&segs, layout, 0, layout.rows, 1).1, None);
        }
    }
}
