//! Sequence of characters that are each either marked or unmarked.
//!
//! Elements are addressed by the rank of unmarked elements, and each element
//! keeps a stable handle so that a later traversal can toggle exactly the
//! element an earlier one touched. Backed by an implicit treap augmented
//! with subtree sizes and unmarked counts, with parent links so a toggle can
//! repair the counts on its root path.

use crate::version::Symbol;

const NIL: u32 = u32::MAX;

/// Stable reference to one element of a [`MarkedSequence`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Handle(pub u32);

#[derive(Debug, Clone, Default)]
pub struct MarkedSequence {
    left: Vec<u32>,
    right: Vec<u32>,
    parent: Vec<u32>,
    prio: Vec<u64>,
    size: Vec<u32>,
    unmarked: Vec<u32>,
    marked: Vec<bool>,
    symbol: Vec<Symbol>,
    root: u32,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl MarkedSequence {
    pub fn new() -> Self {
        Self {
            root: NIL,
            ..Self::default()
        }
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            left: Vec::with_capacity(n),
            right: Vec::with_capacity(n),
            parent: Vec::with_capacity(n),
            prio: Vec::with_capacity(n),
            size: Vec::with_capacity(n),
            unmarked: Vec::with_capacity(n),
            marked: Vec::with_capacity(n),
            symbol: Vec::with_capacity(n),
            root: NIL,
        }
    }

    /// Total number of elements, marked or not.
    pub fn len(&self) -> usize {
        self.size_of(self.root) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.root == NIL
    }

    pub fn unmarked_len(&self) -> usize {
        self.unmarked_of(self.root) as usize
    }

    #[inline]
    fn size_of(&self, t: u32) -> u32 {
        if t == NIL {
            0
        } else {
            self.size[t as usize]
        }
    }

    #[inline]
    fn unmarked_of(&self, t: u32) -> u32 {
        if t == NIL {
            0
        } else {
            self.unmarked[t as usize]
        }
    }

    fn pull(&mut self, t: u32) {
        let (l, r) = (self.left[t as usize], self.right[t as usize]);
        let own = u32::from(!self.marked[t as usize]);
        self.size[t as usize] = self.size_of(l) + self.size_of(r) + 1;
        self.unmarked[t as usize] = self.unmarked_of(l) + self.unmarked_of(r) + own;
        if l != NIL {
            self.parent[l as usize] = t;
        }
        if r != NIL {
            self.parent[r as usize] = t;
        }
    }

    /// Splits `t` into its first `k` elements and the rest.
    fn split(&mut self, t: u32, k: u32) -> (u32, u32) {
        if t == NIL {
            return (NIL, NIL);
        }
        let ls = self.size_of(self.left[t as usize]);
        if k <= ls {
            let (a, b) = self.split(self.left[t as usize], k);
            self.left[t as usize] = b;
            self.pull(t);
            (a, t)
        } else {
            let (a, b) = self.split(self.right[t as usize], k - ls - 1);
            self.right[t as usize] = a;
            self.pull(t);
            (t, b)
        }
    }

    fn merge(&mut self, a: u32, b: u32) -> u32 {
        if a == NIL {
            return b;
        }
        if b == NIL {
            return a;
        }
        if self.prio[a as usize] > self.prio[b as usize] {
            let r = self.merge(self.right[a as usize], b);
            self.right[a as usize] = r;
            self.pull(a);
            a
        } else {
            let l = self.merge(a, self.left[b as usize]);
            self.left[b as usize] = l;
            self.pull(b);
            b
        }
    }

    /// Number of elements (marked or not) up to and including the `i`-th
    /// unmarked element; 0 when `i == 0`.
    fn prefix_through_unmarked(&self, mut i: u32) -> u32 {
        if i == 0 {
            return 0;
        }
        let mut t = self.root;
        let mut acc = 0;
        loop {
            assert!(t != NIL, "fewer unmarked elements than requested");
            let l = self.left[t as usize];
            let lu = self.unmarked_of(l);
            if i <= lu {
                t = l;
                continue;
            }
            i -= lu;
            acc += self.size_of(l) + 1;
            if !self.marked[t as usize] {
                if i == 1 {
                    return acc;
                }
                i -= 1;
            }
            t = self.right[t as usize];
        }
    }

    /// Inserts an unmarked `symbol` immediately to the right of the `i`-th
    /// unmarked element (`i == 0` inserts at the front).
    pub fn insert_after_unmarked(&mut self, i: usize, symbol: Symbol) -> Handle {
        assert!(i <= self.unmarked_len(), "insert position {i} out of range");
        let id = self.symbol.len() as u32;
        self.left.push(NIL);
        self.right.push(NIL);
        self.parent.push(NIL);
        self.prio.push(splitmix(id as u64));
        self.size.push(1);
        self.unmarked.push(1);
        self.marked.push(false);
        self.symbol.push(symbol);

        let p = self.prefix_through_unmarked(i as u32);
        let root = self.root;
        let (a, b) = self.split(root, p);
        let ab = self.merge(a, id);
        self.root = self.merge(ab, b);
        self.parent[self.root as usize] = NIL;
        Handle(id)
    }

    /// Handle of the `i`-th unmarked element (1-based).
    pub fn nth_unmarked(&self, mut i: usize) -> Handle {
        assert!(
            i >= 1 && i <= self.unmarked_len(),
            "unmarked rank {i} out of range"
        );
        let mut t = self.root;
        loop {
            let l = self.left[t as usize];
            let lu = self.unmarked_of(l) as usize;
            if i <= lu {
                t = l;
                continue;
            }
            i -= lu;
            if !self.marked[t as usize] {
                if i == 1 {
                    return Handle(t);
                }
                i -= 1;
            }
            t = self.right[t as usize];
        }
    }

    pub fn is_marked(&self, h: Handle) -> bool {
        self.marked[h.0 as usize]
    }

    pub fn symbol(&self, h: Handle) -> Symbol {
        self.symbol[h.0 as usize]
    }

    fn set_marked(&mut self, h: Handle, marked: bool) {
        if self.marked[h.0 as usize] == marked {
            return;
        }
        self.marked[h.0 as usize] = marked;
        let mut t = h.0;
        while t != NIL {
            let (l, r) = (self.left[t as usize], self.right[t as usize]);
            self.unmarked[t as usize] =
                self.unmarked_of(l) + self.unmarked_of(r) + u32::from(!self.marked[t as usize]);
            t = self.parent[t as usize];
        }
    }

    pub fn mark(&mut self, h: Handle) {
        self.set_marked(h, true);
    }

    pub fn unmark(&mut self, h: Handle) {
        self.set_marked(h, false);
    }

    /// Handles in sequence order.
    pub fn in_order(&self) -> Vec<Handle> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = Vec::new();
        let mut t = self.root;
        while t != NIL || !stack.is_empty() {
            while t != NIL {
                stack.push(t);
                t = self.left[t as usize];
            }
            let u = stack.pop().unwrap();
            out.push(Handle(u));
            t = self.right[u as usize];
        }
        out
    }

    /// Unmarked symbols in order.
    pub fn unmarked_symbols(&self) -> Vec<Symbol> {
        self.in_order()
            .into_iter()
            .filter(|&h| !self.is_marked(h))
            .map(|h| self.symbol(h))
            .collect()
    }

    /// 1-based position of every element in the current order, indexed by
    /// handle.
    pub fn positions(&self) -> Vec<u32> {
        let mut pos = vec![0u32; self.symbol.len()];
        for (i, h) in self.in_order().into_iter().enumerate() {
            pos[h.0 as usize] = i as u32 + 1;
        }
        pos
    }

    /// Checks that every subtree's augmented counts match a recount.
    pub fn check_counts(&self) -> bool {
        fn walk(s: &MarkedSequence, t: u32, parent: u32) -> Option<(u32, u32)> {
            if t == NIL {
                return Some((0, 0));
            }
            if s.parent[t as usize] != parent {
                return None;
            }
            let (ls, lu) = walk(s, s.left[t as usize], t)?;
            let (rs, ru) = walk(s, s.right[t as usize], t)?;
            let size = ls + rs + 1;
            let un = lu + ru + u32::from(!s.marked[t as usize]);
            (s.size[t as usize] == size && s.unmarked[t as usize] == un).then_some((size, un))
        }
        walk(self, self.root, NIL).is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Plain vector model: (symbol, marked, handle).
    #[derive(Default)]
    struct Model(Vec<(Symbol, bool, u32)>);

    impl Model {
        fn insert_after_unmarked(&mut self, i: usize, s: Symbol, h: u32) {
            let at = if i == 0 {
                0
            } else {
                let mut seen = 0;
                let mut at = 0;
                for (k, e) in self.0.iter().enumerate() {
                    if !e.1 {
                        seen += 1;
                        if seen == i {
                            at = k + 1;
                            break;
                        }
                    }
                }
                at
            };
            self.0.insert(at, (s, false, h));
        }
        fn unmarked(&self) -> Vec<Symbol> {
            self.0.iter().filter(|e| !e.1).map(|e| e.0).collect()
        }
        fn nth_unmarked(&self, i: usize) -> u32 {
            self.0.iter().filter(|e| !e.1).nth(i - 1).unwrap().2
        }
        fn set(&mut self, h: u32, m: bool) {
            self.0.iter_mut().find(|e| e.2 == h).unwrap().1 = m;
        }
    }

    #[test]
    fn insert_skips_marked_run() {
        let mut s = MarkedSequence::new();
        let a = s.insert_after_unmarked(0, 'a' as u32);
        let b = s.insert_after_unmarked(1, 'b' as u32);
        s.mark(a);
        let c = s.insert_after_unmarked(0, 'c' as u32);
        assert_eq!(s.unmarked_symbols(), ['c' as u32, 'b' as u32]);
        s.unmark(a);
        assert_eq!(s.unmarked_symbols(), ['c' as u32, 'a' as u32, 'b' as u32]);
        assert_eq!(s.positions(), [2, 3, 1]);
        assert_eq!(s.nth_unmarked(2), a);
        assert!(!s.is_marked(b) && !s.is_marked(c));
        assert!(s.check_counts());
    }

    proptest! {
        #[test]
        fn matches_vector_model(ops in prop::collection::vec((0u8..3, 0usize..1000, 0u32..50), 1..200)) {
            let mut s = MarkedSequence::new();
            let mut m = Model::default();
            for (kind, r, sym) in ops {
                let un = s.unmarked_len();
                match kind {
                    0 => {
                        let i = r % (un + 1);
                        let h = s.insert_after_unmarked(i, sym);
                        m.insert_after_unmarked(i, sym, h.0);
                    }
                    1 if un > 0 => {
                        let i = r % un + 1;
                        let h = s.nth_unmarked(i);
                        prop_assert_eq!(h.0, m.nth_unmarked(i));
                        s.mark(h);
                        m.set(h.0, true);
                    }
                    _ if !s.is_empty() => {
                        let h = Handle((r % s.len()) as u32);
                        s.unmark(h);
                        m.set(h.0, false);
                    }
                    _ => {}
                }
                prop_assert_eq!(s.unmarked_symbols(), m.unmarked());
            }
            prop_assert!(s.check_counts());
            let order: Vec<u32> = s.in_order().into_iter().map(|h| h.0).collect();
            let model_order: Vec<u32> = m.0.iter().map(|e| e.2).collect();
            prop_assert_eq!(order, model_order);
        }
    }
}
