//! Packed small-alphabet sequences with access, rank and select.
//!
//! Symbols are stored at `ceil(log2 sigma)` bits each. A directory samples,
//! every `sample_rate` positions, the count of each symbol in the prefix
//! before that position; a query reads one sample and counts the remaining
//! fewer than `sample_rate` symbols with word-parallel comparisons.

use crate::bits::{bits_for, ceil_log2, low_mask, IntVec};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedSequence {
    len: usize,
    sigma: u32,
    sample_rate: usize,
    symbols: IntVec,
    /// `directory[(t - 1) * sigma + c]` = occurrences of `c` among the first
    /// `t * sample_rate` symbols, for `t >= 1`.
    directory: IntVec,
    /// Word-parallel comparison masks for the symbol width.
    masks: FieldMasks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct FieldMasks {
    per_word: usize,
    ones: u64,
    low: u64,
    high: u64,
}

impl FieldMasks {
    fn new(w: u32) -> Self {
        let per_word = (64 / w) as usize;
        let ones = repeat_field(1, w, per_word);
        Self {
            per_word,
            ones,
            low: low_mask(w - 1).wrapping_mul(ones),
            high: ones << (w - 1),
        }
    }
}

impl PackedSequence {
    /// Builds over `symbols`, each `< sigma`.
    pub fn new(symbols: &[u32], sigma: u32, sample_rate: usize) -> Result<Self> {
        if sigma == 0 && !symbols.is_empty() {
            return Err(Error::SymbolOutOfAlphabet {
                symbol: symbols[0] as u64,
                sigma: 0,
            });
        }
        if sample_rate == 0 {
            return Err(Error::Internal("sample rate must be positive".into()));
        }
        let width = ceil_log2(sigma as u64).max(1);
        let mut packed = IntVec::with_len(width, symbols.len());
        for (i, &c) in symbols.iter().enumerate() {
            if c >= sigma {
                return Err(Error::SymbolOutOfAlphabet {
                    symbol: c as u64,
                    sigma: sigma as u64,
                });
            }
            packed.set(i, c as u64);
        }
        let samples = symbols.len() / sample_rate;
        let dir_width = bits_for(symbols.len() as u64);
        let mut directory = IntVec::with_len(dir_width, samples * sigma as usize);
        let mut counts = vec![0u64; sigma as usize];
        for (i, &c) in symbols.iter().enumerate() {
            counts[c as usize] += 1;
            if (i + 1) % sample_rate == 0 {
                let t = (i + 1) / sample_rate;
                for (cc, &k) in counts.iter().enumerate() {
                    directory.set((t - 1) * sigma as usize + cc, k);
                }
            }
        }
        Ok(Self {
            len: symbols.len(),
            sigma,
            sample_rate,
            masks: FieldMasks::new(packed.width()),
            symbols: packed,
            directory,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sigma(&self) -> u32 {
        self.sigma
    }

    pub fn sample_rate(&self) -> usize {
        self.sample_rate
    }

    pub fn width(&self) -> u32 {
        self.symbols.width()
    }

    /// The `i`-th symbol, 1-based.
    pub fn access(&self, i: usize) -> Result<u32> {
        if i == 0 || i > self.len {
            return Err(Error::IndexOutOfRange {
                index: i as u64,
                len: self.len as u64,
            });
        }
        Ok(self.get(i))
    }

    /// Unchecked 1-based access.
    #[inline]
    pub fn get(&self, i: usize) -> u32 {
        self.symbols.get(i - 1) as u32
    }

    /// Occurrences of `c` among the first `i` symbols.
    pub fn rank(&self, i: usize, c: u32) -> Result<usize> {
        if c >= self.sigma {
            return Err(Error::SymbolOutOfAlphabet {
                symbol: c as u64,
                sigma: self.sigma as u64,
            });
        }
        if i > self.len {
            return Err(Error::IndexOutOfRange {
                index: i as u64,
                len: self.len as u64,
            });
        }
        Ok(self.rank_unchecked(i, c))
    }

    #[inline]
    pub fn rank_unchecked(&self, i: usize, c: u32) -> usize {
        let t = i / self.sample_rate;
        let base = if t == 0 { 0 } else { self.sample(t, c) };
        base + self.count_in(t * self.sample_rate, i, c)
    }

    #[inline]
    fn sample(&self, t: usize, c: u32) -> usize {
        self.directory.get((t - 1) * self.sigma as usize + c as usize) as usize
    }

    /// Occurrences of `c` in 0-based positions `lo..hi`.
    #[inline]
    fn count_in(&self, lo: usize, hi: usize, c: u32) -> usize {
        let w = self.symbols.width();
        let FieldMasks { per_word, ones, low, high } = self.masks;
        let pattern = (c as u64).wrapping_mul(ones);
        let mut count = 0;
        let mut pos = lo;
        while pos < hi {
            let k = per_word.min(hi - pos);
            let nbits = k as u32 * w;
            let window = self.symbols.read_bits(pos as u64 * w as u64, nbits);
            let x = window ^ pattern;
            let nonzero = (((x & low) + low) | x) & high & low_mask(nbits);
            count += k - nonzero.count_ones() as usize;
            pos += k;
        }
        count
    }

    /// Position (1-based) of the `k`-th occurrence of `c`.
    pub fn select(&self, k: usize, c: u32) -> Result<usize> {
        let total = self.rank(self.len, c)?;
        if k == 0 || k > total {
            return Err(Error::RankOutOfRange {
                rank: k as u64,
                count: total as u64,
            });
        }
        // Largest sample t with count(prefix t * S) < k.
        let samples = self.len / self.sample_rate;
        let (mut lo, mut hi) = (0usize, samples);
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if self.sample(mid, c) < k {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        let mut seen = if lo == 0 { 0 } else { self.sample(lo, c) };
        let mut pos = lo * self.sample_rate;
        loop {
            pos += 1;
            if self.get(pos) == c {
                seen += 1;
                if seen == k {
                    return Ok(pos);
                }
            }
        }
    }

    /// Bits of storage, counting whole words.
    pub fn size_in_bits(&self) -> u64 {
        self.symbols.size_in_bits() + self.directory.size_in_bits()
    }

    /// The stated bound `N*w + floor(N/S)*sigma*ceil(log2(N+1))`, excluding
    /// word rounding.
    pub fn size_bound_bits(&self) -> u64 {
        let n = self.len as u64;
        n * self.width() as u64
            + (n / self.sample_rate as u64) * self.sigma as u64 * bits_for(n) as u64
    }

    pub fn encode(&self, w: &mut Writer) {
        w.put_u64(self.len as u64);
        w.put_u32(self.sigma);
        w.put_u64(self.sample_rate as u64);
        self.symbols.encode(w);
        self.directory.encode(w);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let len = r.get_u64()? as usize;
        let sigma = r.get_u32()?;
        let sample_rate = r.get_u64()? as usize;
        let symbols = IntVec::decode(r)?;
        let directory = IntVec::decode(r)?;
        if sample_rate == 0
            || symbols.len() != len
            || directory.len() != (len / sample_rate) * sigma as usize
        {
            return Err(Error::Format("inconsistent packed sequence header".into()));
        }
        Ok(Self {
            len,
            sigma,
            sample_rate,
            masks: FieldMasks::new(symbols.width()),
            symbols,
            directory,
        })
    }
}

/// `value` repeated in `count` consecutive `width`-bit fields.
#[inline]
fn repeat_field(value: u64, width: u32, count: usize) -> u64 {
    let mut out = 0u64;
    for f in 0..count {
        out |= value << (f as u32 * width);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scan_rank(s: &[u32], i: usize, c: u32) -> usize {
        s[..i].iter().filter(|&&x| x == c).count()
    }

    fn scan_select(s: &[u32], k: usize, c: u32) -> Option<usize> {
        s.iter()
            .enumerate()
            .filter(|(_, &x)| x == c)
            .nth(k - 1)
            .map(|(p, _)| p + 1)
    }

    #[test]
    fn small_example() {
        let seq = PackedSequence::new(&[0, 1, 0, 2], 3, 64).unwrap();
        assert_eq!(seq.access(3).unwrap(), 0);
        assert_eq!(seq.rank(4, 0).unwrap(), 2);
        assert_eq!(seq.rank(0, 2).unwrap(), 0);
        assert_eq!(seq.select(2, 0).unwrap(), 3);
        assert_eq!(seq.select(1, 0).unwrap(), 1);
        assert!(matches!(seq.select(2, 2), Err(Error::RankOutOfRange { rank: 2, count: 1 })));
        assert!(matches!(seq.access(0), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(seq.access(5), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(seq.rank(1, 3), Err(Error::SymbolOutOfAlphabet { .. })));
    }

    #[test]
    fn single_symbol() {
        let seq = PackedSequence::new(&[4], 5, 64).unwrap();
        assert_eq!(seq.access(1).unwrap(), 4);
        assert_eq!(seq.select(1, 4).unwrap(), 1);
    }

    #[test]
    fn rejects_out_of_alphabet_symbol() {
        assert!(PackedSequence::new(&[0, 3], 3, 64).is_err());
    }

    proptest! {
        #[test]
        fn matches_linear_scan(
            sigma in 1u32..70,
            raw in prop::collection::vec(any::<u32>(), 0..700),
            sample in prop::sample::select(vec![1usize, 3, 8, 64, 100]),
        ) {
            let s: Vec<u32> = raw.iter().map(|x| x % sigma).collect();
            let seq = PackedSequence::new(&s, sigma, sample).unwrap();
            for i in 1..=s.len() {
                prop_assert_eq!(seq.access(i).unwrap(), s[i - 1]);
            }
            let mut total = 0;
            for c in 0..sigma {
                let mut prev = 0;
                for i in 0..=s.len() {
                    let r = seq.rank(i, c).unwrap();
                    prop_assert_eq!(r, scan_rank(&s, i, c));
                    prop_assert!(r >= prev);
                    prev = r;
                }
                total += prev;
                for k in 1..=prev {
                    let p = seq.select(k, c).unwrap();
                    prop_assert_eq!(Some(p), scan_select(&s, k, c));
                    prop_assert_eq!(seq.rank(p, c).unwrap(), k);
                }
            }
            prop_assert_eq!(total, s.len());
            // Whole words may add at most 63 bits to each of the two arrays.
            prop_assert!(seq.size_in_bits() <= seq.size_bound_bits() + 126);
        }

        #[test]
        fn encode_decode(raw in prop::collection::vec(0u32..9, 0..300)) {
            let seq = PackedSequence::new(&raw, 9, 16).unwrap();
            let mut w = Writer::new();
            seq.encode(&mut w);
            let bytes = w.into_bytes();
            let back = PackedSequence::decode(&mut Reader::new(&bytes)).unwrap();
            prop_assert_eq!(back, seq);
        }
    }
}
