//! Fixed-width packed integer vectors.
//!
//! Values are stored back to back at `width` bits each and may straddle word
//! boundaries, so a vector of `len` values occupies exactly
//! `ceil(len * width / 64)` words.

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

/// Number of bits needed to represent every value in `0..=max`.
pub fn bits_for(max: u64) -> u32 {
    64 - max.leading_zeros()
}

/// `ceil(log2(x))` for `x >= 1`, and 0 for `x <= 1`.
pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntVec {
    width: u32,
    len: usize,
    words: Vec<u64>,
}

impl IntVec {
    pub fn new(width: u32) -> Self {
        assert!(width <= 64, "width {width} exceeds 64 bits");
        Self {
            width,
            len: 0,
            words: Vec::new(),
        }
    }

    pub fn with_len(width: u32, len: usize) -> Self {
        let mut v = Self::new(width);
        v.len = len;
        v.words = vec![0; words_for(len, width)];
        v
    }

    /// Packs `values` at the smallest width that fits their maximum.
    pub fn from_slice(values: &[u64]) -> Self {
        let width = bits_for(values.iter().copied().max().unwrap_or(0));
        Self::from_slice_with_width(values, width)
    }

    pub fn from_slice_with_width(values: &[u64], width: u32) -> Self {
        let mut v = Self::with_len(width, values.len());
        for (i, &x) in values.iter().enumerate() {
            v.set(i, x);
        }
        v
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Storage in bits, counting whole words.
    pub fn size_in_bits(&self) -> u64 {
        self.words.len() as u64 * 64
    }

    pub fn push(&mut self, value: u64) {
        let i = self.len;
        self.len += 1;
        let need = words_for(self.len, self.width);
        if self.words.len() < need {
            self.words.resize(need, 0);
        }
        self.set(i, value);
    }

    #[inline]
    pub fn get(&self, i: usize) -> u64 {
        debug_assert!(i < self.len, "index {i} out of bounds {}", self.len);
        if self.width == 0 {
            return 0;
        }
        self.read_bits(i as u64 * self.width as u64, self.width)
    }

    pub fn set(&mut self, i: usize, value: u64) {
        assert!(i < self.len, "index {i} out of bounds {}", self.len);
        let w = self.width;
        if w == 0 {
            assert_eq!(value, 0, "nonzero value in a zero-width vector");
            return;
        }
        assert!(
            w == 64 || value >> w == 0,
            "value {value} does not fit in {w} bits"
        );
        let bit = i as u64 * w as u64;
        let word = (bit / 64) as usize;
        let off = (bit % 64) as u32;
        let mask = low_mask(w);
        self.words[word] = (self.words[word] & !(mask << off)) | (value << off);
        if off + w > 64 {
            let spill = off + w - 64;
            let hi_mask = low_mask(spill);
            self.words[word + 1] = (self.words[word + 1] & !hi_mask) | (value >> (w - spill));
        }
    }

    /// Reads `nbits <= 64` bits starting at absolute bit offset `bit`.
    /// Bits past the end of storage read as zero.
    #[inline]
    pub fn read_bits(&self, bit: u64, nbits: u32) -> u64 {
        if nbits == 0 {
            return 0;
        }
        let word = (bit / 64) as usize;
        let off = (bit % 64) as u32;
        let lo = self.words.get(word).copied().unwrap_or(0) >> off;
        let v = if off + nbits > 64 {
            let hi = self.words.get(word + 1).copied().unwrap_or(0);
            lo | (hi << (64 - off))
        } else {
            lo
        };
        v & low_mask(nbits)
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn encode(&self, w: &mut Writer) {
        w.put_u8(self.width as u8);
        w.put_u64(self.len as u64);
        w.put_u64s(&self.words);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let width = r.get_u8()? as u32;
        if width > 64 {
            return Err(Error::Format(format!("packed width {width} > 64")));
        }
        let len = r.get_u64()? as usize;
        let words = r.get_u64s()?;
        if words.len() != words_for(len, width) {
            return Err(Error::Format(format!(
                "packed vector of {len} x {width} bits has {} words",
                words.len()
            )));
        }
        Ok(Self { width, len, words })
    }
}

#[inline]
pub fn low_mask(nbits: u32) -> u64 {
    if nbits >= 64 {
        u64::MAX
    } else {
        (1u64 << nbits) - 1
    }
}

fn words_for(len: usize, width: u32) -> usize {
    ((len as u64 * width as u64).div_ceil(64)) as usize
}

const RANK_SAMPLE_WORDS: usize = 8;

/// Bitvector with rank support; a cumulative count is kept every 8 words.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RankBits {
    len: usize,
    words: Vec<u64>,
    /// `samples[k]` = set bits in `words[..8 * k]`.
    samples: Vec<u32>,
}

impl RankBits {
    /// Bits `0..len` with the given positions set.
    pub fn from_positions(len: usize, positions: impl IntoIterator<Item = usize>) -> Self {
        let mut words = vec![0u64; len.div_ceil(64)];
        for p in positions {
            assert!(p < len, "bit {p} outside 0..{len}");
            words[p / 64] |= 1 << (p % 64);
        }
        Self::from_words(len, words)
    }

    fn from_words(len: usize, words: Vec<u64>) -> Self {
        let mut samples = Vec::with_capacity(words.len() / RANK_SAMPLE_WORDS + 1);
        let mut acc = 0u32;
        for (i, w) in words.iter().enumerate() {
            if i % RANK_SAMPLE_WORDS == 0 {
                samples.push(acc);
            }
            acc += w.count_ones();
        }
        samples.push(acc);
        Self { len, words, samples }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn count_ones(&self) -> usize {
        *self.samples.last().unwrap_or(&0) as usize
    }

    /// Bit `i`, 0-based.
    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    /// Set bits among the first `i` bits, `i <= len`.
    #[inline]
    pub fn rank1(&self, i: usize) -> usize {
        let w = i / 64;
        let k = w / RANK_SAMPLE_WORDS;
        let mut r = self.samples[k] as usize;
        for word in &self.words[k * RANK_SAMPLE_WORDS..w] {
            r += word.count_ones() as usize;
        }
        if i % 64 != 0 {
            r += (self.words[w] & low_mask(i as u32 % 64)).count_ones() as usize;
        }
        r
    }

    /// Positions of the set bits, increasing.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                (w != 0).then(|| {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    i * 64 + b
                })
            })
        })
    }

    pub fn size_in_bits(&self) -> u64 {
        64 * self.words.len() as u64 + 32 * self.samples.len() as u64
    }

    pub fn encode(&self, w: &mut Writer) {
        w.put_u64(self.len as u64);
        w.put_u64s(&self.words);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let len = r.get_u64()? as usize;
        let words = r.get_u64s()?;
        let tail_ok = len % 64 == 0 || words.last().is_some_and(|w| w >> (len % 64) == 0);
        if words.len() != len.div_ceil(64) || !tail_ok {
            return Err(Error::Format(format!(
                "bitvector of {len} bits has {} words or stray tail bits",
                words.len()
            )));
        }
        Ok(Self::from_words(len, words))
    }
}
