//! Plain and atomic fixed-length bit arrays.
//!
//! Used for predicate masks, visited sets, clique liveness, and the shared
//! coverage mask of the parallel index build.

use std::sync::atomic::{AtomicU64, Ordering};

const WORD_BITS: usize = 64;

#[inline]
fn word_count(len: usize) -> usize {
    len.div_ceil(WORD_BITS)
}

/// Fixed-length bit array.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Bitmap {
    words: Vec<u64>,
    len: usize,
}

impl Bitmap {
    pub fn new(len: usize) -> Self {
        Bitmap { words: vec![0; word_count(len)], len }
    }

    /// Rebuild from raw little-endian words, e.g. after deserialization.
    /// Bits at positions >= `len` must be zero (checked).
    pub fn from_words(words: Vec<u64>, len: usize) -> Option<Self> {
        if words.len() != word_count(len) {
            return None;
        }
        if !len.is_multiple_of(WORD_BITS) {
            if let Some(&last) = words.last() {
                if last >> (len % WORD_BITS) != 0 {
                    return None;
                }
            }
        }
        Some(Bitmap { words, len })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / WORD_BITS] >> (i % WORD_BITS) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / WORD_BITS] |= 1 << (i % WORD_BITS);
    }

    #[inline]
    pub fn clear(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / WORD_BITS] &= !(1 << (i % WORD_BITS));
    }

    /// Append one bit, growing the array.
    pub fn push(&mut self, value: bool) {
        let i = self.len;
        self.len += 1;
        if self.words.len() < word_count(self.len) {
            self.words.push(0);
        }
        if value {
            self.set(i);
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Indices of set bits, ascending.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let base = wi * WORD_BITS;
            std::iter::successors(if w == 0 { None } else { Some(w) }, |&w| {
                let w = w & (w - 1);
                if w == 0 {
                    None
                } else {
                    Some(w)
                }
            })
            .map(move |w| base + w.trailing_zeros() as usize)
        })
    }

    /// Indices of unset bits, ascending.
    pub fn iter_zeros(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| !self.get(i))
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// `self & !other`, both of equal length.
    pub fn and_not(&self, other: &Bitmap) -> Bitmap {
        debug_assert_eq!(self.len, other.len);
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a & !b).collect();
        Bitmap { words, len: self.len }
    }

    pub fn any(&self) -> bool {
        self.words.iter().any(|&w| w != 0)
    }
}

/// Bit array with lock-free concurrent set, shared across build workers.
#[derive(Debug)]
pub struct AtomicBitmap {
    words: Vec<AtomicU64>,
    len: usize,
}

impl AtomicBitmap {
    pub fn new(len: usize) -> Self {
        let words = (0..word_count(len)).map(|_| AtomicU64::new(0)).collect();
        AtomicBitmap { words, len }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / WORD_BITS].load(Ordering::Acquire) >> (i % WORD_BITS) & 1 == 1
    }

    /// Atomically set bit `i`; returns whether it was already set.
    #[inline]
    pub fn set(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % WORD_BITS);
        self.words[i / WORD_BITS].fetch_or(mask, Ordering::AcqRel) & mask != 0
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.load(Ordering::Acquire).count_ones() as usize).sum()
    }

    pub fn to_bitmap(&self) -> Bitmap {
        let words = self.words.iter().map(|w| w.load(Ordering::Acquire)).collect();
        Bitmap { words, len: self.len }
    }
}
