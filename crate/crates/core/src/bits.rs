//! Packed truth tables and short bit strings.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::RngCore;

use crate::{Error, Result};

/// Largest domain exponent a [`TruthTable`] accepts.
pub const MAX_TABLE_ELL: u32 = 24;

/// A Boolean function `{0,1}^ell -> {0,1}` stored as `2^ell` packed bits.
///
/// Bit `i` is the value on the input whose integer encoding is `i`. Inner
/// products between inputs are taken bitwise on those integers.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TruthTable {
    ell: u32,
    words: Vec<u64>,
}

impl TruthTable {
    pub fn zeros(ell: u32) -> Result<Self> {
        if ell > MAX_TABLE_ELL {
            return Err(Error::EllOutOfRange { ell, max: MAX_TABLE_ELL });
        }
        let len = 1usize << ell;
        Ok(Self { ell, words: vec![0; len.div_ceil(64)] })
    }

    pub fn from_fn(ell: u32, mut f: impl FnMut(usize) -> bool) -> Result<Self> {
        let mut t = Self::zeros(ell)?;
        for i in 0..t.len() {
            if f(i) {
                t.set(i, true);
            }
        }
        Ok(t)
    }

    /// Uniformly random table.
    pub fn random<R: RngCore + ?Sized>(ell: u32, rng: &mut R) -> Result<Self> {
        let mut t = Self::zeros(ell)?;
        for w in t.words.iter_mut() {
            *w = rng.next_u64();
        }
        t.clear_tail();
        Ok(t)
    }

    /// Parses a `0`/`1` string whose length is a power of two.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        let len = s.len();
        if !len.is_power_of_two() {
            return Err(Error::InvalidParameter("truth table length must be a power of two"));
        }
        let ell = len.trailing_zeros();
        let mut t = Self::zeros(ell)?;
        for (i, c) in s.bytes().enumerate() {
            match c {
                b'0' => {}
                b'1' => t.set(i, true),
                _ => return Err(Error::InvalidParameter("truth table digits must be 0 or 1")),
            }
        }
        Ok(t)
    }

    /// Rebuilds a table from its packed little-endian words.
    pub fn from_words(ell: u32, words: Vec<u64>) -> Result<Self> {
        let mut t = Self::zeros(ell)?;
        if words.len() != t.words.len() {
            return Err(Error::LengthMismatch { expected: t.words.len(), got: words.len() });
        }
        t.words = words;
        t.clear_tail();
        Ok(t)
    }

    fn clear_tail(&mut self) {
        let len = self.len();
        if !len.is_multiple_of(64) {
            let last = self.words.len() - 1;
            self.words[last] &= (1u64 << (len % 64)) - 1;
        }
    }

    #[inline]
    pub fn ell(&self) -> u32 {
        self.ell
    }

    #[inline]
    pub fn len(&self) -> usize {
        1usize << self.ell
    }

    /// Always false; a table has at least one entry.
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len());
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        debug_assert!(i < self.len());
        let mask = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// The `±1` form `(-1)^f(x)`.
    pub fn signs(&self) -> Vec<i64> {
        self.iter().map(|b| if b { -1 } else { 1 }).collect()
    }
}

impl fmt::Debug for TruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TruthTable(ell={}, ", self.ell)?;
        if self.len() <= 64 {
            for b in self.iter() {
                f.write_str(if b { "1" } else { "0" })?;
            }
        } else {
            write!(f, "{} ones", self.count_ones())?;
        }
        f.write_str(")")
    }
}

/// A short, unpacked bit string. Integer conversions are most-significant
/// bit first, so `from_u64(0b01, 2)` is `[false, true]`.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn from_u64(value: u64, width: usize) -> Self {
        debug_assert!(width <= 64);
        Self((0..width).rev().map(|i| (value >> i) & 1 == 1).collect())
    }

    pub fn random<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut out = Vec::with_capacity(len);
        while out.len() < len {
            let w = rng.next_u64();
            let take = (len - out.len()).min(64);
            out.extend((0..take).map(|i| (w >> i) & 1 == 1));
        }
        Self(out)
    }

    /// Value of the bits as an unsigned integer; `None` past 64 bits.
    pub fn to_u64(&self) -> Option<u64> {
        if self.0.len() > 64 {
            return None;
        }
        Some(self.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64))
    }

    /// Parses a `0`/`1` string.
    pub fn parse_binary(s: &str) -> Option<Self> {
        s.bytes()
            .map(|c| match c {
                b'0' => Some(false),
                b'1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Self)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        self.0[i] = bit;
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn extend_from(&mut self, other: &BitString) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn push_u64(&mut self, value: u64, width: usize) {
        self.0.extend((0..width).rev().map(|i| (value >> i) & 1 == 1));
    }

    pub fn concat(parts: &[&BitString]) -> Self {
        let mut out = Self::new();
        for p in parts {
            out.extend_from(p);
        }
        out
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self(self.0[start..end].to_vec())
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Inner product over GF(2).
    pub fn dot(&self, other: &BitString) -> bool {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).fold(false, |acc, (&a, &b)| acc ^ (a & b))
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("b\"")?;
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        f.write_str("\"")
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl From<Vec<bool>> for BitString {
    fn from(bits: Vec<bool>) -> Self {
        Self(bits)
    }
}
