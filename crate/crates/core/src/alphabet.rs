//! Symbols of the ring `Z_{2^k}` and gradient vectors over it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

/// A closed, 1-based index interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexRange {
    pub lo: usize,
    pub hi: usize,
}

impl IndexRange {
    pub fn new(lo: usize, hi: usize) -> Result<Self> {
        if lo == 0 || lo > hi {
            return Err(Error::Range(format!("[{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize) -> bool {
        self.lo <= i && i <= self.hi
    }

    pub fn contains_range(&self, other: &IndexRange) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn iter(&self) -> std::ops::RangeInclusive<usize> {
        self.lo..=self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Symbol(u32);

impl Symbol {
    pub fn value(self) -> u32 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GradientVec(Vec<Symbol>);

impl GradientVec {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    /// Coordinate `zeta` in `[1, d]`.
    pub fn coord(&self, zeta: usize) -> Result<Symbol> {
        if zeta == 0 || zeta > self.0.len() {
            return Err(Error::Range(format!(
                "coordinate {zeta} of {}",
                self.0.len()
            )));
        }
        Ok(self.0[zeta - 1])
    }

    /// Smallest 1-based coordinate where `self` and `other` differ.
    pub fn first_difference(&self, other: &GradientVec) -> Option<usize> {
        self.0
            .iter()
            .zip(&other.0)
            .position(|(a, b)| a != b)
            .map(|i| i + 1)
    }

    pub fn values(&self) -> Vec<u32> {
        self.0.iter().map(|s| s.0).collect()
    }
}

/// The alphabet `A = Z_{2^k}` with `1 <= k <= 32`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    size_log2: u32,
}

impl Alphabet {
    pub const MAX_LOG2: u32 = 32;

    pub fn new(size_log2: u32) -> Result<Self> {
        if size_log2 == 0 || size_log2 > Self::MAX_LOG2 {
            return config(format!("alphabet_log2 must be in [1, 32], got {size_log2}"));
        }
        Ok(Self { size_log2 })
    }

    pub fn size_log2(&self) -> u32 {
        self.size_log2
    }

    pub fn size(&self) -> u64 {
        1u64 << self.size_log2
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.size_log2
    }

    fn mask(&self) -> u64 {
        self.size() - 1
    }

    pub fn symbol(&self, value: u64) -> Result<Symbol> {
        if value >= self.size() {
            return Err(Error::Alphabet {
                value,
                k: self.size_log2,
            });
        }
        Ok(Symbol(value as u32))
    }

    /// Reduces an arbitrary integer modulo `2^k`.
    pub fn reduce(&self, value: u64) -> Symbol {
        Symbol((value & self.mask()) as u32)
    }

    pub fn reduce_signed(&self, value: i64) -> Symbol {
        self.reduce(value as u64)
    }

    pub fn vector(&self, values: &[u64]) -> Result<GradientVec> {
        values
            .iter()
            .map(|&v| self.symbol(v))
            .collect::<Result<Vec<_>>>()
            .map(GradientVec)
    }

    pub fn zero(&self, d: usize) -> GradientVec {
        GradientVec(vec![Symbol(0); d])
    }

    pub fn add_sym(&self, a: Symbol, b: Symbol) -> Symbol {
        self.reduce(a.0 as u64 + b.0 as u64)
    }

    pub fn sub_sym(&self, a: Symbol, b: Symbol) -> Symbol {
        self.reduce((a.0 as u64).wrapping_sub(b.0 as u64))
    }

    pub fn add(&self, a: &GradientVec, b: &GradientVec) -> Result<GradientVec> {
        let mut out = a.clone();
        self.add_assign(&mut out, b)?;
        Ok(out)
    }

    pub fn add_assign(&self, acc: &mut GradientVec, b: &GradientVec) -> Result<()> {
        check_dim(acc.dim(), b.dim())?;
        for (x, y) in acc.0.iter_mut().zip(&b.0) {
            *x = self.add_sym(*x, *y);
        }
        Ok(())
    }

    pub fn sub(&self, a: &GradientVec, b: &GradientVec) -> Result<GradientVec> {
        check_dim(a.dim(), b.dim())?;
        Ok(GradientVec(
            a.0.iter()
                .zip(&b.0)
                .map(|(x, y)| self.sub_sym(*x, *y))
                .collect(),
        ))
    }

    /// Sums `values[lo-1..hi]`; `values` is indexed from sample 1.
    pub fn sum_range(&self, values: &[GradientVec], range: IndexRange) -> Result<GradientVec> {
        if range.hi > values.len() {
            return Err(Error::Range(format!(
                "[{}, {}] of {}",
                range.lo,
                range.hi,
                values.len()
            )));
        }
        let mut acc = self.zero(values[range.lo - 1].dim());
        for v in &values[range.lo - 1..range.hi] {
            self.add_assign(&mut acc, v)?;
        }
        Ok(acc)
    }

    pub fn random_symbol<R: Rng + ?Sized>(&self, rng: &mut R) -> Symbol {
        self.reduce(rng.gen::<u64>())
    }

    pub fn random_vec<R: Rng + ?Sized>(&self, d: usize, rng: &mut R) -> GradientVec {
        GradientVec((0..d).map(|_| self.random_symbol(rng)).collect())
    }

    /// Uniform nonzero vector of dimension `d`.
    pub fn random_nonzero_vec<R: Rng + ?Sized>(&self, d: usize, rng: &mut R) -> GradientVec {
        loop {
            let v = self.random_vec(d, rng);
            if v.0.iter().any(|s| s.0 != 0) {
                return v;
            }
        }
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}
