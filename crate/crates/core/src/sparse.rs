//! Sparse spectra keyed by frequency.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::Complex64;

/// A sparse vector in `C^n`, iterated in ascending frequency order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseApproximation {
    n: u64,
    entries: BTreeMap<u64, Complex64>,
}

impl SparseApproximation {
    pub fn new(n: u64) -> Self {
        Self {
            n,
            entries: BTreeMap::new(),
        }
    }

    pub fn from_entries(
        n: u64,
        entries: impl IntoIterator<Item = (u64, Complex64)>,
    ) -> Result<Self> {
        let mut out = Self::new(n);
        for (f, v) in entries {
            if f >= n {
                return Err(crate::error::invalid("frequency out of range"));
            }
            out.entries.insert(f, v);
        }
        Ok(out)
    }

    pub fn n(&self) -> u64 {
        self.n
    }
    pub fn len(&self) -> usize {
        self.entries.len()
    }
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
    pub fn get(&self, f: u64) -> Option<Complex64> {
        self.entries.get(&f).copied()
    }
    pub fn insert(&mut self, f: u64, v: Complex64) {
        self.entries.insert(f % self.n, v);
    }
    pub fn iter(&self) -> impl Iterator<Item = (u64, Complex64)> + '_ {
        self.entries.iter().map(|(&f, &v)| (f, v))
    }

    /// Entry-wise sum; entries that cancel exactly are kept.
    pub fn add(&mut self, other: &SparseApproximation) -> Result<()> {
        if other.n != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n as usize,
                found: other.n as usize,
            });
        }
        for (f, v) in other.iter() {
            *self.entries.entry(f).or_insert(Complex64::new(0.0, 0.0)) += v;
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n as usize];
        for (f, v) in self.iter() {
            out[f as usize] = v;
        }
        out
    }

    pub fn l1(&self) -> f64 {
        self.entries.values().map(|v| v.norm()).sum()
    }
}
