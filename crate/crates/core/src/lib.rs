//! Deterministic sparse Fourier transform toolkit.
//!
//! The crate builds, once and offline, a fixed hashing schedule and sample set
//! that let every signal of length `n` have its spectrum approximated in the
//! ℓ∞/ℓ1 sense from those samples alone. It also fabricates incoherent
//! matrices out of rows of the DFT matrix, either by derandomized
//! subsampling or from exponential-sum constructions over prime fields.
//!
//! Everything here is `no_std` + `alloc`; file formats and the command line
//! front end live in the companion `detsft` crate.
//!
//! Conventions: the unitary DFT is `x̂_f = n^{-1/2} Σ_t x_t ω^{ft}` with
//! `ω = e^{2πi/n}`, and offsets/filter indices are centered residues in
//! `[-n/2, n/2)`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bucket;
pub mod error;
pub mod explicit;
pub mod fft;
pub mod filter;
pub mod forge;
pub mod hashing;
pub mod number_theory;
pub mod oracle;
pub mod recovery;
pub mod sparse;
pub mod subsample;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use sparse::SparseApproximation;

pub(crate) mod math {
    //! Float helpers routed through `libm` so the crate stays `no_std`.
    pub use num_traits::Float;

    pub const PI: f64 = core::f64::consts::PI;
    pub const TAU: f64 = core::f64::consts::TAU;

    #[inline]
    pub fn unit(angle: f64) -> num_complex::Complex64 {
        num_complex::Complex64::new(Float::cos(angle), Float::sin(angle))
    }

    /// `e^{2πi·k/n}` with `k` reduced modulo `n` first, so the argument to the
    /// trig call stays in `[0, 2π)` regardless of how large `k` was.
    #[inline]
    pub fn root_of_unity(k: i128, n: u64) -> num_complex::Complex64 {
        let r = k.rem_euclid(n as i128) as f64;
        unit(TAU * r / n as f64)
    }

    /// `x mod m` in `[0, m)` for `m > 0`.
    #[inline]
    pub fn rem_euclid(x: f64, m: f64) -> f64 {
        let r = x - m * Float::floor(x / m);
        if r >= m {
            0.0
        } else {
            r
        }
    }

    /// Neumaier-compensated accumulator.
    #[derive(Clone, Copy, Debug, Default)]
    pub struct KahanSum {
        sum: f64,
        comp: f64,
    }

    impl KahanSum {
        pub fn add(&mut self, v: f64) {
            let t = self.sum + v;
            if Float::abs(self.sum) >= Float::abs(v) {
                self.comp += (self.sum - t) + v;
            } else {
                self.comp += (v - t) + self.sum;
            }
            self.sum = t;
        }

        pub fn value(&self) -> f64 {
            self.sum + self.comp
        }
    }

    /// `ln Σ exp(v)` without overflow.
    pub fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
        let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return max;
        }
        let mut acc = KahanSum::default();
        for v in values {
            acc.add(Float::exp(v - max));
        }
        max + Float::ln(acc.value())
    }
}
