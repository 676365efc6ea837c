//! Frequency-domain hashing: spectral permutations `π`, bucket maps `h`,
//! offsets `o`, and the time-domain pseudorandom permutation `P_{σ,a,b}`.

use alloc::vec::Vec;
use core::cmp::Ordering;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::math::{root_of_unity, Float, PI, TAU};

/// Signed representative of a residue class modulo `n`, in `[-n/2, n/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CenteredResidue(pub i64);

impl CenteredResidue {
    pub fn new(value: i64, n: u64) -> Self {
        let n = n as i64;
        let r = value.rem_euclid(n);
        Self(if r >= n / 2 { r - n } else { r })
    }

    pub fn value(self) -> i64 {
        self.0
    }

    /// Position of this residue in a length-`n` table indexed from zero.
    pub fn index(self, n: u64) -> usize {
        self.0.rem_euclid(n as i64) as usize
    }
}

pub fn is_power_of_two(v: u64) -> bool {
    v != 0 && v & (v - 1) == 0
}

/// Inverse of an odd `sigma` modulo the power of two `n`.
pub fn odd_inverse(sigma: u64, n: u64) -> u64 {
    debug_assert!(sigma % 2 == 1 && is_power_of_two(n));
    // Newton iteration doubles the number of correct low bits each step.
    let mut inv: u64 = 1;
    for _ in 0..7 {
        inv = inv.wrapping_mul(2u64.wrapping_sub(sigma.wrapping_mul(inv)));
    }
    inv & (n - 1)
}

/// One hashing `(σ, a, b)` over `Z_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HashingTriple {
    sigma: u64,
    a: u64,
    b: u64,
    n: u64,
}

impl HashingTriple {
    pub fn new(sigma: u64, a: u64, b: u64, n: u64) -> Result<Self> {
        if !is_power_of_two(n) || n < 2 {
            return Err(invalid("n must be a power of two >= 2"));
        }
        let sigma = sigma % n;
        if sigma.is_multiple_of(2) {
            return Err(invalid("sigma must be odd"));
        }
        Ok(Self {
            sigma,
            a: a % n,
            b: b % n,
            n,
        })
    }

    pub fn sigma(&self) -> u64 {
        self.sigma
    }
    pub fn a(&self) -> u64 {
        self.a
    }
    pub fn b(&self) -> u64 {
        self.b
    }
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Same `(σ, b)` with the modulation replaced.
    pub fn with_modulation(&self, a: u64) -> Self {
        Self {
            a: a % self.n,
            ..*self
        }
    }

    /// `π_{σ,b}(f) = σ(f − b) mod n`.
    #[inline]
    pub fn permute_freq(&self, f: u64) -> u64 {
        let n = self.n;
        let diff = (f % n + n - self.b) % n;
        ((diff as u128 * self.sigma as u128) % n as u128) as u64
    }

    /// `h(f) = round((B/n)·π(f)) mod B`, rounding halves up.
    #[inline]
    pub fn bucket_of(&self, buckets: u64, f: u64) -> u64 {
        bucket_of_permuted(self.n, buckets, self.permute_freq(f))
    }

    /// `o_f(f2) = π(f2) − (n/B)·h(f)` as a centered residue.
    #[inline]
    pub fn offset(&self, buckets: u64, f: u64, f2: u64) -> CenteredResidue {
        let width = self.n / buckets;
        let center = width * self.bucket_of(buckets, f);
        CenteredResidue::new(self.permute_freq(f2) as i64 - center as i64, self.n)
    }

    /// `(P_{σ,a,b} x)_t = x_{σ(t−a)} ω^{tσb}`.
    pub fn permute_time(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() as u64 != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n as usize,
                found: x.len(),
            });
        }
        Ok((0..self.n as i64)
            .map(|t| self.permuted_sample(t, x[self.source_index(t) as usize]))
            .collect())
    }

    /// Time index read by `P_{σ,a,b}` at output position `t`: `σ(t − a) mod n`.
    #[inline]
    pub fn source_index(&self, t: i64) -> u64 {
        let n = self.n as i128;
        ((t as i128 - self.a as i128).rem_euclid(n) * self.sigma as i128).rem_euclid(n) as u64
    }

    /// `x_{σ(t−a)}·ω^{tσb}` given the already-fetched sample.
    #[inline]
    pub fn permuted_sample(&self, t: i64, sample: Complex64) -> Complex64 {
        let phase = t as i128 * self.sigma as i128 * self.b as i128;
        sample * root_of_unity(phase, self.n)
    }
}

#[inline]
pub(crate) fn bucket_of_permuted(n: u64, buckets: u64, permuted: u64) -> u64 {
    let width = n / buckets;
    ((2 * permuted + width) / (2 * width)) % buckets
}

/// A sequence of `d` hashings sharing `n`, with the bucket count and filter
/// sharpness they were forged for.
#[derive(Clone, Debug, PartialEq)]
pub struct HashingSchedule {
    n: u64,
    buckets: u64,
    sharpness: u32,
    triples: Vec<HashingTriple>,
}

impl HashingSchedule {
    pub fn new(n: u64, buckets: u64, sharpness: u32, triples: Vec<HashingTriple>) -> Result<Self> {
        if !is_power_of_two(buckets) || buckets >= n {
            return Err(invalid("B must be a power of two below n"));
        }
        if sharpness < 2 || sharpness % 2 == 1 {
            return Err(invalid("F must be an even integer >= 2"));
        }
        if triples.is_empty() {
            return Err(invalid("a schedule needs at least one hashing"));
        }
        if let Some(t) = triples.iter().find(|t| t.n() != n) {
            return Err(Error::LengthMismatch {
                expected: n as usize,
                found: t.n() as usize,
            });
        }
        Ok(Self {
            n,
            buckets,
            sharpness,
            triples,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }
    pub fn buckets(&self) -> u64 {
        self.buckets
    }
    pub fn sharpness(&self) -> u32 {
        self.sharpness
    }
    pub fn triples(&self) -> &[HashingTriple] {
        &self.triples
    }
    pub fn len(&self) -> usize {
        self.triples.len()
    }
    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

fn lower_median(values: &mut [f64]) -> f64 {
    let mid = (values.len() - 1) / 2;
    *values
        .select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal))
        .1
}

/// Component-wise median; even lengths take the lower middle order statistic.
pub fn median_complex(values: &[Complex64]) -> Result<Complex64> {
    if values.is_empty() {
        return Err(invalid("median of an empty sequence"));
    }
    let mut re: Vec<f64> = values.iter().map(|z| z.re).collect();
    let mut im: Vec<f64> = values.iter().map(|z| z.im).collect();
    Ok(Complex64::new(lower_median(&mut re), lower_median(&mut im)))
}

/// Distance between two angles on the circle, in `[0, π]`.
pub fn circular_distance(x: f64, y: f64) -> f64 {
    let d = crate::math::rem_euclid(x - y, TAU);
    if d > PI {
        TAU - d
    } else {
        Float::abs(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_dft;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn triple(sigma: u64, a: u64, b: u64, n: u64) -> HashingTriple {
        HashingTriple::new(sigma, a, b, n).unwrap()
    }

    #[test]
    fn permute_freq_examples() {
        assert_eq!(triple(3, 0, 2, 16).permute_freq(5), 9);
        assert_eq!(triple(1, 0, 0, 16).permute_freq(7), 7);
        assert_eq!(triple(5, 0, 0, 16).permute_freq(13), 1);
    }

    #[test]
    fn bucket_examples() {
        assert_eq!(triple(3, 0, 2, 16).bucket_of(4, 5), 2);
        assert_eq!(triple(1, 0, 0, 16).bucket_of(4, 0), 0);
        // π(14) = 14 → round(3.5) = 4 ≡ 0
        assert_eq!(triple(1, 0, 0, 16).bucket_of(4, 14), 0);
    }

    #[test]
    fn offset_examples() {
        assert_eq!(triple(3, 0, 2, 16).offset(4, 5, 5).value(), 1);
        assert_eq!(triple(1, 0, 0, 16).offset(4, 0, 0).value(), 0);
        assert_eq!(triple(1, 0, 0, 16).offset(4, 0, 14).value(), -2);
    }

    #[test]
    fn rejects_even_sigma() {
        assert!(HashingTriple::new(2, 0, 0, 16).is_err());
        assert!(HashingTriple::new(1, 0, 0, 12).is_err());
    }

    #[test]
    fn permute_time_identity_and_index_chase() {
        let x: Vec<Complex64> = (0..8)
            .map(|i| Complex64::new(i as f64, -(i as f64)))
            .collect();
        assert_eq!(triple(1, 0, 0, 8).permute_time(&x).unwrap(), x);

        let mut e0 = alloc::vec![Complex64::new(0.0, 0.0); 4];
        e0[0] = Complex64::new(1.0, 0.0);
        let y = triple(3, 1, 0, 4).permute_time(&e0).unwrap();
        let expected = [0.0, 1.0, 0.0, 0.0];
        for (v, e) in y.iter().zip(expected) {
            assert!((v - Complex64::new(e, 0.0)).norm() < 1e-15);
        }
        assert!(triple(1, 0, 0, 4).permute_time(&x).is_err());
    }

    #[test]
    fn permute_time_spectral_identity() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for n in [16u64, 32, 64] {
            for _ in 0..10 {
                let x: Vec<Complex64> = (0..n)
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                let t = triple(
                    2 * rng.gen_range(0..n / 2) + 1,
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                    n,
                );
                let xh = exact_dft(&x);
                let yh = exact_dft(&t.permute_time(&x).unwrap());
                for f in 0..n {
                    let expected = xh[f as usize]
                        * root_of_unity(t.a() as i128 * t.sigma() as i128 * f as i128, n);
                    let got = yh[t.permute_freq(f) as usize];
                    assert!((got - expected).norm() <= 1e-9 * expected.norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn median_examples() {
        let v = [
            Complex64::new(1.0, 1.0),
            Complex64::new(2.0, 3.0),
            Complex64::new(5.0, 2.0),
        ];
        assert_eq!(median_complex(&v).unwrap(), Complex64::new(2.0, 2.0));
        let z = Complex64::new(-3.5, 0.25);
        assert_eq!(median_complex(&[z]).unwrap(), z);
        // Components sort to {0,0,4,4}; the lower middle is 0 on both axes.
        let v = [
            Complex64::new(0.0, 0.0),
            Complex64::new(4.0, 0.0),
            Complex64::new(4.0, 4.0),
            Complex64::new(0.0, 4.0),
        ];
        assert_eq!(median_complex(&v).unwrap(), Complex64::new(0.0, 0.0));
        assert!(median_complex(&[]).is_err());
    }

    #[test]
    fn circular_distance_examples() {
        assert!((circular_distance(0.0, PI / 2.0) - PI / 2.0).abs() < 1e-15);
        assert!((circular_distance(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
        assert_eq!(circular_distance(1.3, 1.3), 0.0);
    }

    #[test]
    fn odd_inverse_inverts() {
        for n in [2u64, 16, 1024, 1 << 20] {
            for sigma in (1..n.min(4097)).step_by(2) {
                assert_eq!(sigma * odd_inverse(sigma, n) % n, 1);
            }
        }
    }

    /// Exhaustive offset distribution over all odd σ and all b, n=16, B=4.
    #[test]
    fn offset_distribution_cases() {
        let (n, buckets) = (16u64, 4u64);
        let width = (n / buckets) as i64;
        let f = 3u64;
        for f2 in 0..n {
            if f2 == f {
                continue;
            }
            let mut counts = alloc::vec![0u32; n as usize];
            for sigma in (1..n).step_by(2) {
                for b in 0..n {
                    let o = triple(sigma, 0, b, n).offset(buckets, f, f2);
                    counts[o.index(n)] += 1;
                }
            }
            let total = (n / 2 * n) as f64;
            let prob = |l: i64| counts[CenteredResidue::new(l, n).index(n)] as f64 / total;
            let delta = (f as i64 - f2 as i64).rem_euclid(n as i64);
            if delta % width != 0 {
                for l in -(n as i64) / 2..(n as i64) / 2 {
                    assert!(
                        (prob(l) - 1.0 / n as f64).abs() < 1e-12,
                        "case (i) f2={f2} l={l}"
                    );
                }
            } else if (delta / width) % 2 == 0 {
                for l in -width..=width {
                    assert_eq!(prob(l), 0.0, "case (ii) f2={f2} l={l}");
                }
            } else {
                for l in -width / 2..width / 2 {
                    assert_eq!(prob(l), 0.0, "case (iii) core f2={f2} l={l}");
                }
                for l in (-width..-width / 2).chain(width / 2..=width) {
                    assert!(
                        (prob(l) - 2.0 / n as f64).abs() < 1e-12,
                        "case (iii) ring f2={f2} l={l}"
                    );
                }
            }
        }
    }

    proptest! {
        #[test]
        fn own_offset_is_in_core(log_n in 3u32..12, log_b in 1u32..6, s in 0u64..1 << 12, b in 0u64..1 << 12, f in 0u64..1 << 12) {
            let n = 1u64 << log_n;
            prop_assume!(log_b < log_n);
            let buckets = 1u64 << log_b;
            let t = triple(2 * (s % (n / 2)) + 1, 0, b, n);
            let o = t.offset(buckets, f % n, f % n).value();
            let half = (n / buckets / 2) as i64;
            prop_assert!(-half <= o && o < half.max(1));
        }

        #[test]
        fn permute_freq_is_bijection(log_n in 1u32..10, s in 0u64..512, b in 0u64..512) {
            let n = 1u64 << log_n;
            let t = triple(2 * (s % (n / 2).max(1)) + 1, 0, b, n);
            let mut seen = alloc::vec![false; n as usize];
            for f in 0..n {
                let p = t.permute_freq(f) as usize;
                prop_assert!(!seen[p]);
                seen[p] = true;
            }
        }
    }
}
