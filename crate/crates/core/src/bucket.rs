//! Bucket measurements: the exact spectral formula, the sample-based
//! procedure that realizes it, and sample-set accounting.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fft::{fft_in_place, Sign};
use crate::filter::FlatFilter;
use crate::hashing::{bucket_of_permuted, CenteredResidue, HashingSchedule, HashingTriple};
use crate::math::{root_of_unity, Float};
use crate::sparse::SparseApproximation;
use crate::Complex64;

/// Default exponent `c` in the residual error bound `‖ẑ‖₂·n^{−c}`.
pub const DEFAULT_DELTA_EXPONENT: f64 = 6.0;

/// Random access to time samples of a length-`n` signal.
pub trait SampleSource {
    fn n(&self) -> u64;
    fn sample(&self, index: u64) -> Result<Complex64>;
}

impl SampleSource for [Complex64] {
    fn n(&self) -> u64 {
        self.len() as u64
    }
    fn sample(&self, index: u64) -> Result<Complex64> {
        self.get(index as usize)
            .copied()
            .ok_or(Error::MissingSample(index))
    }
}

impl SampleSource for Vec<Complex64> {
    fn n(&self) -> u64 {
        self.len() as u64
    }
    fn sample(&self, index: u64) -> Result<Complex64> {
        self.as_slice().sample(index)
    }
}

/// Samples restricted to a fixed index set; reads outside it fail.
#[derive(Clone, Debug, PartialEq)]
pub struct RestrictedSamples {
    n: u64,
    values: BTreeMap<u64, Complex64>,
}

impl RestrictedSamples {
    pub fn new(n: u64, values: BTreeMap<u64, Complex64>) -> Self {
        Self { n, values }
    }

    /// Copy exactly the indices of `set` out of a full signal.
    pub fn from_signal(signal: &[Complex64], set: &SampleSet) -> Result<Self> {
        let values = set
            .indices()
            .iter()
            .map(|&i| Ok((i, signal.sample(i)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(Self {
            n: signal.len() as u64,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl SampleSource for RestrictedSamples {
    fn n(&self) -> u64 {
        self.n
    }
    fn sample(&self, index: u64) -> Result<Complex64> {
        self.values
            .get(&index)
            .copied()
            .ok_or(Error::MissingSample(index))
    }
}

/// One measurement `u ∈ C^B` under a triple.
#[derive(Clone, Debug, PartialEq)]
pub struct BucketVector {
    pub values: Vec<Complex64>,
    pub triple: HashingTriple,
    /// Bound on the error left by window truncation of the residual subtraction.
    pub delta_bound: f64,
}

impl BucketVector {
    pub fn buckets(&self) -> u64 {
        self.values.len() as u64
    }
}

fn check_pair(triple: &HashingTriple, filter: &FlatFilter) -> Result<()> {
    if triple.n() != filter.n() {
        return Err(Error::LengthMismatch {
            expected: filter.n() as usize,
            found: triple.n() as usize,
        });
    }
    Ok(())
}

/// `(m)_s = Σ_f Ĝ_{π(f) − (n/B)s} ω^{aσf} x̂_f` evaluated directly from the spectrum.
pub fn measure_exact(
    x_hat: &[Complex64],
    triple: &HashingTriple,
    filter: &FlatFilter,
) -> Result<BucketVector> {
    check_pair(triple, filter)?;
    let n = triple.n();
    if x_hat.len() as u64 != n {
        return Err(Error::LengthMismatch {
            expected: n as usize,
            found: x_hat.len(),
        });
    }
    let buckets = filter.buckets();
    let width = (n / buckets) as i64;
    let mut values = vec![Complex64::new(0.0, 0.0); buckets as usize];
    for (f, &v) in x_hat.iter().enumerate() {
        if v == Complex64::new(0.0, 0.0) {
            continue;
        }
        let p = triple.permute_freq(f as u64) as i64;
        let phased = v * modulation(triple, f as u64);
        for (s, out) in values.iter_mut().enumerate() {
            *out += phased * filter.value_at(p - width * s as i64);
        }
    }
    Ok(BucketVector {
        values,
        triple: *triple,
        delta_bound: 0.0,
    })
}

/// `ω^{aσf}`.
#[inline]
fn modulation(triple: &HashingTriple, f: u64) -> Complex64 {
    let n = triple.n() as i128;
    root_of_unity(
        (triple.a() as i128 * triple.sigma() as i128 % n) * f as i128,
        triple.n(),
    )
}

/// Measurement of the raw signal (`ẑ = 0`) from its samples: fold
/// `√n·G_t·(P x)_t` modulo `B` in ascending `t`, then a `B`-point transform.
pub fn bucketize<S: SampleSource + ?Sized>(
    x: &S,
    triple: &HashingTriple,
    filter: &FlatFilter,
) -> Result<BucketVector> {
    check_pair(triple, filter)?;
    if x.n() != triple.n() {
        return Err(Error::LengthMismatch {
            expected: triple.n() as usize,
            found: x.n() as usize,
        });
    }
    let buckets = filter.buckets() as usize;
    let scale = Float::sqrt(triple.n() as f64);
    let mut cells = vec![Complex64::new(0.0, 0.0); buckets];
    for (t, g) in filter.window() {
        let sample = x.sample(triple.source_index(t))?;
        cells[t.rem_euclid(buckets as i64) as usize] +=
            triple.permuted_sample(t, sample) * (g * scale);
    }
    fft_in_place(&mut cells, Sign::Positive);
    Ok(BucketVector {
        values: cells,
        triple: *triple,
        delta_bound: 0.0,
    })
}

/// Radius past which the decay envelope `ε(n/(B|m|))^{F−1}` drops below `n^{−c}`.
fn truncation_radius(filter: &FlatFilter, exponent: f64) -> f64 {
    let n = filter.n() as f64;
    let width = n / filter.buckets() as f64;
    let power = (filter.sharpness() - 1) as f64;
    width * Float::powf(filter.epsilon() * Float::powf(n, exponent), 1.0 / power)
}

/// Subtract `ẑ`'s contribution from every bucket. Buckets farther than the
/// truncation radius from a frequency skip it; the skipped mass is bounded by
/// the decay envelope and recorded in `delta_bound`.
pub fn subtract_sparse(
    bucket: &mut BucketVector,
    z_hat: &SparseApproximation,
    filter: &FlatFilter,
    delta_exponent: f64,
) -> Result<()> {
    let triple = bucket.triple;
    check_pair(&triple, filter)?;
    if z_hat.n() != triple.n() {
        return Err(Error::LengthMismatch {
            expected: triple.n() as usize,
            found: z_hat.n() as usize,
        });
    }
    let n = triple.n();
    let buckets = bucket.buckets();
    let width = (n / buckets) as i64;
    let radius = truncation_radius(filter, delta_exponent);
    let exact = radius >= n as f64 / 2.0;
    let mut skipped = 0.0f64;
    for (f, v) in z_hat.iter() {
        let p = triple.permute_freq(f) as i64;
        let phased = v * modulation(&triple, f);
        for (s, out) in bucket.values.iter_mut().enumerate() {
            let off = CenteredResidue::new(p - width * s as i64, n).value();
            if exact || (off.abs() as f64) <= radius {
                *out -= phased * filter.value_at(off);
            } else {
                skipped = skipped.max(v.norm());
            }
        }
    }
    if !exact && skipped > 0.0 {
        let power = (filter.sharpness() - 1) as i32;
        let envelope = filter.epsilon() * Float::powi(width as f64 / radius, power);
        bucket.delta_bound += envelope * z_hat.l1();
    }
    Ok(())
}

/// `u = Δ + Σ_{f′} Ĝ_{o_f(f′)} (x̂ − ẑ)_{f′} ω^{aσf′}` from samples of `x`.
pub fn hash_to_bins<S: SampleSource + ?Sized>(
    x: &S,
    z_hat: &SparseApproximation,
    triple: &HashingTriple,
    filter: &FlatFilter,
) -> Result<BucketVector> {
    let mut bucket = bucketize(x, triple, filter)?;
    subtract_sparse(&mut bucket, z_hat, filter, DEFAULT_DELTA_EXPONENT)?;
    Ok(bucket)
}

/// `Ĝ^{−1}_{o_f(f)}·u_{h(f)}·ω^{−aσf}`.
pub fn estimate_from_bucket(bucket: &BucketVector, filter: &FlatFilter, f: u64) -> Complex64 {
    let triple = &bucket.triple;
    let buckets = bucket.buckets();
    let p = triple.permute_freq(f);
    let h = bucket_of_permuted(triple.n(), buckets, p);
    let own = filter.value_at(p as i64 - (triple.n() / buckets * h) as i64);
    bucket.values[h as usize] * modulation(triple, f).conj() / own
}

/// The time positions a pipeline reads, with `(repetition, modulation)`
/// provenance per position.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleSet {
    indices: Vec<u64>,
    provenance: BTreeMap<u64, Vec<(usize, u64)>>,
}

impl SampleSet {
    /// Sorted, deduplicated positions.
    pub fn indices(&self) -> &[u64] {
        &self.indices
    }
    pub fn len(&self) -> usize {
        self.indices.len()
    }
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
    pub fn contains(&self, index: u64) -> bool {
        self.indices.binary_search(&index).is_ok()
    }
    pub fn provenance(&self, index: u64) -> &[(usize, u64)] {
        self.provenance
            .get(&index)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
    /// Total reads before deduplication.
    pub fn uses(&self) -> usize {
        self.provenance.values().map(Vec::len).sum()
    }
}

/// Union over repetitions `r` and modulations `a` of `{σ_r(t − a) : t ∈ supp G}`.
pub fn sample_positions(
    schedule: &HashingSchedule,
    filter: &FlatFilter,
    modulations: &[u64],
) -> SampleSet {
    let mut provenance: BTreeMap<u64, Vec<(usize, u64)>> = BTreeMap::new();
    for (r, triple) in schedule.triples().iter().enumerate() {
        for &a in modulations {
            let t = triple.with_modulation(a);
            for (pos, _) in filter.window() {
                provenance
                    .entry(t.source_index(pos))
                    .or_default()
                    .push((r, a % schedule.n()));
            }
        }
    }
    let indices = provenance.keys().copied().collect();
    SampleSet {
        indices,
        provenance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::build_filter;
    use crate::oracle::{exact_dft, exact_idft};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    fn random_triple(rng: &mut ChaCha8Rng, n: u64) -> HashingTriple {
        HashingTriple::new(
            2 * rng.gen_range(0..n / 2) + 1,
            rng.gen_range(0..n),
            rng.gen_range(0..n),
            n,
        )
        .unwrap()
    }

    #[test]
    fn single_tone_exact() {
        let filter = build_filter(16, 4, 2).unwrap();
        let triple = HashingTriple::new(3, 1, 2, 16).unwrap();
        let mut x_hat = vec![Complex64::new(0.0, 0.0); 16];
        x_hat[5] = Complex64::new(1.0, 0.0);
        let m = measure_exact(&x_hat, &triple, &filter).unwrap();
        let phase = root_of_unity(3 * 5, 16);
        for s in 0..4 {
            let want = phase * filter.value_at(9 - 4 * s as i64);
            assert!((m.values[s] - want).norm() < 1e-15);
        }
        let zero = measure_exact(&[Complex64::new(0.0, 0.0); 16], &triple, &filter).unwrap();
        assert!(zero.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn sample_path_matches_exact_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (n, b) in [(16u64, 2u64), (16, 4), (64, 4), (64, 8)] {
            let filter = build_filter(n, b, 2).unwrap();
            for _ in 0..100 {
                let x = random_signal(&mut rng, n as usize);
                let x_hat = exact_dft(&x);
                let triple = random_triple(&mut rng, n);
                let fast =
                    hash_to_bins(&x, &SparseApproximation::new(n), &triple, &filter).unwrap();
                let slow = measure_exact(&x_hat, &triple, &filter).unwrap();
                for (u, v) in fast.values.iter().zip(&slow.values) {
                    assert!((u - v).norm() <= fast.delta_bound + 1e-10, "{u} vs {v}");
                }
            }
        }
    }

    #[test]
    fn full_cancellation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 64u64;
        let filter = build_filter(n, 8, 2).unwrap();
        let x = random_signal(&mut rng, n as usize);
        let z = SparseApproximation::from_entries(
            n,
            exact_dft(&x)
                .into_iter()
                .enumerate()
                .map(|(f, v)| (f as u64, v)),
        )
        .unwrap();
        let triple = random_triple(&mut rng, n);
        let u = hash_to_bins(&x, &z, &triple, &filter).unwrap();
        assert!(u.values.iter().all(|v| v.norm() <= u.delta_bound + 1e-10));
    }

    #[test]
    fn isolated_tone_lands_in_its_bucket() {
        let n = 64u64;
        let filter = build_filter(n, 8, 2).unwrap();
        let triple = HashingTriple::new(5, 0, 3, n).unwrap();
        for f0 in 0..n {
            let mut x_hat = vec![Complex64::new(0.0, 0.0); n as usize];
            x_hat[f0 as usize] = Complex64::new(1.0, 0.0);
            let x = exact_idft(&x_hat);
            let u = hash_to_bins(&x, &SparseApproximation::new(n), &triple, &filter).unwrap();
            let h = triple.bucket_of(8, f0) as i64;
            assert!(u.values[h as usize].norm() >= 1.0 - filter.epsilon() - 1e-12);
            for s in 0..8i64 {
                let dist = (s - h).rem_euclid(8).min((h - s).rem_euclid(8));
                if dist >= 2 {
                    assert!(u.values[s as usize].norm() <= filter.epsilon());
                }
            }
        }
    }

    #[test]
    fn linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 64u64;
        let filter = build_filter(n, 4, 2).unwrap();
        let x = random_signal(&mut rng, n as usize);
        let y = random_signal(&mut rng, n as usize);
        let sum: Vec<Complex64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let triple = random_triple(&mut rng, n);
        let empty = SparseApproximation::new(n);
        let ux = hash_to_bins(&x, &empty, &triple, &filter).unwrap();
        let uy = hash_to_bins(&y, &empty, &triple, &filter).unwrap();
        let us = hash_to_bins(&sum, &empty, &triple, &filter).unwrap();
        for s in 0..4 {
            assert!((us.values[s] - ux.values[s] - uy.values[s]).norm() < 1e-10);
        }
    }

    #[test]
    fn one_sparse_estimate() {
        let n = 64u64;
        let filter = build_filter(n, 8, 2).unwrap();
        let c = Complex64::new(0.6, -1.3);
        for sigma in [1u64, 7, 33] {
            let triple = HashingTriple::new(sigma, 5, 11, n).unwrap();
            for f in 0..n {
                let mut x_hat = vec![Complex64::new(0.0, 0.0); n as usize];
                x_hat[f as usize] = c;
                let m = measure_exact(&x_hat, &triple, &filter).unwrap();
                let est = estimate_from_bucket(&m, &filter, f);
                assert!((est - c).norm() <= 2.0 * filter.epsilon() * c.norm());
            }
        }
        let zero = BucketVector {
            values: vec![Complex64::new(0.0, 0.0); 8],
            triple: HashingTriple::new(1, 0, 0, n).unwrap(),
            delta_bound: 0.0,
        };
        assert_eq!(
            estimate_from_bucket(&zero, &filter, 3),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn restricted_reads_fail_outside_the_set() {
        let n = 64u64;
        let filter = build_filter(n, 4, 2).unwrap();
        let triple = HashingTriple::new(3, 0, 1, n).unwrap();
        let schedule = HashingSchedule::new(n, 4, 2, vec![triple]).unwrap();
        let set = sample_positions(&schedule, &filter, &[0]);
        assert_eq!(set.len(), filter.support_len());
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let restricted = RestrictedSamples::from_signal(&x, &set).unwrap();
        let a = bucketize(&restricted, &triple, &filter).unwrap();
        let b = bucketize(&x, &triple, &filter).unwrap();
        assert_eq!(a, b);
        let moved = triple.with_modulation(1);
        assert!(matches!(
            bucketize(&restricted, &moved, &filter),
            Err(Error::MissingSample(_))
        ));
    }

    #[test]
    fn sample_set_is_reproducible() {
        let n = 256u64;
        let filter = build_filter(n, 16, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let triples = (0..5)
            .map(|_| random_triple(&mut rng, n).with_modulation(0))
            .collect();
        let schedule = HashingSchedule::new(n, 16, 2, triples).unwrap();
        let a = sample_positions(&schedule, &filter, &[0, 1, 2]);
        let b = sample_positions(&schedule, &filter, &[0, 1, 2]);
        assert_eq!(a, b);
        assert_eq!(a.uses(), 5 * 3 * filter.support_len());
        assert!(a.indices().windows(2).all(|w| w[0] < w[1]));
    }
}
