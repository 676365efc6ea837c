use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::{outer_loop, threshold_estimates, CertifiedPlan, Measurements, RecoveryParams};
use crate::bucket::{estimate_from_bucket, SampleSource};
use crate::error::{invalid, Error, Result};
use crate::hashing::{median_complex, odd_inverse};
use crate::math::{rem_euclid, Float, PI, TAU};
use crate::sparse::SparseApproximation;
use crate::Complex64;

/// Modulations `{0, 1, 2, 4, …, n/2}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModulationSet {
    values: Vec<u64>,
}

impl ModulationSet {
    pub fn new(n: u64) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(invalid("n must be a power of two >= 2"));
        }
        let mut values = alloc::vec![0];
        let mut q = 1;
        while q < n {
            values.push(q);
            q *= 2;
        }
        Ok(Self { values })
    }
    pub fn values(&self) -> &[u64] {
        &self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// An arc of the circle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sector {
    pub center: f64,
    pub half_width: f64,
}

impl Sector {
    pub fn contains(&self, angle: f64) -> bool {
        crate::hashing::circular_distance(self.center, angle) <= self.half_width
    }
}

/// `x` wrapped into `(−π, π]`.
fn wrap(x: f64) -> f64 {
    let r = rem_euclid(x, TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Sector halving over the phases `arg(x_q / x_0)`: returns every sector
/// `S_0, S_1, …` and the grid frequency nearest the last center.
pub fn locate_trace(samples: &[Complex64], n: u64) -> Result<(Vec<Sector>, u64)> {
    let q_set = ModulationSet::new(n)?;
    if samples.len() != q_set.len() {
        return Err(Error::LengthMismatch {
            expected: q_set.len(),
            found: samples.len(),
        });
    }
    let x0 = samples[0];
    if x0.norm() == 0.0
        || samples
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
    {
        return Err(Error::NoDominantFrequency);
    }
    let mut sectors = Vec::with_capacity(q_set.len() - 1);
    for (&q, &xq) in q_set.values()[1..].iter().zip(&samples[1..]) {
        if xq.norm() == 0.0 {
            return Err(Error::NoDominantFrequency);
        }
        let phi = (xq / x0).arg();
        let qf = q as f64;
        let width = PI / (4.0 * qf);
        let Some(prev) = sectors.last().copied() else {
            sectors.push(Sector {
                center: phi,
                half_width: width,
            });
            continue;
        };
        // Among the q arcs centered at (φ + 2πm)/q, take the one nearest the
        // current sector and intersect.
        let m = Float::round((prev.center * qf - phi) / TAU);
        let arc = (phi + TAU * m) / qf;
        let arc = prev.center + wrap(arc - prev.center);
        let lo = (prev.center - prev.half_width).max(arc - width);
        let hi = (prev.center + prev.half_width).min(arc + width);
        if lo > hi {
            return Err(Error::NoDominantFrequency);
        }
        sectors.push(Sector {
            center: (lo + hi) / 2.0,
            half_width: (hi - lo) / 2.0,
        });
    }
    let last = sectors.last().ok_or(Error::NoDominantFrequency)?;
    let f = (Float::round(rem_euclid(last.center, TAU) * n as f64 / TAU) as u64) % n;
    Ok((sectors, f))
}

/// Frequency of a dominant tone from its values `x_q = Σ_f c_f ω^{qf}` at the
/// modulations of [`ModulationSet`], in that order.
pub fn one_sparse_locate(samples: &[Complex64], n: u64) -> Result<u64> {
    locate_trace(samples, n).map(|(_, f)| f)
}

/// How a located frequency's value is estimated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EstimateMode {
    /// Median over the repetitions that located `f`.
    #[default]
    LocatedSubset,
    /// Median over every repetition, as in the linear pipeline.
    AllRepetitions,
}

/// Fraction of repetitions that must locate a frequency before it is estimated.
pub const DEFAULT_QUORUM: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SublinearConfig {
    pub mode: EstimateMode,
    /// Candidates located in fewer than `quorum·d` repetitions are dropped;
    /// 0 keeps every candidate.
    pub quorum: f64,
}

impl Default for SublinearConfig {
    fn default() -> Self {
        Self {
            mode: EstimateMode::LocatedSubset,
            quorum: DEFAULT_QUORUM,
        }
    }
}

impl SublinearConfig {
    pub fn with_mode(mode: EstimateMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }
}

/// Candidate frequencies with the repetitions that located them.
fn candidates(meas: &Measurements, plan: &CertifiedPlan) -> BTreeMap<u64, Vec<usize>> {
    let n = plan.n();
    let buckets = plan.filter().buckets();
    let mut found: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    let mut samples = Vec::new();
    for (r, row) in meas.rows.iter().enumerate() {
        let triple = row[0].triple;
        let inverse = odd_inverse(triple.sigma(), n);
        for s in 0..buckets as usize {
            samples.clear();
            samples.extend(row.iter().map(|u| u.values[s]));
            let Ok(v) = one_sparse_locate(&samples, n) else {
                continue;
            };
            let f = ((v as u128 * inverse as u128) % n as u128) as u64;
            if triple.bucket_of(buckets, f) == s as u64 {
                found.entry(f).or_default().push(r);
            }
        }
    }
    found
}

fn estimate_candidates(
    meas: &Measurements,
    plan: &CertifiedPlan,
    found: &BTreeMap<u64, Vec<usize>>,
    config: &SublinearConfig,
) -> Result<Vec<(u64, Complex64)>> {
    let mut reads = Vec::new();
    let need = config.quorum * meas.rows.len() as f64;
    found
        .iter()
        .filter(|(_, reps)| reps.len() as f64 >= need)
        .map(|(&f, reps)| {
            reads.clear();
            match config.mode {
                EstimateMode::LocatedSubset => reads.extend(
                    reps.iter()
                        .map(|&r| estimate_from_bucket(&meas.rows[r][0], plan.filter(), f)),
                ),
                EstimateMode::AllRepetitions => reads.extend(
                    meas.rows
                        .iter()
                        .map(|row| estimate_from_bucket(&row[0], plan.filter(), f)),
                ),
            }
            Ok((f, median_complex(&reads)?))
        })
        .collect()
}

/// Repetitions locating each candidate on `x̂ − ẑ`.
pub fn locate_candidates<S: SampleSource + ?Sized>(
    x: &S,
    z_hat: &SparseApproximation,
    plan: &CertifiedPlan,
) -> Result<BTreeMap<u64, Vec<usize>>> {
    let q_set = ModulationSet::new(plan.n())?;
    let mut meas = Measurements::read(x, plan, q_set.values())?;
    meas.subtract(z_hat, plan.filter())?;
    Ok(candidates(&meas, plan))
}

/// One locate-estimate-threshold pass on `x̂ − ẑ`.
pub fn sub_recovery_sublinear<S: SampleSource + ?Sized>(
    x: &S,
    z_hat: &SparseApproximation,
    nu: f64,
    plan: &CertifiedPlan,
    config: &SublinearConfig,
) -> Result<SparseApproximation> {
    let q_set = ModulationSet::new(plan.n())?;
    let mut meas = Measurements::read(x, plan, q_set.values())?;
    meas.subtract(z_hat, plan.filter())?;
    let found = candidates(&meas, plan);
    Ok(threshold_estimates(
        plan.n(),
        estimate_candidates(&meas, plan, &found, config)?.into_iter(),
        nu,
    ))
}

/// Sublinear-time recovery: samples at every modulation are read once.
pub fn recover_sublinear<S: SampleSource + ?Sized>(
    x: &S,
    params: &RecoveryParams,
    plan: &CertifiedPlan,
    config: &SublinearConfig,
) -> Result<SparseApproximation> {
    let q_set = ModulationSet::new(plan.n())?;
    let mut meas = Measurements::read(x, plan, q_set.values())?;
    let step = |_: &SparseApproximation, nu: f64| {
        let found = candidates(&meas, plan);
        let added = threshold_estimates(
            plan.n(),
            estimate_candidates(&meas, plan, &found, config)?.into_iter(),
            nu,
        );
        meas.subtract(&added, plan.filter())?;
        Ok(added)
    };
    outer_loop(plan.n(), params, step, None)
}
