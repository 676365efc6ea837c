//! Deterministic sparse recovery from a certified schedule: an outer loop
//! of geometrically decreasing thresholds around a single-pass
//! estimate-and-threshold step, in a linear-time and a sublinear-time form.

mod linear;
mod sublinear;

pub use linear::{recover_linear, recover_linear_traced, sub_recovery_linear};
pub use sublinear::{
    locate_candidates, locate_trace, one_sparse_locate, recover_sublinear, sub_recovery_sublinear,
    EstimateMode, ModulationSet, Sector, SublinearConfig, DEFAULT_QUORUM,
};

use alloc::vec::Vec;

use crate::bucket::{
    bucketize, subtract_sparse, BucketVector, SampleSource, DEFAULT_DELTA_EXPONENT,
};
use crate::error::{invalid, Error, Result};
use crate::filter::FlatFilter;
use crate::forge::{verify_condition, ConditionReport};
use crate::hashing::HashingSchedule;
use crate::math::Float;
use crate::sparse::SparseApproximation;

/// A schedule that passed the bucket-noise check, bundled with its filter.
#[derive(Clone, Debug)]
pub struct CertifiedPlan {
    schedule: HashingSchedule,
    filter: FlatFilter,
    report: ConditionReport,
}

impl CertifiedPlan {
    /// Runs the exhaustive check; uncertified schedules are refused.
    pub fn certify(schedule: HashingSchedule, filter: FlatFilter) -> Result<Self> {
        let report = verify_condition(&schedule, &filter)?;
        if !report.passed {
            return Err(Error::ScheduleNotCertified {
                worst_sum: report.worst_sum,
                threshold: report.threshold,
            });
        }
        Ok(Self {
            schedule,
            filter,
            report,
        })
    }

    pub fn schedule(&self) -> &HashingSchedule {
        &self.schedule
    }
    pub fn filter(&self) -> &FlatFilter {
        &self.filter
    }
    pub fn report(&self) -> &ConditionReport {
        &self.report
    }
    pub fn n(&self) -> u64 {
        self.schedule.n()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoveryParams {
    pub k: u64,
    /// Noise scale `μ`, typically `‖x̂_{−2k}‖₁/(2k)` or an upper bound.
    pub mu: f64,
    /// `R*` with `‖x̂‖₁/μ ≤ R*`.
    pub snr_bound: f64,
    pub c: f64,
    pub rho: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl RecoveryParams {
    pub fn new(k: u64, mu: f64, snr_bound: f64) -> Result<Self> {
        let p = Self {
            k,
            mu,
            snr_bound,
            c: 2.0,
            rho: 32.0,
            beta: 32.0,
            gamma: 2.0,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let positive = [self.mu, self.c, self.rho, self.beta];
        if self.k == 0 || positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("k, mu and the loop constants must be positive"));
        }
        if !(self.gamma > 1.0) || !(self.snr_bound >= 1.0) || !self.snr_bound.is_finite() {
            return Err(invalid(
                "gamma must exceed 1 and the SNR bound must be finite and at least 1",
            ));
        }
        Ok(())
    }

    /// `T = ⌈log_γ R*⌉`, at least 1.
    pub fn iterations(&self) -> u32 {
        let t = Float::ceil(Float::ln(self.snr_bound) / Float::ln(self.gamma) - 1e-12);
        (t as u32).max(1)
    }

    /// `ν^{(t)} = Cμγ^{T−t}`.
    pub fn threshold(&self, t: u32) -> f64 {
        self.c * self.mu * Float::powi(self.gamma, self.iterations() as i32 - t as i32)
    }
}

/// Raw bucket measurements per repetition (and modulation), read once from
/// the samples and kept current with the running approximation by
/// subtracting only what each iteration adds.
struct Measurements {
    /// `rows[r][j]` is repetition `r` under the `j`-th modulation.
    rows: Vec<Vec<BucketVector>>,
}

impl Measurements {
    fn read<S: SampleSource + ?Sized>(
        x: &S,
        plan: &CertifiedPlan,
        modulations: &[u64],
    ) -> Result<Self> {
        if x.n() != plan.n() {
            return Err(Error::LengthMismatch {
                expected: plan.n() as usize,
                found: x.n() as usize,
            });
        }
        let rows = plan
            .schedule
            .triples()
            .iter()
            .map(|t| {
                modulations
                    .iter()
                    .map(|&a| bucketize(x, &t.with_modulation(a), &plan.filter))
                    .collect()
            })
            .collect::<Result<Vec<Vec<_>>>>()?;
        Ok(Self { rows })
    }

    fn subtract(&mut self, delta: &SparseApproximation, filter: &FlatFilter) -> Result<()> {
        if delta.is_empty() {
            return Ok(());
        }
        for row in &mut self.rows {
            for bucket in row {
                subtract_sparse(bucket, delta, filter, DEFAULT_DELTA_EXPONENT)?;
            }
        }
        Ok(())
    }
}

/// Keep the estimates whose magnitude exceeds `ν/2`.
fn threshold_estimates(
    n: u64,
    estimates: impl Iterator<Item = (u64, crate::Complex64)>,
    nu: f64,
) -> SparseApproximation {
    let mut out = SparseApproximation::new(n);
    for (f, v) in estimates {
        if v.norm() > nu / 2.0 {
            out.insert(f, v);
        }
    }
    out
}

/// Per-iteration record of the outer loop.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    /// `ν^{(t)}`.
    pub threshold: f64,
    /// `ẑ^{(t)}` before the step.
    pub before: SparseApproximation,
    /// What the step added.
    pub added: SparseApproximation,
}

/// Outer loop shared by both pipelines.
fn outer_loop(
    n: u64,
    params: &RecoveryParams,
    mut step: impl FnMut(&SparseApproximation, f64) -> Result<SparseApproximation>,
    mut trace: Option<&mut Vec<IterationRecord>>,
) -> Result<SparseApproximation> {
    params.validate()?;
    let mut z = SparseApproximation::new(n);
    for t in 0..params.iterations() {
        let nu = params.threshold(t);
        let added = step(&z, nu)?;
        if let Some(trace) = trace.as_deref_mut() {
            trace.push(IterationRecord {
                threshold: nu,
                before: z.clone(),
                added: added.clone(),
            });
        }
        z.add(&added)?;
    }
    Ok(z)
}
