use alloc::vec::Vec;

use super::{
    outer_loop, threshold_estimates, CertifiedPlan, IterationRecord, Measurements, RecoveryParams,
};
use crate::bucket::{estimate_from_bucket, SampleSource};
use crate::error::Result;
use crate::hashing::median_complex;
use crate::sparse::SparseApproximation;
use crate::Complex64;

/// Median over repetitions of the corrected bucket read for every `f`.
fn estimate_all(meas: &Measurements, plan: &CertifiedPlan) -> Result<Vec<(u64, Complex64)>> {
    let mut reads = Vec::with_capacity(meas.rows.len());
    (0..plan.n())
        .map(|f| {
            reads.clear();
            reads.extend(
                meas.rows
                    .iter()
                    .map(|row| estimate_from_bucket(&row[0], plan.filter(), f)),
            );
            Ok((f, median_complex(&reads)?))
        })
        .collect()
}

/// One estimate-and-threshold pass on `x̂ − ẑ`: keeps `f` when the median
/// estimate exceeds `ν/2` in magnitude.
pub fn sub_recovery_linear<S: SampleSource + ?Sized>(
    x: &S,
    z_hat: &SparseApproximation,
    nu: f64,
    plan: &CertifiedPlan,
) -> Result<SparseApproximation> {
    let mut meas = Measurements::read(x, plan, &[0])?;
    meas.subtract(z_hat, plan.filter())?;
    Ok(threshold_estimates(
        plan.n(),
        estimate_all(&meas, plan)?.into_iter(),
        nu,
    ))
}

/// Linear-time recovery. Samples are read once; each iteration works on
/// the residual buckets.
pub fn recover_linear<S: SampleSource + ?Sized>(
    x: &S,
    params: &RecoveryParams,
    plan: &CertifiedPlan,
) -> Result<SparseApproximation> {
    run(x, params, plan, None)
}

/// [`recover_linear`] that also records every iteration.
pub fn recover_linear_traced<S: SampleSource + ?Sized>(
    x: &S,
    params: &RecoveryParams,
    plan: &CertifiedPlan,
) -> Result<(SparseApproximation, Vec<IterationRecord>)> {
    let mut trace = Vec::new();
    let z = run(x, params, plan, Some(&mut trace))?;
    Ok((z, trace))
}

fn run<S: SampleSource + ?Sized>(
    x: &S,
    params: &RecoveryParams,
    plan: &CertifiedPlan,
    trace: Option<&mut Vec<IterationRecord>>,
) -> Result<SparseApproximation> {
    let mut meas = Measurements::read(x, plan, &[0])?;
    let step = |_: &SparseApproximation, nu: f64| {
        let added = threshold_estimates(plan.n(), estimate_all(&meas, plan)?.into_iter(), nu);
        meas.subtract(&added, plan.filter())?;
        Ok(added)
    };
    outer_loop(plan.n(), params, step, trace)
}
