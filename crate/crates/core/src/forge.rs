//! Hashing schedules that satisfy the bucket-noise condition
//! `Σ_r Ĝ^{−1}_{o_{f,r}(f)} Ĝ_{o_{f,r}(f′)} ≤ 2d/B` for every ordered pair `f ≠ f′`.
//!
//! Two paths: the method of conditional expectations over `(σ, b)` with a
//! pessimistic estimator, and seeded sampling followed by exhaustive
//! verification.
//!
//! The estimator follows the summand of the condition itself. For one
//! repetition with uniform odd `σ` and uniform `b`, the pair `(o_f(f), o_f(f′))`
//! is distributed as `(z, z + σΔ)` with `Δ = f′ − f` and `z` uniform over one
//! bucket core, so the moment generating function of the summand depends on
//! `Δ` alone and is tabulated exactly. With it, the expected estimator after
//! a round equals the current one and the argmin never increases it.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::filter::FlatFilter;
use crate::hashing::{HashingSchedule, HashingTriple};
use crate::math::{log_sum_exp, Float, KahanSum};

/// Bucket-count multiplier over `k` used when forging for a sparsity.
pub const DEFAULT_BUCKET_FACTOR: u64 = 4;
/// Redraws allowed by [`forge_sample_verify`].
pub const SAMPLE_VERIFY_ATTEMPTS: usize = 64;
/// Relative score gap below which two candidates count as tied.
const TIE_MARGIN: f64 = 1e-12;
/// `λ = c/B` grid searched by [`choose_d_lambda`].
const LAMBDA_GRID: [f64; 8] = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
const MAX_D: u64 = 1 << 22;

/// `B = next_pow2(factor·k)`, clamped to `[2, n/8]`.
pub fn bucket_count(n: u64, k: u64, factor: u64) -> u64 {
    let want = (factor * k.max(1)).next_power_of_two();
    want.min((n / 8).max(2)).max(2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForgeParams {
    pub n: u64,
    pub k: u64,
    pub buckets: u64,
    pub sharpness: u32,
    /// Repetition count.
    pub d: u64,
    /// Estimator temperature.
    pub lambda: f64,
    /// Threshold constant: the forge targets `Σ ≤ C·d/B`.
    pub c_threshold: f64,
}

impl ForgeParams {
    /// Parameters for `filter` with `C = 2` and `(d, λ)` chosen by [`choose_d_lambda`].
    pub fn auto(filter: &FlatFilter, k: u64) -> Result<Self> {
        let (d, lambda) = choose_d_lambda(filter)?;
        Ok(Self::with(filter, k, d, lambda))
    }

    pub fn with(filter: &FlatFilter, k: u64, d: u64, lambda: f64) -> Self {
        Self {
            n: filter.n(),
            k,
            buckets: filter.buckets(),
            sharpness: filter.sharpness(),
            d,
            lambda,
            c_threshold: 2.0,
        }
    }

    /// `β = C·d/B`.
    pub fn beta_threshold(&self) -> f64 {
        self.c_threshold * self.d as f64 / self.buckets as f64
    }

    fn validate(&self, filter: &FlatFilter) -> Result<()> {
        if filter.n() != self.n || filter.buckets() != self.buckets {
            return Err(invalid("filter and parameters disagree on n or B"));
        }
        if self.d == 0 {
            return Err(invalid("d must be at least 1"));
        }
        if !(self.lambda > 0.0 && self.lambda < 3.0) {
            return Err(invalid("lambda must lie in (0, 3)"));
        }
        if self.beta_threshold() <= self.d as f64 / self.buckets as f64 {
            return Err(invalid("threshold must exceed d/B"));
        }
        Ok(())
    }
}

/// `M(λ) = e^{λε}[(2/B + 1/n)(e^{λ(1−ε)} − 1) + 1]`, an upper bound on
/// `E e^{λĜ_o}` for the offset of any `f′ ≠ f`.
pub fn mgf_bound(epsilon: f64, buckets: u64, n: u64, lambda: f64) -> f64 {
    let mass = 2.0 / buckets as f64 + 1.0 / n as f64;
    Float::exp(lambda * epsilon) * (mass * (Float::exp(lambda * (1.0 - epsilon)) - 1.0) + 1.0)
}

/// `ln h_r = −λβ + λ·accumulated + (d − r)·ln M`.
pub fn pessimistic_estimate(
    lambda: f64,
    beta: f64,
    accumulated: f64,
    log_mgf: f64,
    d: u64,
    r: u64,
) -> f64 {
    -lambda * beta + lambda * accumulated + (d - r) as f64 * log_mgf
}

/// Exact one-repetition law of the condition summand.
#[derive(Clone, Debug)]
pub struct OffsetLaw {
    n: u64,
    buckets: u64,
    /// `core[i] = Ĝ_z` for `z = i − n/(2B)`, one bucket core.
    core: Vec<f64>,
    response: Vec<f64>,
}

impl OffsetLaw {
    pub fn new(filter: &FlatFilter) -> Self {
        let n = filter.n();
        let width = n / filter.buckets();
        let core = (0..width)
            .map(|i| filter.value_at(i as i64 - (width / 2) as i64))
            .collect();
        Self {
            n,
            buckets: filter.buckets(),
            core,
            response: filter.response().to_vec(),
        }
    }

    /// `ln E_{σ,b} exp(λ Ĝ_{o_f(f′)} / Ĝ_{o_f(f)})` for `Δ = f′ − f`, by
    /// enumeration of odd `σ` and the core offset of `f`.
    pub fn log_mgf(&self, delta: u64, lambda: f64) -> f64 {
        let n = self.n;
        let mask = n - 1;
        let half = (self.core.len() / 2) as u64;
        let mut acc = KahanSum::default();
        for sigma in (1..n).step_by(2) {
            let shift = sigma.wrapping_mul(delta) & mask;
            for (i, g) in self.core.iter().enumerate() {
                let z = (i as u64).wrapping_sub(half);
                let m = z.wrapping_add(shift) & mask;
                acc.add(Float::exp(lambda * self.response[m as usize] / g));
            }
        }
        Float::ln(acc.value() / ((n / 2) as f64 * self.core.len() as f64))
    }

    /// `ln M_Δ(λ)` for every `Δ ∈ [0, n)`; entry 0 is unused and set to 0.
    pub fn log_mgf_table(&self, lambda: f64) -> Vec<f64> {
        let mut table: Vec<f64> = (0..self.n)
            .map(|d| if d == 0 { 0.0 } else { self.log_mgf(d, lambda) })
            .collect();
        table[0] = 0.0;
        table
    }

    pub fn buckets(&self) -> u64 {
        self.buckets
    }
}

/// `ln Σ_{f≠f′} h_0` given the per-difference log-MGF table: `n` ordered
/// pairs share each `Δ`.
fn log_initial_total(log_mgf: &[f64], lambda: f64, beta: f64, d: u64) -> f64 {
    let n = log_mgf.len() as f64;
    Float::ln(n)
        + log_sum_exp(
            log_mgf[1..]
                .iter()
                .map(|&m| pessimistic_estimate(lambda, beta, 0.0, m, d, 0)),
        )
}

/// `ln Σ_{f≠f′} h_0` for the given parameters.
pub fn initial_total(params: &ForgeParams, filter: &FlatFilter) -> Result<f64> {
    params.validate(filter)?;
    let table = OffsetLaw::new(filter).log_mgf_table(params.lambda);
    Ok(log_initial_total(
        &table,
        params.lambda,
        params.beta_threshold(),
        params.d,
    ))
}

/// Smallest multiple of 10 making `Σ h_0 < 1` at this `λ`, if any.
fn minimal_d(log_mgf: &[f64], lambda: f64, c_threshold: f64, buckets: u64) -> Option<u64> {
    let per_round = c_threshold * lambda / buckets as f64;
    // Each Δ contributes exp(d·(ln M_Δ − Cλ/B)); all slopes must be negative.
    if log_mgf[1..].iter().any(|&m| m >= per_round) {
        return None;
    }
    let passes = |d: u64| {
        log_initial_total(log_mgf, lambda, c_threshold * d as f64 / buckets as f64, d) < 0.0
    };
    let mut hi = 10;
    while !passes(hi) {
        hi *= 2;
        if hi > MAX_D {
            return None;
        }
    }
    let mut lo = hi / 2 / 10 * 10;
    if lo < 10 {
        return Some(10);
    }
    // passes(hi) holds and passes(lo) fails; both multiples of 10.
    while hi - lo > 10 {
        let mid = (lo + hi) / 20 * 10;
        if passes(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Grid search over `λ = c/B` and binary search over `d` (multiples of 10)
/// for the smallest `d` with `Σ_{f≠f′} h_0 < 1` at `C = 2`.
pub fn choose_d_lambda(filter: &FlatFilter) -> Result<(u64, f64)> {
    let law = OffsetLaw::new(filter);
    let b = filter.buckets() as f64;
    let mut best: Option<(u64, f64)> = None;
    for c in LAMBDA_GRID {
        let lambda = c / b;
        if lambda >= 3.0 {
            continue;
        }
        let table = law.log_mgf_table(lambda);
        if let Some(d) = minimal_d(&table, lambda, 2.0, filter.buckets()) {
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, lambda));
            }
        }
    }
    best.ok_or(Error::InitialCondition {
        total: f64::INFINITY,
        suggestion: None,
    })
}

/// Grid `λ` minimizing the initial total at a fixed `d`, with that total's
/// logarithm. The total may still be `≥ 1`; callers decide.
pub fn lambda_for_d(filter: &FlatFilter, d: u64) -> Result<(f64, f64)> {
    if d == 0 {
        return Err(invalid("d must be positive"));
    }
    let law = OffsetLaw::new(filter);
    let b = filter.buckets() as f64;
    let beta = 2.0 * d as f64 / b;
    LAMBDA_GRID
        .iter()
        .map(|c| c / b)
        .filter(|&l| l < 3.0)
        .map(|l| (l, log_initial_total(&law.log_mgf_table(l), l, beta, d)))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .ok_or_else(|| invalid("no admissible temperature"))
}

/// Outcome of an exhaustive condition check.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    /// Ordered pair `(f, f′)` attaining the worst sum.
    pub worst_pair: (u64, u64),
    pub worst_sum: f64,
    /// `2d/B`.
    pub threshold: f64,
    pub passed: bool,
}

/// Running pair sums `Σ_{ℓ≤r} Ĝ^{−1}_{o_{f,ℓ}(f)} Ĝ_{o_{f,ℓ}(f′)}`, row-major in `(f, f′)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairState {
    n: u64,
    rounds: u64,
    accumulated: Vec<f64>,
}

impl PairState {
    pub fn new(n: u64) -> Self {
        Self {
            n,
            rounds: 0,
            accumulated: vec![0.0; (n * n) as usize],
        }
    }
    pub fn rounds(&self) -> u64 {
        self.rounds
    }
    pub fn accumulated(&self, f: u64, f2: u64) -> f64 {
        self.accumulated[(f * self.n + f2) as usize]
    }

    /// Add one repetition's summands.
    pub fn apply(&mut self, triple: &HashingTriple, filter: &FlatFilter) {
        let n = self.n;
        let mask = n - 1;
        let width = n / filter.buckets();
        let perm: Vec<u64> = (0..n).map(|f| triple.permute_freq(f)).collect();
        let response = filter.response();
        for f in 0..n {
            let center = width * triple.bucket_of(filter.buckets(), f);
            let inv = 1.0 / filter.value_at(perm[f as usize] as i64 - center as i64);
            let row = &mut self.accumulated[(f * n) as usize..((f + 1) * n) as usize];
            for (f2, cell) in row.iter_mut().enumerate() {
                if f2 as u64 != f {
                    *cell += response[(perm[f2].wrapping_sub(center) & mask) as usize] * inv;
                }
            }
        }
        self.rounds += 1;
    }

    /// Worst ordered pair.
    pub fn worst(&self) -> ((u64, u64), f64) {
        let mut best = ((0, 1), f64::NEG_INFINITY);
        for f in 0..self.n {
            for f2 in 0..self.n {
                let v = self.accumulated(f, f2);
                if f != f2 && v > best.1 {
                    best = ((f, f2), v);
                }
            }
        }
        best
    }
}

/// Exhaustive check of the condition over all `n(n−1)` ordered pairs.
pub fn verify_condition(
    schedule: &HashingSchedule,
    filter: &FlatFilter,
) -> Result<ConditionReport> {
    if schedule.n() != filter.n() || schedule.buckets() != filter.buckets() {
        return Err(invalid("schedule and filter disagree on n or B"));
    }
    let mut state = PairState::new(schedule.n());
    for triple in schedule.triples() {
        state.apply(triple, filter);
    }
    let (worst_pair, worst_sum) = state.worst();
    let threshold = 2.0 * schedule.len() as f64 / schedule.buckets() as f64;
    Ok(ConditionReport {
        worst_pair,
        worst_sum,
        threshold,
        passed: worst_sum <= threshold,
    })
}

/// A forged schedule with its per-round estimator totals.
#[derive(Clone, Debug)]
pub struct ForgeOutcome {
    pub schedule: HashingSchedule,
    /// `ln Σ_{f≠f′} h_r` for `r = 0..=d`.
    pub log_totals: Vec<f64>,
    pub state: PairState,
}

/// Tables shared by every round of the derandomized forge.
struct RoundTables {
    n: u64,
    width: u64,
    /// `ex[z][m] = exp(λ Ĝ_m / Ĝ_z)` for core offsets `z`.
    ex: Vec<Vec<f64>>,
}

impl RoundTables {
    fn new(filter: &FlatFilter, lambda: f64) -> Self {
        let n = filter.n();
        let width = n / filter.buckets();
        let response = filter.response();
        let ex = (0..width)
            .map(|i| {
                let g = filter.value_at(i as i64 - (width / 2) as i64);
                response
                    .iter()
                    .map(|&v| Float::exp(lambda * v / g))
                    .collect()
            })
            .collect();
        Self { n, width, ex }
    }

    /// `Σ_{f≠f′} W[f][f′]·exp(λ X_{σ,b}(f, f′))`.
    fn score(&self, weights: &[f64], sigma: u64, b: u64) -> f64 {
        let n = self.n;
        let mask = n - 1;
        let width = self.width;
        let start = sigma.wrapping_mul(n - b) & mask;
        let mut total = 0.0;
        let mut pf = start;
        for f in 0..n as usize {
            let h = (2 * pf + width) / (2 * width) % (n / width);
            let center = width * h;
            let z = (pf.wrapping_sub(center).wrapping_add(width / 2) & mask) as usize;
            let row = &self.ex[z];
            let w = &weights[f * n as usize..(f + 1) * n as usize];
            let mut idx = start.wrapping_sub(center) & mask;
            let mut acc = 0.0;
            for &wv in w {
                acc += wv * row[idx as usize];
                idx = (idx + sigma) & mask;
            }
            total += acc;
            pf = (pf + sigma) & mask;
        }
        total
    }
}

/// Method of conditional expectations: each round picks the `(σ, b)` that
/// minimizes `Σ_{f≠f′} h_{r+1}`, ties to the smallest `(σ, b)`.
pub fn forge_derandomized(params: &ForgeParams, filter: &FlatFilter) -> Result<ForgeOutcome> {
    params.validate(filter)?;
    let n = params.n;
    let nn = n as usize;
    let lambda = params.lambda;
    let beta = params.beta_threshold();
    let law = OffsetLaw::new(filter);
    let log_mgf = law.log_mgf_table(lambda);
    let start = log_initial_total(&log_mgf, lambda, beta, params.d);
    if start >= 0.0 {
        let suggestion =
            minimal_d(&log_mgf, lambda, params.c_threshold, params.buckets).map(|d| d as f64);
        return Err(Error::InitialCondition {
            total: Float::exp(start),
            suggestion,
        });
    }
    let tables = RoundTables::new(filter, lambda);
    let mut state = PairState::new(n);
    let mut triples = Vec::with_capacity(params.d as usize);
    let mut log_totals = vec![start];
    let mut weights = vec![0.0; nn * nn];
    for r in 0..params.d {
        // ln W = λ·acc + (d − r − 1)·ln M_Δ, shifted by its maximum.
        let remaining = (params.d - r - 1) as f64;
        let mut shift = f64::NEG_INFINITY;
        for f in 0..n {
            for f2 in 0..n {
                if f != f2 {
                    let lw = lambda * state.accumulated(f, f2)
                        + remaining * log_mgf[((f2 + n - f) % n) as usize];
                    weights[(f * n + f2) as usize] = lw;
                    shift = shift.max(lw);
                }
            }
        }
        for f in 0..nn {
            for f2 in 0..nn {
                let cell = &mut weights[f * nn + f2];
                *cell = if f == f2 {
                    0.0
                } else {
                    Float::exp(*cell - shift)
                };
            }
        }
        let mut best = (f64::INFINITY, 1u64, 0u64);
        for sigma in (1..n).step_by(2) {
            for b in 0..n {
                let s = tables.score(&weights, sigma, b);
                if s < best.0 * (1.0 - TIE_MARGIN) {
                    best = (s, sigma, b);
                }
            }
        }
        let triple = HashingTriple::new(best.1, 0, best.2, n)?;
        state.apply(&triple, filter);
        triples.push(triple);
        log_totals.push(shift - lambda * beta + Float::ln(best.0));
    }
    let schedule = HashingSchedule::new(n, params.buckets, params.sharpness, triples)?;
    Ok(ForgeOutcome {
        schedule,
        log_totals,
        state,
    })
}

fn draw_below(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    // Bounds are powers of two here, so masking is unbiased.
    rng.next_u64() & (bound - 1)
}

/// Seeded random schedules, each verified exhaustively; at most
/// [`SAMPLE_VERIFY_ATTEMPTS`] draws.
pub fn forge_sample_verify(
    params: &ForgeParams,
    filter: &FlatFilter,
    seed: u64,
) -> Result<HashingSchedule> {
    if filter.n() != params.n || filter.buckets() != params.buckets || params.d == 0 {
        return Err(invalid("filter and parameters disagree, or d = 0"));
    }
    let n = params.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..SAMPLE_VERIFY_ATTEMPTS {
        let triples = (0..params.d)
            .map(|_| {
                let sigma = 2 * draw_below(&mut rng, n / 2) + 1;
                let b = draw_below(&mut rng, n);
                HashingTriple::new(sigma, 0, b, n)
            })
            .collect::<Result<Vec<_>>>()?;
        let schedule = HashingSchedule::new(n, params.buckets, params.sharpness, triples)?;
        if verify_condition(&schedule, filter)?.passed {
            return Ok(schedule);
        }
    }
    Err(Error::BudgetExhausted {
        attempts: SAMPLE_VERIFY_ATTEMPTS,
    })
}
