//! Derandomized Bernoulli row subsampling.
//!
//! Each row `ℓ` of a square matrix with orthonormal columns and entries
//! bounded by `C/√n` is kept (`δ_ℓ = 1`) or dropped by a conditional
//! expectation walk. For every unordered column pair the real and imaginary
//! parts of `Σ_ℓ (δ_ℓ − p) A_{ℓi} conj(A_{ℓj})` carry a two-sided Bernstein
//! estimator at threshold `t/√2`; the row count carries one-sided Chernoff
//! estimators for `Σδ > 2m` and `Σδ < m/2`. The walk keeps the summed
//! estimator non-increasing, so a start below 1 ends with no event holding.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::math::{root_of_unity, Float, KahanSum};

/// Default Chernoff temperature for the row-count estimators.
pub const DEFAULT_KAPPA: f64 = core::f64::consts::LN_2;

/// A square matrix given entry by entry.
pub trait EntryMatrix {
    /// Side length `n`.
    fn size(&self) -> usize;
    fn entry(&self, row: usize, col: usize) -> Complex64;
    /// `C` in `|A_{ij}| ≤ C/√n`.
    fn entry_bound(&self) -> f64;

    /// All entries of one row.
    fn row(&self, row: usize) -> Vec<Complex64> {
        (0..self.size()).map(|c| self.entry(row, c)).collect()
    }
}

/// The unitary DFT matrix `n^{-1/2} ω^{ℓi}`.
#[derive(Clone, Debug)]
pub struct DftMatrix {
    n: usize,
    table: Vec<Complex64>,
}

impl DftMatrix {
    pub fn new(n: usize) -> Self {
        let scale = 1.0 / Float::sqrt(n as f64);
        let table = (0..n)
            .map(|k| root_of_unity(k as i128, n as u64) * scale)
            .collect();
        Self { n, table }
    }
}

impl EntryMatrix for DftMatrix {
    fn size(&self) -> usize {
        self.n
    }

    fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.table[(row * col) % self.n]
    }

    fn entry_bound(&self) -> f64 {
        1.0
    }
}

/// Wraps a closure `(row, col) -> entry`.
pub struct FnMatrix<F> {
    n: usize,
    bound: f64,
    f: F,
}

impl<F: Fn(usize, usize) -> Complex64> FnMatrix<F> {
    pub fn new(n: usize, bound: f64, f: F) -> Self {
        Self { n, bound, f }
    }
}

impl<F: Fn(usize, usize) -> Complex64> EntryMatrix for FnMatrix<F> {
    fn size(&self) -> usize {
        self.n
    }

    fn entry(&self, row: usize, col: usize) -> Complex64 {
        (self.f)(row, col)
    }

    fn entry_bound(&self) -> f64 {
        self.bound
    }
}

/// Which initial condition the walk insists on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitialRule {
    /// Pair events below `1/n` and the upper count event below `1/2`
    /// (lower count event below `1/2` as well).
    #[default]
    Split,
    /// Everything together below 1, which is all the walk needs.
    Total,
}

/// Parameters of the walk.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsampleParams {
    pub n: usize,
    pub k: usize,
    /// Oversampling constant `C_m`.
    pub oversampling: f64,
    /// Target row count `m = C_m·k²·⌈ln n⌉`.
    pub m: f64,
    /// Keep probability `m/n`.
    pub p: f64,
    /// Inner product threshold `m/(kn)` on the unnormalized submatrix.
    pub t: f64,
    /// `C²/n`.
    pub eta: f64,
    /// Bernstein temperature.
    pub lambda: f64,
    /// Chernoff temperature.
    pub kappa: f64,
    pub rule: InitialRule,
}

fn log_factor(n: usize) -> f64 {
    Float::ceil(Float::ln(n as f64))
}

impl SubsampleParams {
    /// Parameters for an `n×n` matrix with entry bound `C`. The Bernstein
    /// temperature is tuned to the per-component threshold `t/√2`.
    pub fn new(n: usize, k: usize, oversampling: f64, entry_bound: f64) -> Result<Self> {
        if n < 2 || k == 0 {
            return Err(invalid("need n ≥ 2 and k ≥ 1"));
        }
        if !(oversampling > 0.0) || !(entry_bound > 0.0) {
            return Err(invalid("oversampling and entry bound must be positive"));
        }
        let m = oversampling * (k * k) as f64 * log_factor(n);
        let p = m / n as f64;
        let t = m / (k as f64 * n as f64);
        let eta = entry_bound * entry_bound / n as f64;
        let tau = t / core::f64::consts::SQRT_2;
        let lambda = tau / (n as f64 * eta * eta * p * (1.0 - p) + tau * eta / 3.0);
        let params = Self {
            n,
            k,
            oversampling,
            m,
            p,
            t,
            eta,
            lambda,
            kappa: DEFAULT_KAPPA,
            rule: InitialRule::default(),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        self.kappa = kappa;
        self.validate()?;
        Ok(self)
    }

    pub fn with_rule(mut self, rule: InitialRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(invalid("keep probability m/n must lie in (0, 1)"));
        }
        if !(self.lambda > 0.0 && self.lambda < 3.0 / self.eta) {
            return Err(invalid("Bernstein temperature must lie in (0, 3/η)"));
        }
        if !(self.kappa > 0.0) {
            return Err(invalid("Chernoff temperature must be positive"));
        }
        Ok(())
    }

    /// Per-component event threshold `t/√2`.
    pub fn component_threshold(&self) -> f64 {
        self.t / core::f64::consts::SQRT_2
    }
}

/// `M(λ) = p e^{λ(1−p)a} + (1−p) e^{−λpa}`, the moment generating function
/// of `(δ − p)a`.
pub fn bernstein_mgf(a: f64, lambda: f64, p: f64) -> f64 {
    p * Float::exp(lambda * (1.0 - p) * a) + (1.0 - p) * Float::exp(-lambda * p * a)
}

/// `ln M(λ)` written as `−λpa + ln(1 + p(e^{λa} − 1))`.
fn ln_mgf(a: f64, lambda: f64, p: f64) -> f64 {
    -lambda * p * a + Float::ln_1p(p * Float::exp_m1(lambda * a))
}

/// A multiset of selected rows with per-column scales making the
/// selected columns unit norm.
#[derive(Clone, Debug, PartialEq)]
pub struct RowSelection {
    pub n: usize,
    /// Sorted; repetitions allowed.
    pub rows: Vec<usize>,
    pub normalization: Vec<f64>,
}

impl RowSelection {
    /// Normalizes every column of `matrix` restricted to `rows` explicitly.
    pub fn new<A: EntryMatrix + ?Sized>(matrix: &A, mut rows: Vec<usize>) -> Result<Self> {
        let n = matrix.size();
        if rows.is_empty() {
            return Err(invalid("empty row selection"));
        }
        if let Some(&r) = rows.iter().find(|&&r| r >= n) {
            return Err(invalid(alloc::format!("row {r} out of range for n={n}")));
        }
        rows.sort_unstable();
        let mut norms = vec![KahanSum::default(); n];
        for &r in &rows {
            for (c, v) in matrix.row(r).iter().enumerate() {
                norms[c].add(v.norm_sqr());
            }
        }
        let normalization = norms
            .iter()
            .map(|s| {
                let v = s.value();
                if v > 0.0 {
                    1.0 / Float::sqrt(v)
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self {
            n,
            rows,
            normalization,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Largest normalized inner product between two distinct columns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IncoherenceReport {
    pub max_inner: f64,
    pub pair: (usize, usize),
}

/// Brute force over all column pairs, `O(n²·|rows|)`.
pub fn verify_incoherence<A: EntryMatrix + ?Sized>(
    selection: &RowSelection,
    matrix: &A,
) -> IncoherenceReport {
    let n = selection.n;
    let rows: Vec<Vec<Complex64>> = selection.rows.iter().map(|&r| matrix.row(r)).collect();
    let mut best = IncoherenceReport {
        max_inner: 0.0,
        pair: (0, 1.min(n.saturating_sub(1))),
    };
    for i in 0..n {
        for j in i + 1..n {
            let mut re = KahanSum::default();
            let mut im = KahanSum::default();
            for row in &rows {
                let v = row[i] * row[j].conj();
                re.add(v.re);
                im.add(v.im);
            }
            let inner = Complex64::new(re.value(), im.value()).norm()
                * selection.normalization[i]
                * selection.normalization[j];
            if inner > best.max_inner {
                best = IncoherenceReport {
                    max_inner: inner,
                    pair: (i, j),
                };
            }
        }
    }
    best
}

/// Estimator state for one real component of one column pair.
#[derive(Clone, Copy, Debug, Default)]
struct ComponentState {
    /// `Σ_{ℓ<r} (δ_ℓ − p) a_ℓ`.
    w: f64,
    /// `Σ_{ℓ≥r} ln M_ℓ(λ)`.
    plus: f64,
    /// `Σ_{ℓ≥r} ln M_ℓ(−λ)`.
    minus: f64,
}

impl ComponentState {
    fn value(&self, lambda: f64, tau: f64) -> f64 {
        Float::exp(-lambda * tau + lambda * self.w + self.plus)
            + Float::exp(-lambda * tau - lambda * self.w + self.minus)
    }

    /// Value after fixing the current row to `delta`, given the row's `a`
    /// and its two log-MGFs.
    fn value_after(&self, lambda: f64, tau: f64, shift: f64, lp: f64, lm: f64) -> f64 {
        let w = self.w + shift;
        Float::exp(-lambda * tau + lambda * w + self.plus - lp)
            + Float::exp(-lambda * tau - lambda * w + self.minus - lm)
    }
}

/// Estimator totals before and after fixing one row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub row: usize,
    pub delta: bool,
    /// Total before the step.
    pub before: f64,
    /// Totals for `δ = 0` and `δ = 1`.
    pub after: [f64; 2],
}

impl StepRecord {
    /// `|before − (p·after₁ + (1−p)·after₀)| / before`.
    pub fn decomposition_error(&self, p: f64) -> f64 {
        let mix = p * self.after[1] + (1.0 - p) * self.after[0];
        Float::abs(self.before - mix) / self.before
    }
}

/// Initial estimator total split by event family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialTotals {
    /// Inner-product events, summed over unordered pairs and both parts.
    pub pairs: f64,
    /// `Σδ > 2m`.
    pub upper: f64,
    /// `Σδ < m/2`.
    pub lower: f64,
}

impl InitialTotals {
    pub fn total(&self) -> f64 {
        self.pairs + self.upper + self.lower
    }

    pub fn passes(&self, rule: InitialRule, n: usize) -> bool {
        match rule {
            InitialRule::Split => {
                self.pairs < 1.0 / n as f64 && self.upper < 0.5 && self.lower < 0.5
            }
            InitialRule::Total => self.total() < 1.0,
        }
    }
}

/// The conditional expectation walk, one row per [`SubsampleWalk::step`].
pub struct SubsampleWalk<'a, A: EntryMatrix + ?Sized> {
    matrix: &'a A,
    params: SubsampleParams,
    /// Two components per unordered pair, pairs in `(i, j), i < j` order.
    states: Vec<ComponentState>,
    next: usize,
    kept: Vec<usize>,
    initial: InitialTotals,
}

fn pair_products(row: &[Complex64], out: &mut Vec<f64>) {
    out.clear();
    let n = row.len();
    for i in 0..n {
        for j in i + 1..n {
            let v = row[i] * row[j].conj();
            out.push(v.re);
            out.push(v.im);
        }
    }
}

fn chernoff_upper(params: &SubsampleParams, kept: usize, remaining: usize) -> f64 {
    let k = params.kappa;
    let mgf = params.p * Float::exp(k) + 1.0 - params.p;
    Float::exp(-2.0 * params.m * k + k * kept as f64 + remaining as f64 * Float::ln(mgf))
}

fn chernoff_lower(params: &SubsampleParams, kept: usize, remaining: usize) -> f64 {
    let k = params.kappa;
    let mgf = params.p * Float::exp(-k) + 1.0 - params.p;
    Float::exp(k * params.m / 2.0 - k * kept as f64 + remaining as f64 * Float::ln(mgf))
}

/// Initial totals for `params` without building a walk.
pub fn initial_totals<A: EntryMatrix + ?Sized>(
    matrix: &A,
    params: &SubsampleParams,
) -> InitialTotals {
    let states = initial_states(matrix, params);
    summarize(&states, params)
}

fn initial_states<A: EntryMatrix + ?Sized>(
    matrix: &A,
    params: &SubsampleParams,
) -> Vec<ComponentState> {
    let n = matrix.size();
    let mut states = vec![ComponentState::default(); n * (n - 1)];
    let mut a = Vec::with_capacity(states.len());
    for l in 0..n {
        pair_products(&matrix.row(l), &mut a);
        for (s, &v) in states.iter_mut().zip(&a) {
            s.plus += ln_mgf(v, params.lambda, params.p);
            s.minus += ln_mgf(v, -params.lambda, params.p);
        }
    }
    states
}

fn summarize(states: &[ComponentState], params: &SubsampleParams) -> InitialTotals {
    let tau = params.component_threshold();
    let mut acc = KahanSum::default();
    for s in states {
        acc.add(s.value(params.lambda, tau));
    }
    InitialTotals {
        pairs: acc.value(),
        upper: chernoff_upper(params, 0, params.n),
        lower: chernoff_lower(params, 0, params.n),
    }
}

impl<'a, A: EntryMatrix + ?Sized> SubsampleWalk<'a, A> {
    /// Builds all pair states and checks the initial condition named by
    /// `params.rule`. On failure the error suggests the smallest passing
    /// `C_m`.
    pub fn new(matrix: &'a A, params: SubsampleParams) -> Result<Self> {
        params.validate()?;
        if matrix.size() != params.n {
            return Err(Error::LengthMismatch {
                expected: params.n,
                found: matrix.size(),
            });
        }
        let states = initial_states(matrix, &params);
        let initial = summarize(&states, &params);
        if !initial.passes(params.rule, params.n) {
            return Err(Error::InitialCondition {
                total: initial.total(),
                suggestion: minimal_oversampling(matrix, params.k, params.kappa, params.rule),
            });
        }
        Ok(Self {
            matrix,
            params,
            states,
            next: 0,
            kept: Vec::new(),
            initial,
        })
    }

    pub fn params(&self) -> &SubsampleParams {
        &self.params
    }

    pub fn initial(&self) -> InitialTotals {
        self.initial
    }

    /// Rows fixed so far, with the kept ones listed.
    pub fn fixed(&self) -> (usize, &[usize]) {
        (self.next, &self.kept)
    }

    /// Current real and imaginary estimators of the pair `i < j`.
    pub fn pair_estimate(&self, i: usize, j: usize) -> [f64; 2] {
        let n = self.params.n;
        assert!(i < j && j < n);
        let idx = 2 * (i * (2 * n - i - 1) / 2 + (j - i - 1));
        let tau = self.params.component_threshold();
        [
            self.states[idx].value(self.params.lambda, tau),
            self.states[idx + 1].value(self.params.lambda, tau),
        ]
    }

    pub fn is_done(&self) -> bool {
        self.next == self.params.n
    }

    /// Current total of all estimators.
    pub fn total(&self) -> f64 {
        let tau = self.params.component_threshold();
        let mut acc = KahanSum::default();
        for s in &self.states {
            acc.add(s.value(self.params.lambda, tau));
        }
        let remaining = self.params.n - self.next;
        acc.value()
            + chernoff_upper(&self.params, self.kept.len(), remaining)
            + chernoff_lower(&self.params, self.kept.len(), remaining)
    }

    /// Fixes the next row to whichever choice gives the smaller total
    /// (ties keep the row dropped).
    pub fn step(&mut self) -> Option<StepRecord> {
        if self.is_done() {
            return None;
        }
        let SubsampleParams { lambda, p, .. } = self.params;
        let tau = self.params.component_threshold();
        let row = self.next;
        let mut a = Vec::with_capacity(self.states.len());
        pair_products(&self.matrix.row(row), &mut a);

        let mut before = KahanSum::default();
        let mut after = [KahanSum::default(), KahanSum::default()];
        let mut logs = Vec::with_capacity(a.len());
        for (s, &v) in self.states.iter().zip(&a) {
            let lp = ln_mgf(v, lambda, p);
            let lm = ln_mgf(v, -lambda, p);
            logs.push((lp, lm));
            before.add(s.value(lambda, tau));
            after[0].add(s.value_after(lambda, tau, -p * v, lp, lm));
            after[1].add(s.value_after(lambda, tau, (1.0 - p) * v, lp, lm));
        }
        let kept = self.kept.len();
        let remaining = self.params.n - row;
        let counts = |kept, remaining| {
            chernoff_upper(&self.params, kept, remaining)
                + chernoff_lower(&self.params, kept, remaining)
        };
        let before = before.value() + counts(kept, remaining);
        let after = [
            after[0].value() + counts(kept, remaining - 1),
            after[1].value() + counts(kept + 1, remaining - 1),
        ];
        let delta = after[1] < after[0];
        let shift = if delta { 1.0 - p } else { -p };
        for ((s, &v), &(lp, lm)) in self.states.iter_mut().zip(&a).zip(&logs) {
            s.w += shift * v;
            s.plus -= lp;
            s.minus -= lm;
        }
        if delta {
            self.kept.push(row);
        }
        self.next += 1;
        Some(StepRecord {
            row,
            delta,
            before,
            after,
        })
    }

    /// Runs the remaining steps and returns the normalized selection.
    pub fn finish(mut self) -> Result<RowSelection> {
        while self.step().is_some() {}
        RowSelection::new(self.matrix, self.kept)
    }
}

/// Output of [`subsample_derandomized`].
#[derive(Clone, Debug, PartialEq)]
pub struct Subsample {
    pub selection: RowSelection,
    pub params: SubsampleParams,
    pub initial: InitialTotals,
    /// `√2·t·n/|rows|`, certified for the normalized columns.
    pub certified_bound: f64,
    /// `t·n/|rows|`, what the two component bounds give before rounding up.
    pub raw_bound: f64,
    /// Largest decomposition error seen over all steps.
    pub max_decomposition_error: f64,
}

/// Runs the full walk.
pub fn subsample_derandomized<A: EntryMatrix + ?Sized>(
    matrix: &A,
    params: SubsampleParams,
) -> Result<Subsample> {
    let mut walk = SubsampleWalk::new(matrix, params)?;
    let mut worst = 0.0f64;
    while let Some(rec) = walk.step() {
        worst = worst.max(rec.decomposition_error(walk.params.p));
    }
    let params = walk.params.clone();
    let initial = walk.initial;
    let selection = walk.finish()?;
    let scale = params.n as f64 / selection.len() as f64;
    Ok(Subsample {
        certified_bound: core::f64::consts::SQRT_2 * params.t * scale,
        raw_bound: params.t * scale,
        selection,
        params,
        initial,
        max_decomposition_error: worst,
    })
}

/// Smallest `C_m` (to 1/16) passing `rule`, or `None` if even `p` just
/// under 1 fails.
pub fn minimal_oversampling<A: EntryMatrix + ?Sized>(
    matrix: &A,
    k: usize,
    kappa: f64,
    rule: InitialRule,
) -> Option<f64> {
    let n = matrix.size();
    let per = (k * k) as f64 * log_factor(n);
    let passes = |c: f64| {
        SubsampleParams::new(n, k, c, matrix.entry_bound())
            .and_then(|p| p.with_kappa(kappa))
            .map(|p| initial_totals(matrix, &p).passes(rule, n))
            .unwrap_or(false)
    };
    let step = 1.0 / 16.0;
    // Largest grid point with p < 1.
    let top = Float::floor((n as f64 / per - 1e-9) / step) as i64;
    if top < 1 || !passes(top as f64 * step) {
        return None;
    }
    let (mut lo, mut hi) = (0i64, top);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if passes(mid as f64 * step) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi as f64 * step)
}
