//! Brute-force oracles and adversarial generators.
//!
//! Nothing in here calls into the fast paths it is used to check: the DFT is
//! a direct `O(n²)` sum, and the guarantee checker works from full spectra.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::math::{root_of_unity, Float, KahanSum};

/// Unitary DFT `x̂_f = n^{-1/2} Σ_t x_t ω^{ft}` by direct summation.
pub fn exact_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len() as u64;
    if n == 0 {
        return Vec::new();
    }
    let scale = 1.0 / Float::sqrt(n as f64);
    let table: Vec<Complex64> = (0..n).map(|k| root_of_unity(k as i128, n)).collect();
    (0..n)
        .map(|f| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                acc += v * table[((f * t as u64) % n) as usize];
            }
            acc * scale
        })
        .collect()
}

/// Inverse of [`exact_dft`]: `x_t = n^{-1/2} Σ_f x̂_f ω^{-ft}`.
pub fn exact_idft(spectrum: &[Complex64]) -> Vec<Complex64> {
    let n = spectrum.len() as u64;
    if n == 0 {
        return Vec::new();
    }
    let scale = 1.0 / Float::sqrt(n as f64);
    let table: Vec<Complex64> = (0..n).map(|k| root_of_unity(-(k as i128), n)).collect();
    (0..n)
        .map(|t| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (f, v) in spectrum.iter().enumerate() {
                acc += v * table[((f as u64 * t) % n) as usize];
            }
            acc * scale
        })
        .collect()
}

/// Indices of the `k` largest magnitudes; ties go to the lower index.
pub fn head_indices(spectrum: &[Complex64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..spectrum.len()).collect();
    order.sort_by(|&i, &j| {
        spectrum[j]
            .norm()
            .partial_cmp(&spectrum[i].norm())
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    order.truncate(k.min(spectrum.len()));
    order
}

/// `‖x̂_{−k}‖₁`: ℓ1 mass outside the `k` largest coordinates.
pub fn tail_l1(spectrum: &[Complex64], k: usize) -> f64 {
    let head = head_indices(spectrum, k);
    let mut in_head = vec![false; spectrum.len()];
    for i in head {
        in_head[i] = true;
    }
    let mut acc = KahanSum::default();
    for (i, v) in spectrum.iter().enumerate() {
        if !in_head[i] {
            acc.add(v.norm());
        }
    }
    acc.value()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GuaranteeReport {
    pub k: usize,
    /// `‖x̂ − x̂′‖∞`.
    pub linf_error: f64,
    /// `(1/k)·‖x̂_{−k}‖₁`.
    pub linf_bound: f64,
    /// `‖x̂ − x̂′‖₂`.
    pub l2_error: f64,
    /// `(1/√k)·‖x̂_{−k}‖₁`.
    pub l2_bound: f64,
    pub linf_pass: bool,
    pub l2_pass: bool,
}

/// Evaluate both sparse-recovery guarantees of `approx` against the true
/// spectrum. `slack` is an absolute allowance for floating-point error.
pub fn check_guarantee(
    spectrum: &[Complex64],
    approx: &[Complex64],
    k: usize,
    slack: f64,
) -> Result<GuaranteeReport> {
    if spectrum.len() != approx.len() {
        return Err(crate::Error::LengthMismatch {
            expected: spectrum.len(),
            found: approx.len(),
        });
    }
    if k == 0 {
        return Err(invalid("k must be positive"));
    }
    let tail = tail_l1(spectrum, k);
    let mut linf: f64 = 0.0;
    let mut l2 = KahanSum::default();
    for (a, b) in spectrum.iter().zip(approx) {
        let e = (a - b).norm();
        linf = linf.max(e);
        l2.add(e * e);
    }
    let l2_error = Float::sqrt(l2.value());
    let linf_bound = tail / k as f64;
    let l2_bound = tail / Float::sqrt(k as f64);
    Ok(GuaranteeReport {
        k,
        linf_error: linf,
        linf_bound,
        l2_error,
        l2_bound,
        linf_pass: linf <= linf_bound + slack,
        l2_pass: l2_error <= l2_bound + slack,
    })
}

/// The "find all versus miss all" family: `|A| = ⌈γk⌉` coordinates at twice
/// the ℓ∞/ℓ1 bound, and all remaining coordinates of equal magnitude.
#[derive(Clone, Debug)]
pub struct AdversarialFamily {
    pub spectrum: Vec<Complex64>,
    pub signal: Vec<Complex64>,
    /// The "interesting" coordinates `A`.
    pub heavy: Vec<usize>,
    /// `B`, the light part of the head.
    pub light_head: Vec<usize>,
    /// `‖x̂_{−k}‖₁` (equals `‖x̂_C‖₁`).
    pub tail_l1: f64,
    /// Whether `‖0 − x̂‖₂² ≤ (5γ/k)‖x̂_{−k}‖₁²`, i.e. the zero vector is a
    /// valid ℓ2/ℓ1 answer. Holds when `⌈γk⌉ = γk`.
    pub zero_vector_l2_valid: bool,
}

/// Build the separation family. Coordinates are laid out deterministically:
/// `A` and `B` are spread with stride `n/k` so they never cluster.
pub fn adversarial_family(
    n: usize,
    k: usize,
    gamma: f64,
    tail_scale: f64,
) -> Result<AdversarialFamily> {
    if !(gamma > 0.0 && gamma <= 0.2) {
        return Err(invalid("gamma must lie in (0, 1/5]"));
    }
    if k == 0 || k >= n {
        return Err(invalid("need 0 < k < n"));
    }
    if k as f64 > gamma * n as f64 / (2.0 * gamma + 1.0) {
        return Err(invalid("k must be at most γn/(2γ+1)"));
    }
    let heavy_count = Float::ceil(gamma * k as f64 - 1e-12) as usize;
    let stride = n / k;
    let head: Vec<usize> = (0..k).map(|i| i * stride + stride / 2).collect();
    let heavy = head[..heavy_count].to_vec();
    let light_head = head[heavy_count..].to_vec();
    let flat = tail_scale / (n - k) as f64;
    let heavy_mag = 2.0 / k as f64 * tail_scale;
    let mut spectrum = vec![Complex64::new(flat, 0.0); n];
    for &i in &heavy {
        spectrum[i] = Complex64::new(heavy_mag, 0.0);
    }
    let mut energy = KahanSum::default();
    for v in &spectrum {
        energy.add(v.norm_sqr());
    }
    let tail = tail_l1(&spectrum, k);
    let zero_vector_l2_valid = energy.value() <= 5.0 * gamma / k as f64 * tail * tail;
    let signal = exact_idft(&spectrum);
    Ok(AdversarialFamily {
        spectrum,
        signal,
        heavy,
        light_head,
        tail_l1: tail,
        zero_vector_l2_valid,
    })
}

/// `max_{b ∈ Z_n^*} |Σ_{x∈S} e^{2πi·b·g(x)/n}|` and the maximizing `b`
/// (smallest on ties). `poly` holds the integer coefficients of `g`, lowest
/// degree first.
pub fn max_exponential_sum(set: &[u64], poly: &[i64], n: u64) -> Result<(f64, u64)> {
    if set.is_empty() || n < 2 {
        return Err(invalid("need a non-empty set and n >= 2"));
    }
    let values: Vec<u64> = set.iter().map(|&x| eval_poly_mod(poly, x, n)).collect();
    let table: Vec<Complex64> = (0..n).map(|k| root_of_unity(k as i128, n)).collect();
    let mut best = (f64::NEG_INFINITY, 0);
    for b in 1..n {
        if crate::number_theory::gcd(b, n) != 1 {
            continue;
        }
        let (mut re, mut im) = (KahanSum::default(), KahanSum::default());
        for &v in &values {
            let z = table[((b as u128 * v as u128) % n as u128) as usize];
            re.add(z.re);
            im.add(z.im);
        }
        let mag = Complex64::new(re.value(), im.value()).norm();
        if mag > best.0 + 1e-12 {
            best = (mag, b);
        }
    }
    Ok(best)
}

pub(crate) fn eval_poly_mod(poly: &[i64], x: u64, n: u64) -> u64 {
    let m = n as i128;
    let mut acc: i128 = 0;
    for &c in poly.iter().rev() {
        acc = (acc * x as i128 + c as i128).rem_euclid(m);
    }
    acc as u64
}
