//! Flat window filters: a compactly supported real time window `G` whose
//! frequency response `Ĝ` is ≈1 across a bucket, small outside it, and decays
//! polynomially with distance.
//!
//! Construction: the `F`-fold self-convolution of a time boxcar (frequency
//! response `D_w^F`, non-negative because `F` is even) multiplied pointwise
//! by the Dirichlet kernel of a frequency boxcar of half-width `≈ 5n/(8B)`.
//! The product keeps the compact support of the first factor while its
//! spectrum is the frequency boxcar smoothed by `D_w^F`: flat in the bucket
//! core and decaying like `|f|^{-F}` past the transition band.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::hashing::{is_power_of_two, CenteredResidue};
use crate::math::{Float, TAU};

/// Support constant: certified windows are at most `SUPPORT_CONSTANT·F·B` long.
pub const SUPPORT_CONSTANT: f64 = 8.0;
const WIDEN_FACTOR: f64 = 1.25;
const WIDEN_RETRIES: usize = 8;
/// Response values this close to zero from below are rounding noise.
const NEGATIVE_NOISE: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct FlatFilter {
    n: u64,
    buckets: u64,
    sharpness: u32,
    epsilon: f64,
    /// Window values for `t ∈ [-half_support, half_support]`.
    half_support: usize,
    window: Vec<f64>,
    /// `Ĝ_m` for residues `m`, indexed by `m mod n`.
    response: Vec<f64>,
}

impl FlatFilter {
    pub fn n(&self) -> u64 {
        self.n
    }
    pub fn buckets(&self) -> u64 {
        self.buckets
    }
    pub fn sharpness(&self) -> u32 {
        self.sharpness
    }
    /// `ε = (1/4)^{F−1}`.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn half_support(&self) -> usize {
        self.half_support
    }
    /// Number of time samples the window touches.
    pub fn support_len(&self) -> usize {
        2 * self.half_support + 1
    }
    /// `(t, G_t)` over the support, ascending `t`.
    pub fn window(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let h = self.half_support as i64;
        self.window
            .iter()
            .enumerate()
            .map(move |(i, &v)| (i as i64 - h, v))
    }
    pub fn window_values(&self) -> &[f64] {
        &self.window
    }
    pub fn response(&self) -> &[f64] {
        &self.response
    }

    /// `Ĝ` at a centered offset.
    #[inline]
    pub fn value(&self, offset: CenteredResidue) -> f64 {
        self.response[offset.index(self.n)]
    }

    /// `Ĝ` at any integer offset (reduced modulo `n`).
    #[inline]
    pub fn value_at(&self, offset: i64) -> f64 {
        self.response[offset.rem_euclid(self.n as i64) as usize]
    }

    /// Rebuild a filter from its time window; the response is recomputed
    /// exactly from the window.
    pub fn from_window(n: u64, buckets: u64, sharpness: u32, window: Vec<f64>) -> Result<Self> {
        check_shape(n, buckets, sharpness)?;
        if window.len().is_multiple_of(2) || window.len() as u64 > n + 1 {
            return Err(invalid("window must have odd length at most n + 1"));
        }
        let half_support = window.len() / 2;
        let response = response_of(n, half_support, &window);
        Ok(Self {
            n,
            buckets,
            sharpness,
            epsilon: epsilon_for(sharpness),
            half_support,
            window,
            response,
        })
    }

    /// Wrap an arbitrary symmetric response table. The window is its exact
    /// inverse transform, truncated to the span of entries above `1e-12`
    /// of the peak, and the response is recomputed from that window.
    pub fn from_response(n: u64, buckets: u64, sharpness: u32, response: &[f64]) -> Result<Self> {
        check_shape(n, buckets, sharpness)?;
        if response.len() as u64 != n {
            return Err(Error::LengthMismatch {
                expected: n as usize,
                found: response.len(),
            });
        }
        let nn = n as usize;
        let cos = cos_table(n);
        let full: Vec<f64> = (0..nn)
            .map(|t| {
                (0..nn)
                    .map(|m| response[m] * cos[(t * m) % nn])
                    .sum::<f64>()
                    / n as f64
            })
            .collect();
        let peak = full.iter().fold(0.0f64, |a, v| a.max(Float::abs(*v)));
        let half = (0..=nn / 2)
            .filter(|&t| {
                Float::abs(full[t]) > 1e-12 * peak || Float::abs(full[(nn - t) % nn]) > 1e-12 * peak
            })
            .max()
            .unwrap_or(0);
        let mut window: Vec<f64> = (-(half as i64)..=half as i64)
            .map(|t| full[t.rem_euclid(n as i64) as usize])
            .collect();
        if half == nn / 2 {
            // t = ±n/2 name the same sample; split it across both ends.
            let last = window.len() - 1;
            window[0] /= 2.0;
            window[last] /= 2.0;
        }
        Self::from_window(n, buckets, sharpness, window)
    }
}

fn check_shape(n: u64, buckets: u64, sharpness: u32) -> Result<()> {
    if !is_power_of_two(n) || !is_power_of_two(buckets) || buckets >= n {
        return Err(invalid("n and B must be powers of two with B < n"));
    }
    if sharpness < 2 || sharpness % 2 == 1 {
        return Err(invalid("F must be an even integer >= 2"));
    }
    Ok(())
}

pub fn epsilon_for(sharpness: u32) -> f64 {
    Float::powi(0.25, sharpness as i32 - 1)
}

fn cos_table(n: u64) -> Vec<f64> {
    (0..n)
        .map(|k| Float::cos(TAU * k as f64 / n as f64))
        .collect()
}

/// `Ĝ_m = Σ_t G_t ω^{−tm}` for a real symmetric window (so only cosines).
fn response_of(n: u64, half_support: usize, window: &[f64]) -> Vec<f64> {
    let cos = cos_table(n);
    let h = half_support as i64;
    let mut response = vec![0.0; n as usize];
    // Fill m ≤ n/2 and mirror so the table is exactly symmetric.
    for m in 0..=n / 2 {
        let mut acc = crate::math::KahanSum::default();
        for (i, &g) in window.iter().enumerate() {
            let t = i as i64 - h;
            acc.add(g * cos[((t * m as i64).rem_euclid(n as i64)) as usize]);
        }
        let mut v = acc.value();
        if v < 0.0 && v > -NEGATIVE_NOISE {
            v = 0.0;
        }
        response[m as usize] = v;
        response[((n - m) % n) as usize] = v;
    }
    response
}

/// Window for a given time-boxcar half-width `hb` and frequency-box half-width `c`.
fn synthesize(n: u64, sharpness: u32, hb: usize, c: u64) -> Vec<f64> {
    // F-fold convolution of ones on [-hb, hb].
    let mut poly = vec![1.0f64];
    let boxcar = vec![1.0f64; 2 * hb + 1];
    for _ in 0..sharpness {
        let mut next = vec![0.0; poly.len() + boxcar.len() - 1];
        for (i, a) in poly.iter().enumerate() {
            for (j, b) in boxcar.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        poly = next;
    }
    let half = poly.len() / 2;
    let cos = cos_table(n);
    let window: Vec<f64> = poly
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let t = i as i64 - half as i64;
            let dirichlet: f64 = 1.0
                + 2.0
                    * (1..=c as i64)
                        .map(|m| cos[((t * m).rem_euclid(n as i64)) as usize])
                        .sum::<f64>();
            p * dirichlet
        })
        .collect();
    window
}

/// Construct a certified `(n, B, F)` flat filter, widening the internal
/// boxcar until every property holds.
pub fn build_filter(n: u64, buckets: u64, sharpness: u32) -> Result<FlatFilter> {
    check_shape(n, buckets, sharpness)?;
    let width = n / buckets;
    let core = width / 2;
    // Frequency box edge at 5/8 of the bucket width, inside the transition
    // band [n/2B, n/B); closer to the core lowers the mean of Ĝ.
    let c0 = (core + width.div_ceil(8)).min(width - 1).max(core);
    // Preferred box edge first, then toward the core, then outward.
    let edges: Vec<u64> = (core..=c0).rev().chain(c0 + 1..width).collect();
    // Start at hb = B, or the widest boxcar that fits when n is tight.
    let fit = (n as usize - 1) / (2 * sharpness as usize);
    let mut hb = (buckets as usize).min(fit).max(1);
    for _ in 0..=WIDEN_RETRIES {
        let support = 2 * sharpness as usize * hb + 1;
        if support as u64 > n {
            break;
        }
        for &c in &edges {
            let window = synthesize(n, sharpness, hb, c);
            let mut filter = FlatFilter::from_window(n, buckets, sharpness, window)?;
            let peak = filter.response.iter().cloned().fold(0.0, f64::max);
            if peak > 0.0 {
                filter.window.iter_mut().for_each(|v| *v /= peak);
                filter.response.iter_mut().for_each(|v| *v /= peak);
            }
            if certify_filter(&filter).passed() {
                return Ok(filter);
            }
        }
        hb = Float::ceil(hb as f64 * WIDEN_FACTOR) as usize;
    }
    Err(Error::FilterUncertified {
        n,
        buckets,
        sharpness,
    })
}

/// Per-property outcome of an exhaustive filter check. Margins are
/// `bound − value` minimized over the frequencies the property covers, so a
/// negative margin pinpoints a violation.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterCertificate {
    /// Property (1): `0 ≤ Ĝ ≤ 1`.
    pub range_ok: bool,
    pub range_margin: f64,
    /// Property (2): `Ĝ_f ≥ 1 − ε` for `|f| ≤ n/(2B)`.
    pub core_ok: bool,
    pub core_margin: f64,
    /// Property (3): `Ĝ_f ≤ ε (n/(B|f|))^{F−1}` for `|f| ≥ n/B`.
    pub decay_ok: bool,
    pub decay_margin: f64,
    /// Symmetry `Ĝ_f = Ĝ_{−f}`.
    pub symmetric: bool,
    /// Support length `≤ SUPPORT_CONSTANT·F·B`.
    pub support_ok: bool,
    /// Achieved `support_len / (F·B)`.
    pub support_constant: f64,
}

impl FilterCertificate {
    pub fn passed(&self) -> bool {
        self.range_ok && self.core_ok && self.decay_ok && self.symmetric && self.support_ok
    }
}

pub fn certify_filter(filter: &FlatFilter) -> FilterCertificate {
    let n = filter.n as i64;
    let b = filter.buckets as f64;
    let eps = filter.epsilon;
    let power = filter.sharpness as i32 - 1;
    let core = n / (2 * filter.buckets as i64);
    let width = n / filter.buckets as i64;
    let mut range_margin = f64::INFINITY;
    let mut core_margin = f64::INFINITY;
    let mut decay_margin = f64::INFINITY;
    let mut symmetric = true;
    for f in -n / 2..n / 2 {
        let v = filter.value_at(f);
        range_margin = range_margin.min(v).min(1.0 - v);
        if filter.value_at(-f) != v && Float::abs(filter.value_at(-f) - v) > 1e-15 {
            symmetric = false;
        }
        let af = f.abs();
        if af <= core {
            core_margin = core_margin.min(v - (1.0 - eps));
        }
        if af >= width {
            let bound = eps * Float::powi(n as f64 / (b * af as f64), power);
            decay_margin = decay_margin.min(bound - v);
        }
    }
    let support_constant = filter.support_len() as f64 / (filter.sharpness as f64 * b);
    FilterCertificate {
        range_ok: range_margin >= 0.0,
        range_margin,
        core_ok: core_margin >= 0.0,
        core_margin,
        decay_ok: decay_margin >= 0.0,
        decay_margin,
        symmetric,
        support_ok: support_constant <= SUPPORT_CONSTANT,
        support_constant,
    }
}
