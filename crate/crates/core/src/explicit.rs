//! Strongly explicit incoherent matrices from rows of the `p×p` DFT.
//!
//! Taking the rows indexed by a multiset `R` and scaling by `|R|^{-1/2}`
//! gives unit columns whose inner products are `|Σ_{r∈R} ω^{rΔ}|/|R|` with
//! `Δ` the column difference, so incoherence is an exponential sum over `R`.
//! Three choices of `R` are provided: quadratic residues, values of a
//! polynomial on consecutive points, and a multiplicative subgroup.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::math::{root_of_unity, Float, KahanSum};
use crate::number_theory::{find_generator, mod_pow, PrimeField};
use crate::oracle::eval_poly_mod;
use crate::subsample::{DftMatrix, RowSelection};

/// `ε` used when reporting the polynomial envelope.
pub const DEFAULT_ENVELOPE_EPS: f64 = 0.05;

/// How a selection was built.
#[derive(Clone, Debug, PartialEq)]
pub enum Construction {
    QuadraticResidues,
    Polynomial {
        degree: usize,
        /// Integer coefficients, lowest degree first.
        coeffs: Vec<i64>,
        /// `m^ε(1/m + p/m^d)^{2^{1−d}}` with constant 1.
        envelope: f64,
    },
    Subgroup {
        order: u64,
        generator: u64,
    },
}

/// A row multiset of the `p×p` DFT with its incoherence certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitSelection {
    pub p: u64,
    /// Row indices in `[0, p)`, in construction order; may repeat.
    pub rows: Vec<u64>,
    /// `|rows|^{-1/2}`, the factor making the columns unit norm.
    pub scale: f64,
    pub certified_bound: f64,
    pub construction: Construction,
}

impl ExplicitSelection {
    fn new(p: u64, rows: Vec<u64>, certified_bound: f64, construction: Construction) -> Self {
        let scale = 1.0 / Float::sqrt(rows.len() as f64);
        Self {
            p,
            rows,
            scale,
            certified_bound,
            construction,
        }
    }

    /// Sorted copy of the rows.
    pub fn sorted_rows(&self) -> Vec<u64> {
        let mut r = self.rows.clone();
        r.sort_unstable();
        r
    }

    /// The same rows as a [`RowSelection`] of the unitary DFT, for the
    /// pairwise brute-force check.
    pub fn to_row_selection(&self) -> Result<(DftMatrix, RowSelection)> {
        let dft = DftMatrix::new(self.p as usize);
        let sel = RowSelection::new(&dft, self.rows.iter().map(|&r| r as usize).collect())?;
        Ok((dft, sel))
    }

    /// Incoherence computed from column differences.
    pub fn incoherence(&self) -> DifferenceReport {
        dft_incoherence(&self.rows, self.p)
    }
}

/// `Σ_{r∈rows} e^{2πi·r·t/p}` with compensated summation; phases are
/// reduced mod `p` before any trig call.
pub fn exponential_sum(rows: &[u64], t: u64, p: u64) -> Complex64 {
    let (mut re, mut im) = (KahanSum::default(), KahanSum::default());
    for &r in rows {
        let z = root_of_unity(((r as u128 * t as u128) % p as u128) as i128, p);
        re.add(z.re);
        im.add(z.im);
    }
    Complex64::new(re.value(), im.value())
}

/// Worst column difference of a DFT row multiset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DifferenceReport {
    /// `max_{Δ≠0} |Σ_r ω^{rΔ}| / |rows|`.
    pub max_inner: f64,
    pub delta: u64,
}

/// Normalized incoherence via all `p − 1` differences, `O(p·|rows|)`.
pub fn dft_incoherence(rows: &[u64], p: u64) -> DifferenceReport {
    let table: Vec<Complex64> = (0..p).map(|k| root_of_unity(k as i128, p)).collect();
    let mut best = DifferenceReport {
        max_inner: 0.0,
        delta: 1,
    };
    for delta in 1..p {
        let (mut re, mut im) = (KahanSum::default(), KahanSum::default());
        for &r in rows {
            let z = table[((r as u128 * delta as u128) % p as u128) as usize];
            re.add(z.re);
            im.add(z.im);
        }
        let v = Complex64::new(re.value(), im.value()).norm() / rows.len() as f64;
        if v > best.max_inner {
            best = DifferenceReport {
                max_inner: v,
                delta,
            };
        }
    }
    best
}

/// Quadratic residues including 0, sorted; `(p+1)/2` rows with bound
/// `(1/2 + √p)/((p+1)/2)`.
pub fn quadratic_residue_rows(p: u64) -> Result<ExplicitSelection> {
    PrimeField::new(p)?;
    let mut seen = alloc::vec![false; p as usize];
    for x in 0..p {
        seen[(x * x % p) as usize] = true;
    }
    let rows: Vec<u64> = (0..p).filter(|&r| seen[r as usize]).collect();
    debug_assert_eq!(rows.len() as u64, p.div_ceil(2));
    let bound = (0.5 + Float::sqrt(p as f64)) / rows.len() as f64;
    Ok(ExplicitSelection::new(
        p,
        rows,
        bound,
        Construction::QuadraticResidues,
    ))
}

/// `m^ε(1/m + p/m^d)^{2^{1−d}}`.
pub fn polynomial_envelope(p: u64, degree: usize, m: usize, eps: f64) -> f64 {
    let m = m as f64;
    let base = 1.0 / m + p as f64 / Float::powi(m, degree as i32);
    Float::powf(m, eps) * Float::powf(base, Float::powi(2.0, 1 - degree as i32))
}

/// Rows `g(x) mod p` for `x = 0..m−1`. `coeffs` (lowest degree first) must
/// have `degree + 1` entries with a leading coefficient not divisible by
/// `p`; `None` means `g(x) = x^degree`. The certificate is the brute-force
/// value; the envelope is carried for reference.
pub fn weyl_polynomial_rows(
    p: u64,
    degree: usize,
    m: usize,
    coeffs: Option<&[i64]>,
) -> Result<ExplicitSelection> {
    PrimeField::new(p)?;
    if degree < 2 {
        return Err(invalid("polynomial degree must be at least 2"));
    }
    if m == 0 || m as u64 > p {
        return Err(invalid(format!("row count m={m} must lie in [1, p={p}]")));
    }
    let coeffs: Vec<i64> = match coeffs {
        Some(c) => c.to_vec(),
        None => {
            let mut c = alloc::vec![0; degree + 1];
            c[degree] = 1;
            c
        }
    };
    if coeffs.len() != degree + 1 {
        return Err(invalid(format!(
            "expected {} coefficients, got {}",
            degree + 1,
            coeffs.len()
        )));
    }
    if coeffs[degree].rem_euclid(p as i64) == 0 {
        return Err(invalid("leading coefficient vanishes mod p"));
    }
    let rows: Vec<u64> = (0..m as u64)
        .map(|x| eval_poly_mod(&coeffs, x, p))
        .collect();
    let measured = dft_incoherence(&rows, p).max_inner;
    let envelope = polynomial_envelope(p, degree, m, DEFAULT_ENVELOPE_EPS);
    Ok(ExplicitSelection::new(
        p,
        rows,
        measured,
        Construction::Polynomial {
            degree,
            coeffs,
            envelope,
        },
    ))
}

/// The order-`d` subgroup `{h^j : j < d}`, `h = g^{(p−1)/d}` for the smallest
/// generator `g`; bound `√p/d`. Requires `d | p − 1` and `d > √p`.
pub fn subgroup_rows(p: u64, order: u64) -> Result<ExplicitSelection> {
    let field = PrimeField::new(p)?;
    if order == 0 || !(p - 1).is_multiple_of(order) {
        return Err(invalid(format!(
            "order {order} does not divide p-1 = {}",
            p - 1
        )));
    }
    if (order as u128) * (order as u128) <= p as u128 {
        return Err(invalid(format!(
            "order {order} must exceed sqrt(p) for a nontrivial bound"
        )));
    }
    let generator = find_generator(&field)?;
    let h = mod_pow(generator, (p - 1) / order, p);
    let mut rows = Vec::with_capacity(order as usize);
    let mut acc = 1u64;
    for _ in 0..order {
        rows.push(acc);
        acc = (acc as u128 * h as u128 % p as u128) as u64;
    }
    if acc != 1 {
        return Err(Error::NumberTheory(format!(
            "{h} does not have order {order} mod {p}"
        )));
    }
    let bound = Float::sqrt(p as f64) / order as f64;
    Ok(ExplicitSelection::new(
        p,
        rows,
        bound,
        Construction::Subgroup { order, generator },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subsample::verify_incoherence;

    #[test]
    fn residues_mod_5() {
        let q = quadratic_residue_rows(5).unwrap();
        assert_eq!(q.rows, alloc::vec![0, 1, 4]);
        let s = exponential_sum(&q.rows, 1, 5).norm();
        let expect = 1.0 + 2.0 * Float::cos(core::f64::consts::TAU / 5.0);
        assert!((s - expect).abs() < 1e-12);
        assert!(s <= 0.5 + Float::sqrt(5.0));
    }

    #[test]
    fn squares_mod_17() {
        let w = weyl_polynomial_rows(17, 2, 8, None).unwrap();
        assert_eq!(w.rows, alloc::vec![0, 1, 4, 9, 16, 8, 2, 15]);
    }

    #[test]
    fn single_row_is_coherent() {
        let w = weyl_polynomial_rows(17, 2, 1, None).unwrap();
        assert!((w.certified_bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn subgroup_of_13() {
        let s = subgroup_rows(13, 6).unwrap();
        assert_eq!(s.rows, alloc::vec![1, 4, 3, 12, 9, 10]);
        assert_eq!(
            s.construction,
            Construction::Subgroup {
                order: 6,
                generator: 2
            }
        );
        assert!((s.certified_bound - Float::sqrt(13.0) / 6.0).abs() < 1e-15);
        let full = subgroup_rows(13, 12).unwrap();
        assert!(full.incoherence().max_inner <= full.certified_bound);
    }

    #[test]
    fn preconditions() {
        assert!(subgroup_rows(7, 2).is_err());
        assert!(subgroup_rows(13, 5).is_err());
        assert!(quadratic_residue_rows(15).is_err());
        assert!(weyl_polynomial_rows(17, 1, 4, None).is_err());
        assert!(weyl_polynomial_rows(17, 2, 18, None).is_err());
        assert!(weyl_polynomial_rows(17, 2, 4, Some(&[0, 0, 17])).is_err());
    }

    #[test]
    fn difference_and_pairwise_checks_agree() {
        let q = quadratic_residue_rows(13).unwrap();
        let (dft, sel) = q.to_row_selection().unwrap();
        let pairwise = verify_incoherence(&sel, &dft).max_inner;
        let diff = q.incoherence().max_inner;
        assert!((pairwise - diff).abs() < 1e-12);
        assert!(diff <= q.certified_bound);
    }
}
