//! Deterministic number theory over `Z_p`: trial-division primality, sieve
//! factorization of `p − 1`, modular exponentiation and primitive roots.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::Float;

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn mod_pow(base: u64, mut exp: u64, modulus: u64) -> u64 {
    if modulus == 1 {
        return 0;
    }
    let m = modulus as u128;
    let mut acc: u128 = 1;
    let mut b = base as u128 % m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        exp >>= 1;
    }
    acc as u64
}

fn isqrt(v: u64) -> u64 {
    let mut r = Float::sqrt(v as f64) as u64;
    while r * r > v {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= v {
        r += 1;
    }
    r
}

/// Trial division.
pub fn is_prime(v: u64) -> bool {
    if v < 2 {
        return false;
    }
    if v.is_multiple_of(2) {
        return v == 2;
    }
    let mut d = 3;
    while d * d <= v {
        if v.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Primes `≤ limit` by the sieve of Eratosthenes.
pub fn sieve(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let mut composite = vec![false; limit as usize + 1];
    let mut primes = Vec::new();
    for i in 2..=limit as usize {
        if !composite[i] {
            primes.push(i as u64);
            let mut j = i * i;
            while j <= limit as usize {
                composite[j] = true;
                j += i;
            }
        }
    }
    primes
}

/// A prime field with the factorization of its multiplicative group order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeField {
    p: u64,
    factors: Vec<(u64, u32)>,
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self> {
        if p < 3 || !is_prime(p) {
            return Err(Error::NumberTheory(format!("{p} is not an odd prime")));
        }
        Ok(Self {
            p,
            factors: factor_pminus1(p),
        })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    /// Whether `z` generates `Z_p^*`.
    pub fn is_generator(&self, z: u64) -> bool {
        let z = z % self.p;
        z != 0
            && self
                .factors
                .iter()
                .all(|&(q, _)| mod_pow(z, (self.p - 1) / q, self.p) != 1)
    }
}

/// Factor `p − 1` by dividing out every sieve prime below `√(p−1)`; whatever
/// cofactor survives is itself prime.
pub fn factor_pminus1(p: u64) -> Vec<(u64, u32)> {
    let mut rest = p - 1;
    let mut out = Vec::new();
    for q in sieve(isqrt(p - 1)) {
        let mut e = 0;
        while rest.is_multiple_of(q) {
            rest /= q;
            e += 1;
        }
        if e > 0 {
            out.push((q, e));
        }
    }
    if rest != 1 {
        debug_assert!(is_prime(rest));
        out.push((rest, 1));
    }
    out
}

/// Search limit for the smallest generator. Least primitive roots grow far
/// slower than `p^{1/4}` in practice; the cap only guards against misuse.
fn generator_cap(p: u64) -> u64 {
    let quarter = Float::ceil(Float::powf(p as f64, 0.25)) as u64;
    (16 * quarter).max(256).min(p - 1)
}

/// Smallest `z ≥ 2` generating `Z_p^*` (`p = 3` gives 2).
pub fn find_generator(field: &PrimeField) -> Result<u64> {
    let cap = generator_cap(field.p());
    (2..=cap).find(|&z| field.is_generator(z)).ok_or_else(|| {
        Error::NumberTheory(format!("no generator of Z_{}^* below {cap}", field.p()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(z: u64, p: u64) -> u64 {
        let mut acc = z % p;
        let mut k = 1;
        while acc != 1 {
            acc = acc * z % p;
            k += 1;
        }
        k
    }

    #[test]
    fn factor_examples() {
        assert_eq!(factor_pminus1(13), vec![(2, 2), (3, 1)]);
        assert_eq!(factor_pminus1(7), vec![(2, 1), (3, 1)]);
        assert_eq!(factor_pminus1(23), vec![(2, 1), (11, 1)]);
    }

    #[test]
    fn generator_examples() {
        assert_eq!(find_generator(&PrimeField::new(7).unwrap()).unwrap(), 3);
        assert_eq!(find_generator(&PrimeField::new(3).unwrap()).unwrap(), 2);
        assert_eq!(find_generator(&PrimeField::new(13).unwrap()).unwrap(), 2);
    }

    #[test]
    fn generator_has_full_order_by_brute_force() {
        for p in sieve(2000).into_iter().filter(|&p| p > 2) {
            let g = find_generator(&PrimeField::new(p).unwrap()).unwrap();
            assert_eq!(order(g, p), p - 1, "p={p}");
            assert!((2..g).all(|z| order(z, p) != p - 1), "p={p} not smallest");
        }
    }

    #[test]
    fn rejects_non_primes() {
        assert!(PrimeField::new(15).is_err());
        assert!(PrimeField::new(2).is_err());
        assert!(!is_prime(1) && is_prime(2) && !is_prime(91));
    }

    #[test]
    fn factorization_reconstructs() {
        for p in sieve(5000).into_iter().filter(|&p| p > 2) {
            let prod: u64 = factor_pminus1(p).iter().map(|&(q, e)| q.pow(e)).product();
            assert_eq!(prod, p - 1);
        }
    }
}
