//! Small iterative radix-2 FFT used for the `B`-point bucket transform.

use num_complex::Complex64;

use crate::math::{unit, TAU};

/// Sign of the exponent in `Σ_t v_t e^{±2πi·ft/len}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

/// Unnormalized in-place transform. `buf.len()` must be a power of two.
pub fn fft_in_place(buf: &mut [Complex64], sign: Sign) {
    let len = buf.len();
    assert!(len.is_power_of_two(), "fft length must be a power of two");
    if len <= 1 {
        return;
    }
    let bits = len.trailing_zeros();
    for i in 0..len {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let dir = match sign {
        Sign::Positive => 1.0,
        Sign::Negative => -1.0,
    };
    let mut span = 2;
    while span <= len {
        let step = unit(dir * TAU / span as f64);
        for chunk in buf.chunks_mut(span) {
            let mut w = Complex64::new(1.0, 0.0);
            let (lo, hi) = chunk.split_at_mut(span / 2);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let t = *b * w;
                *b = *a - t;
                *a += t;
                w *= step;
            }
        }
        span <<= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn matches_direct_sum() {
        for len in [1usize, 2, 4, 8, 32] {
            let v: Vec<Complex64> = (0..len)
                .map(|i| Complex64::new((i * i) as f64 * 0.1, 1.0 - i as f64))
                .collect();
            for (sign, dir) in [(Sign::Positive, 1.0), (Sign::Negative, -1.0)] {
                let mut buf = v.clone();
                fft_in_place(&mut buf, sign);
                for f in 0..len {
                    let direct: Complex64 = v
                        .iter()
                        .enumerate()
                        .map(|(t, x)| x * unit(dir * TAU * ((f * t) % len) as f64 / len as f64))
                        .sum();
                    assert!((buf[f] - direct).norm() < 1e-9);
                }
            }
        }
    }
}
