//! Fixed-point polynomial arithmetic for badly conditioned monomial expansions.
//!
//! The monomial coefficients of a recentred binomial series grow like
//! `2^n_max` and alternate in sign, so summing them in `f64` cancels away all
//! significant digits. Coefficients here are big integers scaled by
//! `2^FRACTION_BITS`; evaluation stays exact up to one rounding per step.

use num_bigint::BigInt;
use num_traits::{Float, One, Signed, ToPrimitive, Zero};

const FRACTION_BITS: u32 = 640;

fn one() -> BigInt {
    BigInt::one() << FRACTION_BITS
}

/// Exact fixed-point image of an `f64` (truncated below `2^-640`).
pub(crate) fn fixed_from_f64(v: f64) -> BigInt {
    assert!(v.is_finite(), "cannot convert non-finite value {v}");
    if v == 0.0 {
        return BigInt::zero();
    }
    let (mantissa, exponent, sign) = Float::integer_decode(v);
    let m = BigInt::from(mantissa);
    let shift = exponent as i64 + FRACTION_BITS as i64;
    let mag = if shift >= 0 {
        m << shift as u64
    } else {
        m >> (-shift) as u64
    };
    if sign < 0 {
        -mag
    } else {
        mag
    }
}

pub(crate) fn fixed_to_f64(v: &BigInt) -> f64 {
    let bits = v.bits();
    if bits > 900 {
        let drop = bits - 900;
        let head = (v >> drop).to_f64().unwrap_or(f64::NAN);
        head * 2f64.powi(drop as i32 - FRACTION_BITS as i32)
    } else {
        v.to_f64().unwrap_or(f64::NAN) * 2f64.powi(-(FRACTION_BITS as i32))
    }
}

fn mul(a: &BigInt, b: &BigInt) -> BigInt {
    (a * b) >> FRACTION_BITS
}

/// Polynomial `sum_k c_k y^k` with fixed-point coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisePolynomial {
    coeffs: Vec<BigInt>,
}

impl PrecisePolynomial {
    /// Monomial expansion of the recentred binomial series
    /// `sum_{n <= n_max} binom(alpha, n) (y - 1)^n`.
    pub fn recentred_binomial(alpha: f64, n_max: usize) -> Self {
        let alpha_fixed = fixed_from_f64(alpha);
        let mut coeffs = vec![BigInt::zero(); n_max + 1];
        // a_n = binom(alpha, n), built by a_n = a_{n-1} (alpha - n + 1) / n.
        let mut a = one();
        // Row n of Pascal's triangle.
        let mut row: Vec<BigInt> = vec![BigInt::one()];
        for n in 0..=n_max {
            if n > 0 {
                let factor = &alpha_fixed - (BigInt::from(n - 1) << FRACTION_BITS);
                a = mul(&a, &factor) / BigInt::from(n);
                let mut next = Vec::with_capacity(n + 1);
                next.push(BigInt::one());
                for k in 1..n {
                    next.push(&row[k - 1] + &row[k]);
                }
                next.push(BigInt::one());
                row = next;
            }
            for (k, binom) in row.iter().enumerate() {
                let term = &a * binom;
                if (n - k) % 2 == 0 {
                    coeffs[k] += term;
                } else {
                    coeffs[k] -= term;
                }
            }
        }
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Coefficients rounded to `f64`.
    pub fn coefficients(&self) -> Vec<f64> {
        self.coeffs.iter().map(fixed_to_f64).collect()
    }

    /// `sum_k |c_k|`, a bound for `|p(y)|` on `[0, 1]`.
    pub fn abs_sum(&self) -> f64 {
        let s: BigInt = self.coeffs.iter().map(|c| c.abs()).sum();
        fixed_to_f64(&s)
    }

    /// Horner evaluation at `y` in fixed point, rounded once to `f64`.
    pub fn evaluate(&self, y: f64) -> f64 {
        let y = fixed_from_f64(y);
        let mut acc = BigInt::zero();
        for c in self.coeffs.iter().rev() {
            acc = mul(&acc, &y) + c;
        }
        fixed_to_f64(&acc)
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * BigInt::from(k))
            .collect::<Vec<_>>();
        Self {
            coeffs: if coeffs.is_empty() {
                vec![BigInt::zero()]
            } else {
                coeffs
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_round_trip() {
        for v in [0.0, 1.0, -0.4, 1e-30, 123456.789, -3.5e20] {
            assert_eq!(fixed_to_f64(&fixed_from_f64(v)), v);
        }
    }

    #[test]
    fn recentred_series_is_one_at_centre() {
        let p = PrecisePolynomial::recentred_binomial(-0.25, 60);
        assert!((p.evaluate(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn low_order_coefficients_match_hand_expansion() {
        // n_max = 2: 1 + a (y - 1) + a(a-1)/2 (y - 1)^2
        let a = -0.5;
        let p = PrecisePolynomial::recentred_binomial(a, 2);
        let h = a * (a - 1.0) / 2.0;
        let expected = [1.0 - a + h, a - 2.0 * h, h];
        for (c, e) in p.coefficients().iter().zip(expected) {
            assert!((c - e).abs() < 1e-15);
        }
    }
}
