//! Scale-safe logarithms and mantissa/exponent splits for big integers.
//!
//! Canonical-height work routinely meets integers far beyond the `f64`
//! range; everything here reduces such values to `m * 2^e` with `m` a
//! double of ordinary size.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

/// Split `|x|` as `m * 2^e` with `m` in `[0.5, 1)`. Zero maps to `(0.0, 0)`.
pub fn split_bigint(x: &BigInt) -> (f64, i64) {
    if x.is_zero() {
        return (0.0, 0);
    }
    let bits = x.bits() as i64;
    // keep 64 significant bits, then let the f64 conversion round
    let shift = bits - 64;
    let m = if shift > 0 {
        (x.magnitude() >> (shift as u64)).to_f64().unwrap_or(f64::MAX)
    } else {
        x.magnitude().to_f64().unwrap_or(f64::MAX)
    };
    let e = shift.max(0);
    // normalize into [0.5, 1)
    let (frac, exp2) = frexp(m);
    (frac, e + exp2)
}

/// `ln |x|` for a nonzero big integer.
pub fn ln_abs_bigint(x: &BigInt) -> f64 {
    debug_assert!(!x.is_zero());
    if x.bits() <= 52 {
        // exactly representable: take the correctly rounded library ln
        return x.to_f64().unwrap().abs().ln();
    }
    let (m, e) = split_bigint(x);
    m.ln() + (e as f64) * std::f64::consts::LN_2
}

/// `ln |x|` for a nonzero rational.
pub fn ln_abs_bigrat(x: &BigRational) -> f64 {
    debug_assert!(!x.is_zero());
    ln_abs_bigint(x.numer()) - ln_abs_bigint(x.denom())
}

/// `log2 |x|` for a nonzero rational, good to a few ulps.
pub fn log2_abs_bigrat(x: &BigRational) -> f64 {
    ln_abs_bigrat(x) / std::f64::consts::LN_2
}

/// Approximate `a / b` for big integers whose quotient fits in `f64`.
pub fn ratio_f64(a: &BigInt, b: &BigInt) -> f64 {
    if a.is_zero() {
        return 0.0;
    }
    let (ma, ea) = split_bigint(a);
    let (mb, eb) = split_bigint(b);
    let sign = if (a.is_negative()) ^ (b.is_negative()) { -1.0 } else { 1.0 };
    sign * (ma / mb) * exp2_i64(ea - eb)
}

/// Rational to double through the mantissa/exponent split; saturates instead
/// of overflowing, flushes to zero on extreme underflow.
pub fn bigrat_to_f64(x: &BigRational) -> f64 {
    bigrat_to_f64_exp2(x, 0)
}

/// `x * 2^exp_shift` as a double. The power-of-two shift is applied on the
/// exponent, so it never costs accuracy.
pub fn bigrat_to_f64_exp2(x: &BigRational, exp_shift: i64) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let sign = if x.is_negative() { -1.0 } else { 1.0 };
    let (mn, en) = split_bigint(x.numer());
    let (md, ed) = split_bigint(x.denom());
    sign * (mn / md) * exp2_i64(en - ed + exp_shift)
}

/// `2^e` with saturation far outside the double range.
pub fn exp2_i64(e: i64) -> f64 {
    if e > 1100 {
        f64::INFINITY
    } else if e < -1100 {
        0.0
    } else {
        (e as f64).exp2()
    }
}

fn frexp(x: f64) -> (f64, i64) {
    if x == 0.0 || !x.is_finite() {
        return (x, 0);
    }
    let bits = x.to_bits();
    let exp_field = ((bits >> 52) & 0x7ff) as i64;
    if exp_field == 0 {
        // subnormal: renormalize
        let scaled = x * (2f64).powi(64);
        let (m, e) = frexp(scaled);
        return (m, e - 64);
    }
    let e = exp_field - 1022;
    let m = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1022u64 << 52));
    (m, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_traits::One;

    #[test]
    fn ln_of_small_ints_matches_std() {
        for v in [1i64, 2, 3, 41, 10_000, 1 << 40] {
            let b = BigInt::from(v);
            assert!((ln_abs_bigint(&b) - (v as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn ln_of_power_of_two_is_exact_multiple() {
        let big: BigInt = BigInt::one() << 5000;
        let expect = 5000.0 * std::f64::consts::LN_2;
        assert!((ln_abs_bigint(&big) - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn ratio_handles_huge_operands() {
        let a: BigInt = (BigInt::one() << 4000) * 3;
        let b: BigInt = BigInt::one() << 4000;
        assert!((ratio_f64(&a, &b) - 3.0).abs() < 1e-12);
        assert_eq!(ratio_f64(&-&a, &b), -ratio_f64(&a, &b));
    }

    #[test]
    fn bigrat_conversion_round_trips_moderate_values() {
        let x = BigRational::new(BigInt::from(-355), BigInt::from(113));
        assert!((bigrat_to_f64(&x) + 355.0 / 113.0).abs() < 1e-14);
    }
}
