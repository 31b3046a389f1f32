//! Complex double-precision polynomials and scale-safe evaluation.
//!
//! Preperiodic-parameter polynomials reach degrees in the thousands with
//! coefficients far outside the double range, so conversion from exact
//! coefficients rescales the variable by a recorded power of two and Horner
//! evaluation tracks an explicit binary exponent.

use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::poly::PolyQ;
use crate::scale::{bigrat_to_f64_exp2, exp2_i64, log2_abs_bigrat};

#[derive(Clone, Debug, PartialEq)]
pub struct PolyC {
    coeffs: Vec<Complex64>,
}

impl PolyC {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.last().map_or(false, |c| c.norm_sqr() == 0.0) {
            coeffs.pop();
        }
        PolyC { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        PolyC::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    pub fn derivative(&self) -> PolyC {
        if self.coeffs.len() <= 1 {
            return PolyC::new(Vec::new());
        }
        PolyC::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * (k as f64))
                .collect(),
        )
    }

    /// Horner evaluation with an explicit power-of-two exponent, immune to
    /// overflow for any degree. Returns `(mantissa, exp)` with
    /// `p(z) = mantissa * 2^exp` and mantissa of moderate size.
    pub fn eval_scaled(&self, z: Complex64) -> (Complex64, i64) {
        let mut acc = Complex64::zero();
        let mut exp: i64 = 0;
        for c in self.coeffs.iter().rev() {
            let c_log2 = if c.norm_sqr() == 0.0 {
                f64::NEG_INFINITY
            } else {
                0.5 * c.norm_sqr().log2()
            };
            if c_log2 - exp as f64 > 900.0 {
                // incoming coefficient dwarfs the accumulated value: rebase
                acc = acc * z * exp2_i64(exp) + c;
                exp = 0;
            } else {
                acc = acc * z + c * exp2_i64(-exp);
            }
            let m = acc.re.abs().max(acc.im.abs());
            if m > 1e150 {
                acc *= exp2_i64(-500);
                exp += 500;
            } else if m > 0.0 && m < 1e-150 {
                acc *= exp2_i64(500);
                exp -= 500;
            }
        }
        (acc, exp)
    }

    /// `ln |p(z)|`; `-inf` at exact roots.
    pub fn ln_abs(&self, z: Complex64) -> f64 {
        let (m, e) = self.eval_scaled(z);
        m.norm().ln() + (e as f64) * std::f64::consts::LN_2
    }

    /// `ln` of `sum_k |c_k| |z|^k`, the local coefficient scale used as the
    /// denominator of backward-error residuals.
    pub fn ln_l1_scale(&self, z: Complex64) -> f64 {
        let r = z.norm();
        let pabs = PolyC::new(
            self.coeffs
                .iter()
                .map(|c| Complex64::new(c.norm(), 0.0))
                .collect(),
        );
        pabs.ln_abs(Complex64::new(r, 0.0))
    }
}

/// Complex value carried as `m * 2^e`, for orbit computations whose
/// magnitudes leave the double range. Power-of-two renormalization is exact.
#[derive(Clone, Copy, Debug)]
pub struct Sc {
    pub m: Complex64,
    pub e: i64,
}

impl Sc {
    pub fn zero() -> Self {
        Sc { m: Complex64::zero(), e: 0 }
    }

    pub fn from_c(v: Complex64) -> Self {
        Sc { m: v, e: 0 }.normalized()
    }

    pub fn is_zero(&self) -> bool {
        self.m.norm_sqr() == 0.0
    }

    fn normalized(mut self) -> Self {
        let mag = self.m.re.abs().max(self.m.im.abs());
        if mag > 1e150 {
            self.m *= exp2_i64(-500);
            self.e += 500;
        } else if mag > 0.0 && mag < 1e-150 {
            self.m *= exp2_i64(500);
            self.e -= 500;
        }
        self
    }

    pub fn mul(self, rhs: Sc) -> Sc {
        Sc { m: self.m * rhs.m, e: self.e + rhs.e }.normalized()
    }

    pub fn mul_c(self, c: Complex64) -> Sc {
        Sc { m: self.m * c, e: self.e }.normalized()
    }

    pub fn div(self, rhs: Sc) -> Sc {
        Sc { m: self.m / rhs.m, e: self.e - rhs.e }.normalized()
    }

    pub fn add(self, rhs: Sc) -> Sc {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        // rebase the smaller term; far-apart scales collapse to the larger
        let (hi, lo) = if self.e >= rhs.e { (self, rhs) } else { (rhs, self) };
        let shift = lo.e - hi.e;
        if shift < -2000 {
            return hi;
        }
        Sc { m: hi.m + lo.m * exp2_i64(shift), e: hi.e }.normalized()
    }

    pub fn sub(self, rhs: Sc) -> Sc {
        self.add(Sc { m: -rhs.m, e: rhs.e })
    }

    /// `ln` of the modulus; `-inf` for zero.
    pub fn ln_norm(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.m.norm().ln() + self.e as f64 * std::f64::consts::LN_2
    }

    /// Collapse to a plain double pair, saturating to infinity.
    pub fn to_c(&self) -> Complex64 {
        self.m * exp2_i64(self.e)
    }
}

/// Conversion result: `poly(u) = original(u / 2^var_exp2)`, so roots in `u`
/// are `2^var_exp2` times the original roots.
#[derive(Clone, Debug)]
pub struct ScaledPolyC {
    pub poly: PolyC,
    pub var_exp2: i64,
}

/// Round exact coefficients to doubles, rescaling the variable by a power of
/// two when coefficient magnitudes would overflow the double range.
pub fn to_complex_scaled(p: &PolyQ) -> Result<ScaledPolyC> {
    if p.is_zero() {
        return Ok(ScaledPolyC { poly: PolyC::new(Vec::new()), var_exp2: 0 });
    }
    let logs: Vec<Option<f64>> = p
        .coeffs()
        .iter()
        .map(|c| if c.is_zero() { None } else { Some(log2_abs_bigrat(c)) })
        .collect();
    if let Some(l0) = logs[0] {
        if l0 > 1000.0 {
            return Err(Error::Input(
                "constant coefficient exceeds the double range; variable scaling cannot fix it"
                    .into(),
            ));
        }
    }
    let mut s: i64 = 0;
    for (k, l) in logs.iter().enumerate().skip(1) {
        if let Some(l) = l {
            let need = ((l - 960.0) / k as f64).ceil() as i64;
            s = s.max(need);
        }
    }
    s = s.max(0);
    let coeffs = p
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, c)| Complex64::new(bigrat_to_f64_exp2(c, -s * k as i64), 0.0))
        .collect();
    Ok(ScaledPolyC { poly: PolyC::new(coeffs), var_exp2: s })
}
