//! One-parameter families of self-maps of P^1 with marked points.
//!
//! A family is a pair of binary forms whose coefficients are exact
//! polynomials in the parameter t, plus q >= 1 marked points given as
//! projective pairs of parameter polynomials (so the constant mark at
//! infinity is expressible). Specialization at exact rational parameters
//! produces integer maps with certified height machinery; specialization at
//! complex parameters produces double-precision maps for potential
//! evaluation, with near-degenerate parameters flagged rather than
//! evaluated.

use num_complex::Complex64;
use num_traits::Zero;

use crate::cpoly::to_complex_scaled;
use crate::dynamics::{
    canonical_height, ComplexMap, EscapeValue, HeightCertificate, ProjPointQ, RationalMapQ,
};
use crate::error::{Error, Result};
use crate::poly::{poly_gcd, resultant_poly, squarefree_part, BigRat, PolyQ};
use crate::roots::complex_roots;
use crate::scale::bigrat_to_f64;

/// Relative floor below which the specialized resultant is treated as
/// degenerate in complex evaluations.
const RESULTANT_FLOOR: f64 = 1e-12;

/// A marked one-parameter family over Q.
#[derive(Clone, Debug)]
pub struct MarkedFamily {
    name: String,
    degree: usize,
    numer: Vec<PolyQ>,
    denom: Vec<PolyQ>,
    marks: Vec<(PolyQ, PolyQ)>,
    res_poly: PolyQ,
}

/// Parameters where specialization degenerates: zeros of the resultant
/// polynomial and common zeros of a mark pair.
#[derive(Clone, Debug)]
pub struct BadParameterSet {
    pub resultant_roots: Vec<Complex64>,
    /// `(mark index, common zeros of the mark pair)`
    pub mark_roots: Vec<(usize, Vec<Complex64>)>,
}

impl MarkedFamily {
    /// `numer` and `denom` are ascending coefficient lists of the two forms
    /// (entry k multiplies `x^k y^(degree-k)`), each entry a polynomial in
    /// the parameter; `marks` are projective polynomial pairs.
    pub fn new(
        name: impl Into<String>,
        degree: usize,
        numer: Vec<PolyQ>,
        denom: Vec<PolyQ>,
        marks: Vec<(PolyQ, PolyQ)>,
    ) -> Result<Self> {
        if degree < 2 {
            return Err(Error::Input("family degree must be at least 2".into()));
        }
        if numer.len() != degree + 1 || denom.len() != degree + 1 {
            return Err(Error::Input(
                "coefficient lists must have length degree + 1".into(),
            ));
        }
        if marks.is_empty() {
            return Err(Error::Input("at least one marked point is required".into()));
        }
        for (j, (a, b)) in marks.iter().enumerate() {
            if a.is_zero() && b.is_zero() {
                return Err(Error::Input(format!("mark {j} is identically (0, 0)")));
            }
        }
        let res_poly = resultant_poly(&numer, &denom, degree)?;
        if res_poly.is_zero() {
            return Err(Error::Input(
                "degenerate family: resultant vanishes identically".into(),
            ));
        }
        Ok(MarkedFamily { name: name.into(), degree, numer, denom, marks, res_poly })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn marks(&self) -> &[(PolyQ, PolyQ)] {
        &self.marks
    }

    pub fn numer_coeffs(&self) -> &[PolyQ] {
        &self.numer
    }

    pub fn denom_coeffs(&self) -> &[PolyQ] {
        &self.denom
    }

    /// Exact resultant of the two forms as a polynomial in the parameter.
    pub fn resultant_poly(&self) -> &PolyQ {
        &self.res_poly
    }

    /// Same family with a different mark list.
    pub fn with_marks(&self, marks: Vec<(PolyQ, PolyQ)>) -> Result<Self> {
        MarkedFamily::new(
            self.name.clone(),
            self.degree,
            self.numer.clone(),
            self.denom.clone(),
            marks,
        )
    }

    /// Exact specialization. Fails with a degeneration certificate when the
    /// resultant or a mark pair vanishes at `t`.
    pub fn specialize_exact(&self, t: &BigRat) -> Result<(RationalMapQ, Vec<ProjPointQ>)> {
        if self.res_poly.eval(t).is_zero() {
            return Err(Error::Degenerate(format!(
                "resultant polynomial vanishes at t = {t}"
            )));
        }
        let f: Vec<BigRat> = self.numer.iter().map(|p| p.eval(t)).collect();
        let g: Vec<BigRat> = self.denom.iter().map(|p| p.eval(t)).collect();
        let map = RationalMapQ::from_rational_coeffs(&f, &g)?;
        let mut points = Vec::with_capacity(self.marks.len());
        for (j, (a, b)) in self.marks.iter().enumerate() {
            let av = a.eval(t);
            let bv = b.eval(t);
            if av.is_zero() && bv.is_zero() {
                return Err(Error::Degenerate(format!("mark {j} vanishes at t = {t}")));
            }
            points.push(ProjPointQ::from_rationals(&av, &bv)?);
        }
        Ok((map, points))
    }

    /// Complex specialization for potential evaluation. Near-degenerate
    /// parameters (resultant below the relative floor, or a mark pair
    /// numerically at the origin) are refused so grid consumers can mask.
    pub fn specialize_complex(
        &self,
        t: Complex64,
    ) -> Result<(ComplexMap, Vec<(Complex64, Complex64)>)> {
        let res_val = self.res_poly.eval_complex(t);
        let res_scale = bigrat_to_f64(&self.res_poly.l1_norm())
            * t.norm().max(1.0).powi(self.res_poly.degree().unwrap_or(0) as i32);
        if !res_val.is_finite() || res_val.norm() < RESULTANT_FLOOR * res_scale {
            return Err(Error::Degenerate(format!(
                "resultant at t = {t} is below the degeneration floor"
            )));
        }
        let f: Vec<Complex64> = self.numer.iter().map(|p| p.eval_complex(t)).collect();
        let g: Vec<Complex64> = self.denom.iter().map(|p| p.eval_complex(t)).collect();
        let map = ComplexMap::new(f, g)?;
        let mut pairs = Vec::with_capacity(self.marks.len());
        for (j, (a, b)) in self.marks.iter().enumerate() {
            let av = a.eval_complex(t);
            let bv = b.eval_complex(t);
            let scale = bigrat_to_f64(&(&a.l1_norm() + &b.l1_norm()))
                * t.norm()
                    .max(1.0)
                    .powi(a.degree().unwrap_or(0).max(b.degree().unwrap_or(0)) as i32);
            if av.norm().max(bv.norm()) < 1e-14 * scale.max(1e-300) {
                return Err(Error::Degenerate(format!(
                    "mark {j} vanishes numerically at t = {t}"
                )));
            }
            pairs.push((av, bv));
        }
        Ok((map, pairs))
    }

    /// Sum of certified canonical heights of the marks at an exact
    /// parameter (value and radius add across marks).
    pub fn parametric_height(&self, t: &BigRat, tol: f64) -> Result<HeightCertificate> {
        let (map, points) = self.specialize_exact(t)?;
        let per_mark = tol / self.marks.len() as f64;
        let mut value = 0.0;
        let mut radius = 0.0;
        let mut n_used = 0;
        for x in &points {
            let cert = canonical_height(&map, x, per_mark)?;
            value += cert.value;
            radius += cert.radius;
            n_used = n_used.max(cert.n_used);
        }
        Ok(HeightCertificate { value, radius, n_used })
    }

    /// Sum of homogeneous escape rates of the marks at a complex parameter.
    pub fn parametric_potential(&self, t: Complex64, tol: f64) -> Result<EscapeValue> {
        let (map, pairs) = self.specialize_complex(t)?;
        let per_mark = tol / self.marks.len() as f64;
        let mut value = 0.0;
        let mut radius = 0.0;
        let mut n_used = 0;
        for &(a, b) in &pairs {
            let esc = map.escape_rate(a, b, per_mark)?;
            value += esc.value;
            radius += esc.radius;
            n_used = n_used.max(esc.n_used);
        }
        Ok(EscapeValue { value, radius, n_used })
    }

    /// Zeros of the resultant polynomial and of each mark's common factor.
    pub fn bad_parameters(&self, tol: f64, seed: u64) -> Result<BadParameterSet> {
        let roots_of = |p: &PolyQ| -> Result<Vec<Complex64>> {
            let sf = squarefree_part(p)?;
            if sf.degree().map_or(true, |d| d == 0) {
                return Ok(Vec::new());
            }
            let scaled = to_complex_scaled(&sf)?;
            let found = complex_roots(&scaled.poly, tol, seed)?;
            let factor = crate::scale::exp2_i64(-scaled.var_exp2);
            Ok(found.roots.into_iter().map(|r| r * factor).collect())
        };
        let resultant_roots = if self.res_poly.degree().map_or(true, |d| d == 0) {
            Vec::new()
        } else {
            roots_of(&self.res_poly)?
        };
        let mut mark_roots = Vec::new();
        for (j, (a, b)) in self.marks.iter().enumerate() {
            let g = poly_gcd(a, b);
            if g.degree().map_or(false, |d| d >= 1) {
                mark_roots.push((j, roots_of(&g)?));
            }
        }
        Ok(BadParameterSet { resultant_roots, mark_roots })
    }
}

/// The family `z^d + t` with constant affine marks.
pub fn unicritical_family(degree: usize, marks: &[BigRat]) -> Result<MarkedFamily> {
    let mut numer = vec![PolyQ::zero(); degree + 1];
    numer[0] = PolyQ::var();
    numer[degree] = PolyQ::one();
    let mut denom = vec![PolyQ::zero(); degree + 1];
    denom[0] = PolyQ::one();
    let mark_pairs = marks
        .iter()
        .map(|c| (PolyQ::constant(c.clone()), PolyQ::one()))
        .collect();
    MarkedFamily::new(format!("z^{degree}+t"), degree, numer, denom, mark_pairs)
}

/// The degree-4 polynomial family
/// `z^4/4 - (2/3) t z^3 + (t^2/2) z^2 + t^4` with the parameter itself as
/// the marked point.
pub fn quartic_marked_family() -> Result<MarkedFamily> {
    let rat = |n: i64, d: i64| BigRat::new(n.into(), d.into());
    let mut numer = vec![PolyQ::zero(); 5];
    numer[4] = PolyQ::constant(rat(1, 4));
    numer[3] = PolyQ::new(vec![rat(0, 1), rat(-2, 3)]);
    numer[2] = PolyQ::new(vec![rat(0, 1), rat(0, 1), rat(1, 2)]);
    numer[0] = PolyQ::new(vec![rat(0, 1), rat(0, 1), rat(0, 1), rat(0, 1), rat(1, 1)]);
    let mut denom = vec![PolyQ::zero(); 5];
    denom[0] = PolyQ::one();
    let marks = vec![(PolyQ::var(), PolyQ::one())];
    MarkedFamily::new("quartic-marked", 4, numer, denom, marks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_traits::{One, Zero};

    fn rat(n: i64, d: i64) -> BigRat {
        BigRat::new(BigInt::from(n), BigInt::from(d))
    }

    fn z2t(marks: &[i64]) -> MarkedFamily {
        let marks: Vec<BigRat> = marks.iter().map(|&m| rat(m, 1)).collect();
        unicritical_family(2, &marks).unwrap()
    }

    #[test]
    fn specialize_unicritical_at_zero() {
        let fam = z2t(&[0]);
        let (map, marks) = fam.specialize_exact(&rat(0, 1)).unwrap();
        assert!(map.is_height_exact()); // z^2
        assert_eq!(marks[0], ProjPointQ::from_i64(0, 1).unwrap());
        let (map, _) = fam.specialize_exact(&rat(-1, 1)).unwrap();
        assert_eq!(
            map.numerator(),
            &[BigInt::from(-1), BigInt::zero(), BigInt::one()]
        );
    }

    #[test]
    fn specialize_quartic_at_one_clears_to_coprime_form() {
        let fam = quartic_marked_family().unwrap();
        let (map, marks) = fam.specialize_exact(&rat(1, 1)).unwrap();
        let expect_f: Vec<BigInt> = [12i64, 0, 6, -8, 3].iter().map(|&c| c.into()).collect();
        let expect_g: Vec<BigInt> = [12i64, 0, 0, 0, 0].iter().map(|&c| c.into()).collect();
        assert_eq!(map.numerator(), expect_f.as_slice());
        assert_eq!(map.denominator(), expect_g.as_slice());
        assert_eq!(marks[0], ProjPointQ::from_i64(1, 1).unwrap());
    }

    #[test]
    fn parametric_height_examples() {
        // mark 0 is fixed under z^2
        let fam = z2t(&[0]);
        let cert = fam.parametric_height(&rat(0, 1), 1e-9).unwrap();
        assert_eq!(cert.value, 0.0);
        // marks {0, 4} at t = 0: height log 4
        let fam = z2t(&[0, 4]);
        let cert = fam.parametric_height(&rat(0, 1), 1e-9).unwrap();
        assert!((cert.value - 4f64.ln()).abs() <= 1e-9);
        // Chebyshev parameter: orbit 0 -> -2 -> 2 -> 2
        let fam = z2t(&[0]);
        let cert = fam.parametric_height(&rat(-2, 1), 1e-9).unwrap();
        assert_eq!(cert.value, 0.0);
    }

    #[test]
    fn parametric_potential_examples() {
        let fam = z2t(&[0]);
        let v = fam.parametric_potential(Complex64::new(1e6, 0.0), 1e-9).unwrap();
        assert!((v.value - 0.5 * 1e6f64.ln()).abs() < 2.0);
        let v = fam.parametric_potential(Complex64::new(0.0, 0.0), 1e-9).unwrap();
        assert!(v.value.abs() < 1e-9);
        let fam = z2t(&[0, 4]);
        let v = fam.parametric_potential(Complex64::new(0.0, 0.0), 1e-9).unwrap();
        assert!((v.value - 4f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn mark_sum_rule_is_exact_at_value_level() {
        let fam_both = z2t(&[0, 4]);
        let fam_zero = z2t(&[0]);
        let fam_four = z2t(&[4]);
        for t in [rat(1, 3), rat(-7, 5), rat(2, 1)] {
            let tol = 1e-8;
            let joint = fam_both.parametric_height(&t, tol).unwrap();
            let a = fam_zero.parametric_height(&t, tol / 2.0).unwrap();
            let b = fam_four.parametric_height(&t, tol / 2.0).unwrap();
            assert_eq!(joint.value, a.value + b.value);
        }
    }

    #[test]
    fn exact_and_complex_routes_agree_at_integral_parameters() {
        // at integral t the cleared integer model equals the literal
        // specialization, so the archimedean parts must agree
        let fam = z2t(&[0, 4]);
        for t in [-2i64, -1, 0, 1, 3] {
            let (map, points) = fam.specialize_exact(&rat(t, 1)).unwrap();
            let cm = map.to_complex().unwrap();
            let mut exact_arch = 0.0;
            for x in &points {
                let (vx, vy, ln_norm) = x.unit_pair();
                exact_arch += ln_norm + cm.escape_rate(vx, vy, 1e-10).unwrap().value;
            }
            let complex_route = fam
                .parametric_potential(Complex64::new(t as f64, 0.0), 1e-10)
                .unwrap();
            assert!(
                (exact_arch - complex_route.value).abs() < 1e-8,
                "t = {t}: {exact_arch} vs {}",
                complex_route.value
            );
        }
    }

    #[test]
    fn potential_covariance_under_model_scaling() {
        // scaling both forms by c shifts the potential by ln|c|/(d-1);
        // scaling a mark pair by m shifts it by ln|m|
        let fam = z2t(&[0]);
        let t = Complex64::new(0.3, 0.7);
        let base = fam.parametric_potential(t, 1e-11).unwrap().value;
        let (map, pairs) = fam.specialize_complex(t).unwrap();
        let scale = 3.0;
        let f_scaled: Vec<Complex64> =
            fam.numer_coeffs().iter().map(|p| p.eval_complex(t) * scale).collect();
        let g_scaled: Vec<Complex64> =
            fam.denom_coeffs().iter().map(|p| p.eval_complex(t) * scale).collect();
        let scaled_map = ComplexMap::new(f_scaled, g_scaled).unwrap();
        let esc = scaled_map.escape_rate(pairs[0].0, pairs[0].1, 1e-11).unwrap().value;
        assert!((esc - (base + scale.ln())).abs() < 1e-9);
        let esc_mark = map
            .escape_rate(pairs[0].0 * 5.0, pairs[0].1 * 5.0, 1e-11)
            .unwrap()
            .value;
        assert!((esc_mark - (base + 5f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn zero_height_parameters_lie_in_small_box() {
        // denominator-bounded sweep: any t with both marked heights
        // consistent with zero would contradict the depth-1 box filter
        let fam0 = z2t(&[0]);
        let fam4 = z2t(&[4]);
        let mut survivors = 0;
        for q in 1i64..=4 {
            for p in -(3 * q)..=(3 * q) {
                let t = rat(p, q);
                let h0 = fam0.parametric_height(&t, 1e-6).unwrap();
                let h4 = fam4.parametric_height(&t, 1e-6).unwrap();
                let zero0 = h0.value.abs() <= h0.radius + 1e-9;
                let zero4 = h4.value.abs() <= h4.radius + 1e-9;
                let tv = p as f64 / q as f64;
                if zero0 {
                    // bounded critical orbit forces |t| <= 2
                    assert!(tv.abs() <= 2.0 + 1e-12, "t = {tv} escapes the box");
                }
                if zero0 && zero4 {
                    survivors += 1;
                }
                // depth-1 refinement of the joint condition
                let passes_depth1 = tv.abs() <= 2.0
                    && (4.0 * tv).abs() <= 2.0
                    && (tv * (16.0 + tv)).abs() <= 2.0;
                if passes_depth1 {
                    assert!(tv.abs() <= 5.0 / 32.0 + 1e-12);
                }
            }
        }
        assert_eq!(survivors, 0, "no rational parameter makes both marks small");
    }

    #[test]
    fn degenerate_family_rejected() {
        // F = G = x y: resultant identically zero
        let xy = vec![PolyQ::zero(), PolyQ::one(), PolyQ::zero()];
        assert!(
            MarkedFamily::new("bad", 2, xy.clone(), xy, vec![(PolyQ::zero(), PolyQ::one())])
                .is_err()
        );
    }

    #[test]
    fn degenerate_parameter_reported() {
        // denominator form scaled by t: resultant vanishes at t = 0
        let numer = vec![PolyQ::var(), PolyQ::zero(), PolyQ::one()];
        let denom = vec![PolyQ::var(), PolyQ::zero(), PolyQ::zero()];
        let fam =
            MarkedFamily::new("t-scaled", 2, numer, denom, vec![(PolyQ::zero(), PolyQ::one())])
                .unwrap();
        match fam.specialize_exact(&rat(0, 1)) {
            Err(Error::Degenerate(msg)) => assert!(msg.contains("t = 0")),
            other => panic!("expected degeneration, got {other:?}"),
        }
        let bad = fam.bad_parameters(1e-10, 0).unwrap();
        assert_eq!(bad.resultant_roots.len(), 1);
        assert!(bad.resultant_roots[0].norm() < 1e-9);
    }

    #[test]
    fn infinity_mark_is_allowed() {
        let marks = vec![(PolyQ::one(), PolyQ::zero())];
        let numer = vec![PolyQ::var(), PolyQ::zero(), PolyQ::one()];
        let denom = vec![PolyQ::one(), PolyQ::zero(), PolyQ::zero()];
        let fam = MarkedFamily::new("inf-mark", 2, numer, denom, marks).unwrap();
        let (_, pts) = fam.specialize_exact(&rat(5, 1)).unwrap();
        assert!(pts[0].is_infinity());
        // infinity is a fixed non-escaping point for a polynomial family
        let v = fam.parametric_potential(Complex64::new(0.5, 0.2), 1e-9).unwrap();
        assert!(v.value.abs() < 1e-9);
    }
}
