//! Preperiodic-parameter polynomials and their root sets.
//!
//! For a single-marked family the parameters where the n-th and m-th
//! iterates of the mark collide form the zero set of an exact polynomial:
//! iterating the mark in Q(t) as a projective pair of parameter polynomials
//! (content-normalized every step, never divided) and cross-multiplying the
//! two iterates gives its content-normalized numerator. Root sets of such
//! polynomials are stable under the Galois action by construction, which is
//! what makes them usable as empirical measures downstream.

use num_complex::Complex64;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use std::io::{self, Write};

use crate::cpoly::{to_complex_scaled, Sc};
use crate::dynamics::{is_preperiodic, PreperiodicDecision};
use crate::error::{Error, Result};
use crate::family::MarkedFamily;
use crate::poly::{squarefree_part, BigRat, PolyQ};
use crate::roots::{
    aberth_iterate, cluster, complex_roots, fujiwara_radius, initial_circle, sort_roots,
    AberthEval,
};
use crate::scale::{bigrat_to_f64, exp2_i64, log2_abs_bigrat};

/// Hard ceiling on the degree of a preperiodic-parameter polynomial.
const DEGREE_BUDGET: usize = 1 << 15;

/// Exact polynomial cutting out parameters with `f_t^n(a(t)) = f_t^m(a(t))`.
#[derive(Clone, Debug)]
pub struct PreperPoly {
    pub family: MarkedFamily,
    pub n: u32,
    pub m: u32,
    pub poly: PolyQ,
}

impl PreperPoly {
    pub fn degree(&self) -> usize {
        self.poly.degree().unwrap_or(0)
    }

    pub fn family_degree(&self) -> usize {
        self.family.degree()
    }

    /// Dynamical normalization degree `d^n`: the divisor `[poly = 0]`
    /// scaled by its reciprocal converges to the bifurcation current, so
    /// potential comparisons divide logs by this rather than by the plain
    /// polynomial degree.
    pub fn normalization_degree(&self) -> f64 {
        (self.family.degree() as f64).powi(self.n as i32)
    }
}

/// Joint content of a projective pair of parameter polynomials.
fn pair_content(a: &PolyQ, b: &PolyQ) -> BigRat {
    let mut coeffs = a.coeffs().to_vec();
    coeffs.extend_from_slice(b.coeffs());
    PolyQ::new(coeffs).content()
}

fn normalize_pair(a: PolyQ, b: PolyQ) -> (PolyQ, PolyQ) {
    let c = pair_content(&a, &b);
    if c.is_zero() {
        return (a, b);
    }
    let inv = BigRat::new(c.denom().clone(), c.numer().clone());
    let mut a = a.scale(&inv);
    let mut b = b.scale(&inv);
    let lead_negative = if b.is_zero() {
        a.leading().map_or(false, Signed::is_negative)
    } else {
        b.leading().map_or(false, Signed::is_negative)
    };
    if lead_negative {
        let minus = BigRat::from_integer((-1).into());
        a = a.scale(&minus);
        b = b.scale(&minus);
    }
    (a, b)
}

/// Evaluate the family's forms on a polynomial pair: `sum_k c_k(t) A^k B^(d-k)`.
fn eval_form_on_pair(coeffs: &[PolyQ], a: &PolyQ, b: &PolyQ) -> PolyQ {
    let d = coeffs.len() - 1;
    let mut apow = Vec::with_capacity(d + 1);
    apow.push(PolyQ::one());
    for _ in 0..d {
        apow.push(apow.last().unwrap().mul_ref(a));
    }
    let mut bpow = Vec::with_capacity(d + 1);
    bpow.push(PolyQ::one());
    for _ in 0..d {
        bpow.push(bpow.last().unwrap().mul_ref(b));
    }
    let mut acc = PolyQ::zero();
    for (k, c) in coeffs.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        acc = acc.add_ref(&c.mul_ref(&apow[k]).mul_ref(&bpow[d - k]));
    }
    acc
}

/// Exact preperiodic-parameter polynomial for a single-marked family.
///
/// For the unicritical family `z^d + t` with mark 0 and `m = 0` the degree
/// is exactly `d^(n-1)`.
pub fn preper_poly(fam: &MarkedFamily, n: u32, m: u32) -> Result<PreperPoly> {
    if fam.marks().len() != 1 {
        return Err(Error::Input(
            "preperiodic-parameter polynomials need exactly one mark".into(),
        ));
    }
    if n <= m {
        return Err(Error::Input("need n > m >= 0".into()));
    }
    let max_coeff_deg = fam
        .numer_coeffs()
        .iter()
        .chain(fam.denom_coeffs())
        .filter_map(|p| p.degree())
        .max()
        .unwrap_or(0);
    let (mut a, mut b) = fam.marks()[0].clone();
    let norm = normalize_pair(a, b);
    a = norm.0;
    b = norm.1;
    let mut at_m: Option<(PolyQ, PolyQ)> = if m == 0 { Some((a.clone(), b.clone())) } else { None };
    for step in 1..=n {
        let deg_cur = a.degree().unwrap_or(0).max(b.degree().unwrap_or(0));
        let projected = fam.degree() * deg_cur + max_coeff_deg;
        if projected > DEGREE_BUDGET {
            return Err(Error::Resource {
                msg: format!("iterate degree {projected} exceeds the budget {DEGREE_BUDGET}"),
                partial: step - 1,
            });
        }
        let next_a = eval_form_on_pair(fam.numer_coeffs(), &a, &b);
        let next_b = eval_form_on_pair(fam.denom_coeffs(), &a, &b);
        let norm = normalize_pair(next_a, next_b);
        a = norm.0;
        b = norm.1;
        if step == m {
            at_m = Some((a.clone(), b.clone()));
        }
    }
    let (am, bm) = at_m.expect("m < n iterate recorded");
    let diff = a.mul_ref(&bm).sub_ref(&am.mul_ref(&b));
    if diff.is_zero() {
        return Err(Error::Structural(format!(
            "iterates {n} and {m} of the mark coincide identically; the marked orbit never moves"
        )));
    }
    Ok(PreperPoly { family: fam.clone(), n, m, poly: diff.primitive() })
}

// ---------------------------------------------------------------------------
// orbit-recursion Newton evaluator
// ---------------------------------------------------------------------------

/// Newton-ratio evaluator for the collision function `z_n(t) - z_m(t)`
/// computed through the defining orbit recursion with forward-mode
/// parameter derivatives, in scale-tracked complex arithmetic.
///
/// Expanded coefficients of high-level collision polynomials cancel
/// catastrophically near parameters with bounded orbits (hundreds of digits
/// at level 12), so root extraction must evaluate through the recursion;
/// orbit values stay moderate near every root and the computation is
/// well-conditioned there. Available for polynomial-like families: the
/// denominator form is `g0(t) y^d` and the single mark has a constant
/// denominator.
struct OrbitEval {
    numer: Vec<PolyQ>,
    numer_dt: Vec<PolyQ>,
    g0: PolyQ,
    g0_dt: PolyQ,
    mark: PolyQ,
    mark_dt: PolyQ,
    mark_den: Complex64,
    degree: usize,
    n: u32,
    m: u32,
}

struct OrbitData {
    q: Sc,
    dq: Sc,
    ln_scale: f64,
}

impl OrbitEval {
    fn try_new(fam: &MarkedFamily, n: u32, m: u32) -> Option<Self> {
        if fam.marks().len() != 1 {
            return None;
        }
        let denom = fam.denom_coeffs();
        if denom.iter().skip(1).any(|p| !p.is_zero()) || denom[0].is_zero() {
            return None;
        }
        let (mark_a, mark_b) = &fam.marks()[0];
        if mark_b.degree() != Some(0) {
            return None;
        }
        let numer: Vec<PolyQ> = fam.numer_coeffs().to_vec();
        let numer_dt = numer.iter().map(PolyQ::derivative).collect();
        Some(OrbitEval {
            numer,
            numer_dt,
            g0: denom[0].clone(),
            g0_dt: denom[0].derivative(),
            mark: mark_a.clone(),
            mark_dt: mark_a.derivative(),
            mark_den: Complex64::new(bigrat_to_f64(&mark_b.coeff(0)), 0.0),
            degree: fam.degree(),
            n,
            m,
        })
    }

    fn orbit(&self, t: Complex64) -> Option<OrbitData> {
        let g0 = self.g0.eval_complex(t);
        if !g0.is_finite() || g0.norm_sqr() == 0.0 {
            return None;
        }
        let g0_inv = 1.0 / g0;
        let g0_dt = self.g0_dt.eval_complex(t);
        let log_deriv_g0 = g0_dt * g0_inv;
        let ck: Vec<Complex64> = self.numer.iter().map(|p| p.eval_complex(t)).collect();
        let ckd: Vec<Complex64> = self.numer_dt.iter().map(|p| p.eval_complex(t)).collect();
        let d = self.degree;

        let mut z = Sc::from_c(self.mark.eval_complex(t) / self.mark_den);
        let mut dz = Sc::from_c(self.mark_dt.eval_complex(t) / self.mark_den);
        let mut at_m = if self.m == 0 { Some((z, dz)) } else { None };
        for step in 1..=self.n {
            let mut zpow = Vec::with_capacity(d + 1);
            zpow.push(Sc::from_c(Complex64::new(1.0, 0.0)));
            for _ in 0..d {
                zpow.push(zpow.last().unwrap().mul(z));
            }
            let mut num = Sc::zero();
            let mut num_dz = Sc::zero();
            let mut num_dt = Sc::zero();
            for k in 0..=d {
                if ck[k].norm_sqr() != 0.0 {
                    num = num.add(zpow[k].mul_c(ck[k]));
                    if k >= 1 {
                        num_dz = num_dz.add(zpow[k - 1].mul_c(ck[k] * k as f64));
                    }
                }
                if ckd[k].norm_sqr() != 0.0 {
                    num_dt = num_dt.add(zpow[k].mul_c(ckd[k]));
                }
            }
            let z_next = num.mul_c(g0_inv);
            // d/dt (N/g0) = (N_z dz + N_t)/g0 - (N/g0) g0'/g0
            let dz_next = num_dz
                .mul(dz)
                .add(num_dt)
                .mul_c(g0_inv)
                .sub(z_next.mul_c(log_deriv_g0));
            z = z_next;
            dz = dz_next;
            if !z.m.is_finite() || !dz.m.is_finite() {
                return None;
            }
            if step == self.m {
                at_m = Some((z, dz));
            }
        }
        let (zm, dzm) = at_m.expect("m < n iterate recorded");
        let q = z.sub(zm);
        let dq = dz.sub(dzm);
        let ln_scale = z.ln_norm().max(zm.ln_norm()).max(0.0);
        Some(OrbitData { q, dq, ln_scale })
    }
}

impl AberthEval for OrbitEval {
    fn newton_ratio(&self, t: Complex64) -> Complex64 {
        match self.orbit(t) {
            Some(data) => {
                if data.dq.is_zero() {
                    return Complex64::new(1e-12, 1e-12) * t.norm().max(1.0);
                }
                let w = data.q.div(data.dq).to_c();
                if w.is_finite() {
                    w
                } else {
                    Complex64::new(1e-6, 1e-6) * t.norm().max(1.0)
                }
            }
            None => Complex64::new(1e-6, 1e-6) * t.norm().max(1.0),
        }
    }

    fn residual(&self, t: Complex64) -> f64 {
        match self.orbit(t) {
            Some(data) => {
                let ln_q = data.q.ln_norm();
                if ln_q == f64::NEG_INFINITY {
                    0.0
                } else {
                    (ln_q - data.ln_scale).exp()
                }
            }
            None => 1.0,
        }
    }
}

/// Galois-stable multiset of complex parameters: all roots of the
/// squarefree part, with backward-error residual certificates.
#[derive(Clone, Debug)]
pub struct RootSet {
    pub points: Vec<Complex64>,
    pub residuals: Vec<f64>,
    pub residual_tol: f64,
    pub source_n: u32,
    pub source_m: u32,
    pub source_degree: usize,
    pub normalization_degree: f64,
}

/// Extract all roots of the squarefree part of a preperiodic-parameter
/// polynomial and validate conjugate symmetry.
///
/// For polynomial-like families the Aberth engine evaluates Newton data
/// through the orbit recursion; otherwise it falls back to the expanded
/// squarefree coefficients (accurate for moderate levels only).
pub fn root_set(pp: &PreperPoly, tol: f64, seed: u64) -> Result<RootSet> {
    let sf = squarefree_part(&pp.poly)?;
    let deg = sf.degree().unwrap_or(0);
    if deg == 0 {
        return Err(Error::Input(
            "preperiodic-parameter polynomial has no roots".into(),
        ));
    }
    let (points, residuals) = match OrbitEval::try_new(&pp.family, pp.n, pp.m) {
        Some(eval) => {
            let init = initial_circle(exact_centroid(&sf), exact_fujiwara(&sf), deg, seed);
            let (z, _iters) = aberth_iterate(&eval, init, tol)?;
            let mut roots = cluster(z);
            sort_roots(&mut roots);
            let residuals: Vec<f64> = roots.iter().map(|&r| eval.residual(r)).collect();
            let worst = residuals.iter().copied().fold(0.0f64, f64::max);
            if worst > tol {
                return Err(Error::Numeric {
                    msg: format!("collision residual above tolerance at level {}", pp.n),
                    residual: worst,
                });
            }
            (roots, residuals)
        }
        None => {
            let scaled = to_complex_scaled(&sf)?;
            let found = complex_roots(&scaled.poly, tol, seed)?;
            let back = exp2_i64(-scaled.var_exp2);
            let points: Vec<Complex64> = found.roots.iter().map(|&r| r * back).collect();
            (points, found.residuals)
        }
    };
    // conjugate symmetry: rational coefficients force closure under
    // conjugation; validate as a sanity certificate on the numerics
    let sym_tol = 1e-6 * points.iter().map(|p| p.norm()).fold(1.0f64, f64::max);
    for p in &points {
        let conj = p.conj();
        let nearest = points
            .iter()
            .map(|q| (q - conj).norm())
            .fold(f64::MAX, f64::min);
        if nearest > sym_tol {
            return Err(Error::Numeric {
                msg: format!("root set is not conjugation-symmetric near {p}"),
                residual: nearest,
            });
        }
    }
    Ok(RootSet {
        points,
        residuals,
        residual_tol: tol,
        source_n: pp.n,
        source_m: pp.m,
        source_degree: pp.degree(),
        normalization_degree: pp.normalization_degree(),
    })
}

/// Root centroid `-c_(D-1) / (D c_D)` from exact coefficients.
fn exact_centroid(p: &PolyQ) -> Complex64 {
    let d = p.degree().unwrap_or(0);
    if d == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let c = bigrat_to_f64(&(-(p.coeff(d - 1) / p.coeff(d)))) / d as f64;
    if c.is_finite() && c.abs() < 1e9 {
        Complex64::new(c, 0.0)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// Fujiwara root bound from exact coefficients via base-2 logs (safe for
/// coefficients far outside the double range).
fn exact_fujiwara(p: &PolyQ) -> f64 {
    let d = p.degree().unwrap_or(0);
    let lead_log = log2_abs_bigrat(&p.coeff(d));
    let mut mags = vec![0.0f64; d + 1];
    for k in 0..=d {
        let c = p.coeff(k);
        mags[k] = if c.is_zero() {
            0.0
        } else {
            let l = log2_abs_bigrat(&c) - lead_log;
            if l > 1000.0 {
                f64::MAX
            } else {
                l.exp2()
            }
        };
    }
    mags[d] = 1.0;
    fujiwara_radius(&mags).min(1e9)
}

/// How a single parameter was certified.
#[derive(Clone, Debug)]
pub enum SmallnessStatus {
    /// Exact rational parameter with every mark exactly preperiodic.
    RationalPreperiodic { t: BigRat },
    /// Escape rate of the marks numerically consistent with zero.
    BoundedNumeric { escape: f64 },
    /// Certified positive escape rate: not small.
    NotSmall { escape: f64, radius: f64 },
    /// Could not be decided at the working tolerance.
    Ambiguous { escape: f64, radius: f64 },
}

/// Per-root smallness report for a root set.
#[derive(Clone, Debug)]
pub struct CertifyReport {
    pub statuses: Vec<SmallnessStatus>,
    pub small: usize,
    pub rational_exact: usize,
    pub not_small: usize,
    pub ambiguous: usize,
}

impl CertifyReport {
    pub fn total(&self) -> usize {
        self.statuses.len()
    }

    pub fn fraction_small(&self) -> f64 {
        if self.statuses.is_empty() {
            return 0.0;
        }
        self.small as f64 / self.statuses.len() as f64
    }
}

/// Threshold below which a certified escape value counts as bounded.
const SMALL_ESCAPE: f64 = 1e-4;

/// Certify smallness of every root: exact preperiodicity checks at
/// reconstructed rational parameters, numeric escape-rate checks elsewhere.
pub fn certify_small(fam: &MarkedFamily, rs: &RootSet) -> CertifyReport {
    let statuses: Vec<SmallnessStatus> = rs
        .points
        .par_iter()
        .map(|&root| certify_one(fam, root))
        .collect();
    let mut small = 0;
    let mut rational_exact = 0;
    let mut not_small = 0;
    let mut ambiguous = 0;
    for s in &statuses {
        match s {
            SmallnessStatus::RationalPreperiodic { .. } => {
                small += 1;
                rational_exact += 1;
            }
            SmallnessStatus::BoundedNumeric { .. } => small += 1,
            SmallnessStatus::NotSmall { .. } => not_small += 1,
            SmallnessStatus::Ambiguous { .. } => ambiguous += 1,
        }
    }
    CertifyReport { statuses, small, rational_exact, not_small, ambiguous }
}

fn certify_one(fam: &MarkedFamily, root: Complex64) -> SmallnessStatus {
    if root.im.abs() <= 1e-9 {
        if let Some(t) = reconstruct_rational(root.re, 64) {
            if let Ok((map, points)) = fam.specialize_exact(&t) {
                let all_preperiodic = points.iter().all(|x| {
                    matches!(
                        is_preperiodic(&map, x, 512),
                        Ok(PreperiodicDecision::Yes { .. })
                    )
                });
                if all_preperiodic {
                    return SmallnessStatus::RationalPreperiodic { t };
                }
            }
        }
    }
    match fam.parametric_potential(root, 1e-7) {
        Ok(esc) => {
            if esc.value <= SMALL_ESCAPE {
                SmallnessStatus::BoundedNumeric { escape: esc.value }
            } else if esc.value - esc.radius > SMALL_ESCAPE {
                SmallnessStatus::NotSmall { escape: esc.value, radius: esc.radius }
            } else {
                SmallnessStatus::Ambiguous { escape: esc.value, radius: esc.radius }
            }
        }
        Err(_) => SmallnessStatus::Ambiguous { escape: f64::NAN, radius: f64::NAN },
    }
}

/// Continued-fraction reconstruction of a nearby rational with bounded
/// denominator; accepted only within 1e-9.
fn reconstruct_rational(x: f64, max_den: i64) -> Option<BigRat> {
    let (mut p0, mut q0, mut p1, mut q1) = (1i64, 0i64, x.round() as i64, 1i64);
    let mut frac = x - x.round();
    for _ in 0..32 {
        if (p1 as f64 / q1 as f64 - x).abs() <= 1e-9 {
            return Some(BigRat::new(p1.into(), q1.into()));
        }
        if frac.abs() < 1e-12 {
            break;
        }
        let inv = 1.0 / frac;
        let a = inv.round();
        frac = inv - a;
        let p2 = a as i64 * p1 + p0;
        let q2 = a as i64 * q1 + q0;
        if q2.abs() > max_den || q2 == 0 {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
    }
    None
}

/// CSV rows `re,im,residual`.
pub fn write_roots_csv(rs: &RootSet, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "re,im,residual")?;
    for (p, r) in rs.points.iter().zip(&rs.residuals) {
        writeln!(out, "{},{},{:e}", p.re, p.im, r)?;
    }
    Ok(())
}
