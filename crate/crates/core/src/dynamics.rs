//! Rational self-maps of the projective line: exact iteration over Q,
//! certified canonical heights, local height series at finite places, and
//! archimedean escape rates for the complex incarnation of a map.
//!
//! A degree-d map is a pair of integer binary forms (F, G) of degree d with
//! nonzero resultant and coefficient content one. The certified constants
//! attached at construction come from exact Bezout cofactors of the
//! Sylvester system: with A F + B G = Res x^(2d-1) and
//! C F + D G = Res y^(2d-1),
//!
//! * `|h(f x) - d h(x)| <= max(ln max(|F|_1, |G|_1), ln K)` on P^1(Q), and
//! * `ln ||f v|| - d ln ||v||` lies in `[ln|Res| - ln K, ln max(|F|_1, |G|_1)]`
//!   on C^2,
//!
//! where K is the largest combined l1 norm of the integer cofactor pairs.
//! Both bounds telescope into the geometric tail `C / (d^n (d-1))` that all
//! certificates report.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::poly::{resultant, solve_rational, BigRat, PolyQ};
use crate::primes::{factorize, is_prime, valuation};
use crate::scale::{exp2_i64, ln_abs_bigint, ln_abs_bigrat, ratio_f64};

// ---------------------------------------------------------------------------
// points
// ---------------------------------------------------------------------------

/// A point of P^1(Q) as a coprime integer pair, sign-normalized so that
/// b >= 0 and the point at infinity is [1 : 0].
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct ProjPointQ {
    a: BigInt,
    b: BigInt,
}

impl ProjPointQ {
    pub fn new(a: BigInt, b: BigInt) -> Result<Self> {
        if a.is_zero() && b.is_zero() {
            return Err(Error::Input("projective point (0, 0) is not allowed".into()));
        }
        let g = a.gcd(&b);
        let (mut a, mut b) = (a / &g, b / &g);
        if b.is_negative() || (b.is_zero() && a.is_negative()) {
            a = -a;
            b = -b;
        }
        Ok(ProjPointQ { a, b })
    }

    pub fn from_i64(a: i64, b: i64) -> Result<Self> {
        ProjPointQ::new(BigInt::from(a), BigInt::from(b))
    }

    /// Clear denominators of a rational pair jointly.
    pub fn from_rationals(a: &BigRat, b: &BigRat) -> Result<Self> {
        let l = a.denom().lcm(b.denom());
        let an = a.numer() * (&l / a.denom());
        let bn = b.numer() * (&l / b.denom());
        ProjPointQ::new(an, bn)
    }

    /// The affine rational `t` as `[numer : denom]`.
    pub fn from_rational_value(t: &BigRat) -> Self {
        ProjPointQ::new(t.numer().clone(), t.denom().clone()).expect("valid point")
    }

    pub fn infinity() -> Self {
        ProjPointQ { a: BigInt::one(), b: BigInt::zero() }
    }

    pub fn a(&self) -> &BigInt {
        &self.a
    }

    pub fn b(&self) -> &BigInt {
        &self.b
    }

    pub fn is_infinity(&self) -> bool {
        self.b.is_zero()
    }

    /// Unit-sup-norm complex representative together with `ln` of the norm
    /// divided out (the naive height of the point).
    pub fn unit_pair(&self) -> (Complex64, Complex64, f64) {
        let h = if self.a.magnitude() >= self.b.magnitude() { &self.a } else { &self.b };
        let va = ratio_f64(&self.a, h).clamp(-1.0, 1.0);
        let vb = ratio_f64(&self.b, h).clamp(-1.0, 1.0);
        (
            Complex64::new(va, 0.0),
            Complex64::new(vb, 0.0),
            ln_abs_bigint(h).max(0.0),
        )
    }

    pub fn bit_size(&self) -> u64 {
        self.a.bits() + self.b.bits()
    }
}

impl fmt::Display for ProjPointQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} : {}]", self.a, self.b)
    }
}

/// Logarithmic Weil height `ln max(|a|, |b|)`.
pub fn naive_height(x: &ProjPointQ) -> f64 {
    let m = if x.a.magnitude() >= x.b.magnitude() { &x.a } else { &x.b };
    ln_abs_bigint(m).max(0.0)
}

// ---------------------------------------------------------------------------
// maps over Q
// ---------------------------------------------------------------------------

/// Degree-d self-map of P^1 given by integer forms with nonzero resultant
/// and content one; certified iteration constants are attached eagerly.
#[derive(Clone, Debug)]
pub struct RationalMapQ {
    degree: usize,
    f: Vec<BigInt>,
    g: Vec<BigInt>,
    resultant: BigInt,
    c_height: f64,
    c_escape: f64,
    bad_primes: Vec<(BigInt, u32)>,
    height_exact: bool,
}

fn l1_bigint(v: &[BigInt]) -> BigInt {
    v.iter().fold(BigInt::zero(), |acc, c| acc + c.abs())
}

fn rat_l1(v: &[BigRat]) -> BigRat {
    v.iter().fold(BigRat::zero(), |acc, c| acc + c.abs())
}

impl RationalMapQ {
    /// Build from ascending coefficient vectors of length `degree + 1`
    /// (entry k multiplies `x^k y^(degree-k)`).
    pub fn new(f: Vec<BigInt>, g: Vec<BigInt>) -> Result<Self> {
        if f.len() != g.len() || f.len() < 3 {
            return Err(Error::Input(
                "maps need matching coefficient vectors of degree >= 2".into(),
            ));
        }
        let degree = f.len() - 1;
        let mut content = BigInt::zero();
        for c in f.iter().chain(g.iter()) {
            content = content.gcd(c);
        }
        if content.is_zero() {
            return Err(Error::Input("zero map".into()));
        }
        let f: Vec<BigInt> = f.into_iter().map(|c| c / &content).collect();
        let g: Vec<BigInt> = g.into_iter().map(|c| c / &content).collect();

        let f_rat = PolyQ::new(f.iter().map(|c| BigRat::from_integer(c.clone())).collect());
        let g_rat = PolyQ::new(g.iter().map(|c| BigRat::from_integer(c.clone())).collect());
        let res_rat = resultant(&f_rat, &g_rat, degree)?;
        if res_rat.is_zero() {
            return Err(Error::Input(
                "degenerate map: the two forms share a projective root".into(),
            ));
        }
        debug_assert!(res_rat.denom().is_one());
        let res = res_rat.numer().clone();

        let k_exact = bezout_cofactor_norm(&f, &g, degree, &res)?;
        let maxl1 = {
            let lf = l1_bigint(&f);
            let lg = l1_bigint(&g);
            if lf >= lg { lf } else { lg }
        };
        let res_abs = res.abs();
        let height_exact = maxl1.is_one() && k_exact.is_one() && res_abs.is_one();

        let ln_maxl1 = ln_abs_bigint(&maxl1);
        let ln_k = ln_abs_bigrat(&k_exact);
        let ln_res = ln_abs_bigint(&res_abs);
        let margin = if height_exact { 0.0 } else { 1e-11 };
        let c_height = ln_maxl1.max(ln_k).max(0.0) + margin;
        let lower = ln_res - ln_k;
        let c_escape = ln_maxl1.abs().max(lower.abs()) + margin;

        let bad_primes = if res_abs.is_one() { Vec::new() } else { factorize(&res_abs)? };

        Ok(RationalMapQ {
            degree,
            f,
            g,
            resultant: res,
            c_height,
            c_escape,
            bad_primes,
            height_exact,
        })
    }

    /// Clear denominators of rational coefficient vectors jointly, then
    /// normalize content.
    pub fn from_rational_coeffs(f: &[BigRat], g: &[BigRat]) -> Result<Self> {
        let mut l = BigInt::one();
        for c in f.iter().chain(g.iter()) {
            l = l.lcm(c.denom());
        }
        let clear = |v: &[BigRat]| -> Vec<BigInt> {
            v.iter().map(|c| c.numer() * (&l / c.denom())).collect()
        };
        RationalMapQ::new(clear(f), clear(g))
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn numerator(&self) -> &[BigInt] {
        &self.f
    }

    pub fn denominator(&self) -> &[BigInt] {
        &self.g
    }

    pub fn resultant(&self) -> &BigInt {
        &self.resultant
    }

    /// Primes of bad reduction (divisors of the resultant) with the
    /// multiplicity of each in the resultant.
    pub fn bad_primes(&self) -> &[(BigInt, u32)] {
        &self.bad_primes
    }

    /// Certified constant with `|h(f x) - d h(x)| <= C` for every rational
    /// point.
    pub fn iteration_constant(&self) -> f64 {
        self.c_height
    }

    /// Two-sided escape-rate constant of the complex incarnation.
    pub fn escape_constant(&self) -> f64 {
        self.c_escape
    }

    /// True when the naive height transforms exactly (`h(f x) = d h(x)`),
    /// as for the power maps.
    pub fn is_height_exact(&self) -> bool {
        self.height_exact
    }

    /// One exact step, returning the coprime-normalized image and the
    /// positive gcd removed during normalization.
    pub fn apply_step(&self, x: &ProjPointQ) -> (ProjPointQ, BigInt) {
        let w0 = eval_form_int(&self.f, &x.a, &x.b);
        let w1 = eval_form_int(&self.g, &x.a, &x.b);
        debug_assert!(!(w0.is_zero() && w1.is_zero()));
        let g = w0.gcd(&w1);
        let point = ProjPointQ::new(&w0 / &g, &w1 / &g).expect("image is a valid point");
        (point, g)
    }

    pub fn apply(&self, x: &ProjPointQ) -> ProjPointQ {
        self.apply_step(x).0
    }

    /// Complex coefficient copy of the map, keeping the escape constant
    /// derived from exact data.
    pub fn to_complex(&self) -> Result<ComplexMap> {
        let conv = |v: &[BigInt]| -> Result<Vec<Complex64>> {
            v.iter()
                .map(|c| {
                    let (m, e) = crate::scale::split_bigint(c);
                    let x = m * exp2_i64(e) * if c.is_negative() { -1.0 } else { 1.0 };
                    if x.is_finite() {
                        Ok(Complex64::new(x, 0.0))
                    } else {
                        Err(Error::Input(
                            "coefficients exceed the double range; no complex model".into(),
                        ))
                    }
                })
                .collect()
        };
        Ok(ComplexMap {
            degree: self.degree,
            f: conv(&self.f)?,
            g: conv(&self.g)?,
            c_escape: self.c_escape,
            resultant_mag: ln_abs_bigint(&self.resultant).exp(),
        })
    }
}

/// `K = |Res| * max(l1(w_x), l1(w_y))` where `w_x`, `w_y` solve the Sylvester
/// system for the targets `x^(2d-1)` and `y^(2d-1)`; the scaled solutions
/// are the integer Bezout cofactor pairs.
fn bezout_cofactor_norm(f: &[BigInt], g: &[BigInt], d: usize, res: &BigInt) -> Result<BigRat> {
    let n = 2 * d;
    let mut m = vec![vec![BigRat::zero(); n]; n];
    for i in 0..d {
        for (k, c) in f.iter().enumerate() {
            m[i + k][i] = BigRat::from_integer(c.clone());
        }
        for (k, c) in g.iter().enumerate() {
            m[i + k][d + i] = BigRat::from_integer(c.clone());
        }
    }
    let mut e_hi = vec![BigRat::zero(); n];
    e_hi[n - 1] = BigRat::one();
    let mut e_lo = vec![BigRat::zero(); n];
    e_lo[0] = BigRat::one();
    let sols = solve_rational(m, vec![e_hi, e_lo])
        .ok_or_else(|| Error::Input("Sylvester system singular".into()))?;
    let res_rat = BigRat::from_integer(res.abs());
    let l1_hi = rat_l1(&sols[0]);
    let l1_lo = rat_l1(&sols[1]);
    Ok(&res_rat * if l1_hi >= l1_lo { &l1_hi } else { &l1_lo })
}

fn eval_form_int(coeffs: &[BigInt], a: &BigInt, b: &BigInt) -> BigInt {
    let d = coeffs.len() - 1;
    let mut apow = Vec::with_capacity(d + 1);
    apow.push(BigInt::one());
    for _ in 0..d {
        apow.push(apow.last().unwrap() * a);
    }
    let mut bpow = Vec::with_capacity(d + 1);
    bpow.push(BigInt::one());
    for _ in 0..d {
        bpow.push(bpow.last().unwrap() * b);
    }
    let mut acc = BigInt::zero();
    for (k, c) in coeffs.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        acc += c * &apow[k] * &bpow[d - k];
    }
    acc
}

// ---------------------------------------------------------------------------
// canonical heights
// ---------------------------------------------------------------------------

/// Certified enclosure of a canonical height: the true value lies in
/// `[value - radius, value + radius]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeightCertificate {
    pub value: f64,
    pub radius: f64,
    pub n_used: u32,
}

fn steps_for(c: f64, d: usize, tol: f64) -> u32 {
    if c <= 0.0 {
        return 0;
    }
    let mut tail = c / (d as f64 - 1.0);
    let mut n = 0u32;
    while tail > tol && n < 400 {
        tail /= d as f64;
        n += 1;
    }
    n
}

fn tail_after(c: f64, d: usize, n: u32) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    c / ((d as f64).powi(n as i32) * (d as f64 - 1.0))
}

/// Exact orbit repetition scan. Returns `(preperiod, period, steps_used)`.
fn detect_cycle(
    f: &RationalMapQ,
    x: &ProjPointQ,
    step_cap: u32,
    bit_budget: u64,
) -> Option<(u32, u32, u32)> {
    let mut seen: HashMap<ProjPointQ, u32> = HashMap::new();
    let mut cur = x.clone();
    for step in 0..=step_cap {
        if let Some(&j) = seen.get(&cur) {
            return Some((j, step - j, step));
        }
        if cur.bit_size() > bit_budget {
            return None;
        }
        seen.insert(cur.clone(), step);
        cur = f.apply(&cur);
    }
    None
}

/// Certified canonical height.
///
/// Preperiodic points are recognized by exact orbit repetition and return an
/// exact zero. Power-style maps with exact height transformation return the
/// naive height with zero radius. Everything else goes through the place
/// decomposition `h_hat(x) = h(x) + escape(x/||x||) - sum_p series_p(x)`,
/// whose archimedean and finite parts carry certified geometric tails.
pub fn canonical_height(f: &RationalMapQ, x: &ProjPointQ, tol: f64) -> Result<HeightCertificate> {
    if tol <= 0.0 {
        return Err(Error::Input("tolerance must be positive".into()));
    }
    if f.height_exact {
        return Ok(HeightCertificate { value: naive_height(x), radius: 0.0, n_used: 0 });
    }
    if let Some((_pre, _per, steps)) = detect_cycle(f, x, 256, 4096) {
        return Ok(HeightCertificate { value: 0.0, radius: 0.0, n_used: steps });
    }
    let slop = 5e-14 * (1.0 + f.c_escape);
    if slop > 0.2 * tol {
        return Err(Error::Input(format!(
            "tolerance {tol:e} is below the certification floor for this map"
        )));
    }
    let d = f.degree;
    let cm = f.to_complex()?;

    let n_arch = steps_for(f.c_escape, d, 0.4 * tol);
    let (vx, vy, ln_norm) = x.unit_pair();
    let arch_sum = cm.escape_sum_from_unit(vx, vy, n_arch)?;
    let arch_tail = tail_after(f.c_escape, d, n_arch);

    let mut fin = 0.0;
    let mut fin_tail = 0.0;
    let mut n_max = n_arch;
    if !f.bad_primes.is_empty() {
        let budget_p = 0.4 * tol / f.bad_primes.len() as f64;
        for (p, e) in &f.bad_primes {
            let c_p = (*e as f64) * ln_abs_bigint(p);
            let n_p = steps_for(c_p, d, budget_p);
            fin += local_series_sum(f, x, p, *e, n_p);
            fin_tail += tail_after(c_p, d, n_p);
            n_max = n_max.max(n_p);
        }
    }

    Ok(HeightCertificate {
        value: ln_norm + arch_sum - fin,
        radius: arch_tail + fin_tail + slop,
        n_used: n_max,
    })
}

/// Reference implementation by literal exact iteration: the value is
/// `d^-n h(f^n x)` with `n` fixed by the geometric tail. Coordinate sizes
/// double every step, so the per-coordinate bit budget caps what this can
/// reach; the place decomposition in [`canonical_height`] is the practical
/// path.
pub fn canonical_height_by_iteration(
    f: &RationalMapQ,
    x: &ProjPointQ,
    tol: f64,
    bit_budget: u64,
) -> Result<HeightCertificate> {
    if tol <= 0.0 {
        return Err(Error::Input("tolerance must be positive".into()));
    }
    let d = f.degree;
    let n = steps_for(f.c_height, d, tol);
    let mut cur = x.clone();
    for k in 0..n {
        if cur.bit_size() > bit_budget {
            return Err(Error::Resource {
                msg: format!("coordinates exceeded {bit_budget} bits during iteration"),
                partial: k,
            });
        }
        cur = f.apply(&cur);
    }
    Ok(HeightCertificate {
        value: naive_height(&cur) / (d as f64).powi(n as i32),
        radius: tail_after(f.c_height, d, n),
        n_used: n,
    })
}

/// Outcome of a preperiodicity test.
#[derive(Clone, Debug)]
pub enum PreperiodicDecision {
    Yes { period: u32, preperiod: u32 },
    No { certificate: HeightCertificate },
    Undecided,
}

/// Exact orbit repetition within `orbit_cap` steps decides yes; a canonical
/// height certificate strictly above zero decides no; otherwise undecided.
pub fn is_preperiodic(
    f: &RationalMapQ,
    x: &ProjPointQ,
    orbit_cap: u32,
) -> Result<PreperiodicDecision> {
    if orbit_cap < 1 {
        return Err(Error::Input("orbit cap must be at least 1".into()));
    }
    // Preperiodic orbits have bounded coordinates; once a coordinate passes
    // the bit budget the orbit is escaping and the height certificate decides.
    if let Some((pre, per, _)) = detect_cycle(f, x, orbit_cap, 1 << 14) {
        return Ok(PreperiodicDecision::Yes { period: per, preperiod: pre });
    }
    let cert = canonical_height(f, x, 1e-9)?;
    if cert.value - cert.radius > 0.0 {
        Ok(PreperiodicDecision::No { certificate: cert })
    } else {
        Ok(PreperiodicDecision::Undecided)
    }
}

// ---------------------------------------------------------------------------
// local height series at finite places
// ---------------------------------------------------------------------------

/// Partial local series `sum_{k<=n} d^-k v_p(g_k) ln p`, where `g_k` is the
/// gcd removed at step k of the exact orbit. Nonnegative and nondecreasing
/// in `n`; identically zero at primes of good reduction.
pub fn local_height_series_at_prime(
    f: &RationalMapQ,
    x: &ProjPointQ,
    p: &BigInt,
    n: u32,
) -> Result<f64> {
    if n < 1 {
        return Err(Error::Input("series length must be at least 1".into()));
    }
    if !is_prime(p) {
        return Err(Error::Input(format!("{p} is not prime")));
    }
    let e = valuation(&f.resultant, p);
    if e == 0 {
        return Ok(0.0);
    }
    Ok(local_series_sum(f, x, p, e, n))
}

/// Orbit tracking in Z/p^M: removed-gcd valuations only depend on the orbit
/// modulo a power of p, because each removed valuation is at most v_p(Res).
/// Precision erodes by at most `e` digits per step, so `M = (n+1) e + 1`
/// keeps every valuation exact through step n.
fn local_series_sum(f: &RationalMapQ, x: &ProjPointQ, p: &BigInt, e: u32, n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let ln_p = ln_abs_bigint(p);
    let m0 = (n + 1) * e + 1;
    let mut modulus = p.pow(m0);
    let mut precision = m0;
    let rem = |v: &BigInt, m: &BigInt| -> BigInt {
        let r = v % m;
        if r.is_negative() { r + m } else { r }
    };
    let mut a = rem(&x.a, &modulus);
    let mut b = rem(&x.b, &modulus);
    let mut total = 0.0;
    let mut dpow = 1.0;
    for _ in 1..=n {
        dpow *= f.degree as f64;
        let mut w0 = rem(&eval_form_int(&f.f, &a, &b), &modulus);
        let mut w1 = rem(&eval_form_int(&f.g, &a, &b), &modulus);
        let val = |w: &BigInt| -> u32 {
            if w.is_zero() { precision } else { valuation(w, p).min(precision) }
        };
        let v = val(&w0).min(val(&w1));
        debug_assert!(v <= e, "removed valuation exceeds v_p(Res)");
        if v > 0 {
            let pv = p.pow(v);
            w0 /= &pv;
            w1 /= &pv;
            modulus /= &pv;
            precision -= v;
            total += (v as f64) * ln_p / dpow;
        }
        a = rem(&w0, &modulus);
        b = rem(&w1, &modulus);
    }
    total
}

/// Exact removed-gcd trace along the true orbit; reference oracle for the
/// modular tracker (coordinates double in size per step, keep `n` small).
pub fn gcd_trace(f: &RationalMapQ, x: &ProjPointQ, n: u32) -> Vec<BigInt> {
    let mut out = Vec::with_capacity(n as usize);
    let mut cur = x.clone();
    for _ in 0..n {
        let (next, g) = f.apply_step(&cur);
        out.push(g);
        cur = next;
    }
    out
}

// ---------------------------------------------------------------------------
// complex maps and escape rates
// ---------------------------------------------------------------------------

/// A self-map of P^1(C) as a pair of complex forms with a certified
/// two-sided escape constant.
#[derive(Clone, Debug)]
pub struct ComplexMap {
    degree: usize,
    f: Vec<Complex64>,
    g: Vec<Complex64>,
    c_escape: f64,
    resultant_mag: f64,
}

/// Escape-rate value with its certificate.
#[derive(Clone, Copy, Debug)]
pub struct EscapeValue {
    pub value: f64,
    pub radius: f64,
    pub n_used: u32,
}

impl ComplexMap {
    pub fn new(f: Vec<Complex64>, g: Vec<Complex64>) -> Result<Self> {
        if f.len() != g.len() || f.len() < 3 {
            return Err(Error::Input(
                "complex maps need matching coefficient vectors of degree >= 2".into(),
            ));
        }
        if f.iter().chain(g.iter()).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Input("non-finite coefficient".into()));
        }
        let degree = f.len() - 1;
        let n = 2 * degree;
        let mut m = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for i in 0..degree {
            for (k, c) in f.iter().enumerate() {
                m[i + k][i] = *c;
            }
            for (k, c) in g.iter().enumerate() {
                m[i + k][degree + i] = *c;
            }
        }
        let lu = LuComplex::factor(m).ok_or_else(|| {
            Error::Degenerate("complex map resultant vanishes numerically".into())
        })?;
        let det_mag = lu.det_magnitude();
        if !det_mag.is_finite() || det_mag < 1e-300 {
            return Err(Error::Degenerate(
                "complex map resultant vanishes numerically".into(),
            ));
        }
        let mut e_hi = vec![Complex64::new(0.0, 0.0); n];
        e_hi[n - 1] = Complex64::new(1.0, 0.0);
        let mut e_lo = vec![Complex64::new(0.0, 0.0); n];
        e_lo[0] = Complex64::new(1.0, 0.0);
        let w_hi = lu.solve(&e_hi);
        let w_lo = lu.solve(&e_lo);
        let l1 = |v: &[Complex64]| v.iter().map(|c| c.norm()).sum::<f64>();
        let k_ratio = l1(&w_hi).max(l1(&w_lo));
        let c_up = l1(&f).max(l1(&g)).ln();
        let lower = -k_ratio.ln();
        let c_escape = (c_up.abs().max(lower.abs())) * (1.0 + 1e-9) + 1e-12;
        Ok(ComplexMap { degree, f, g, c_escape, resultant_mag: det_mag })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn escape_constant(&self) -> f64 {
        self.c_escape
    }

    pub fn resultant_magnitude(&self) -> f64 {
        self.resultant_mag
    }

    fn eval_pair(&self, x: Complex64, y: Complex64) -> (Complex64, Complex64) {
        let d = self.degree;
        let mut xp = Vec::with_capacity(d + 1);
        xp.push(Complex64::new(1.0, 0.0));
        for _ in 0..d {
            xp.push(*xp.last().unwrap() * x);
        }
        let mut yp = Vec::with_capacity(d + 1);
        yp.push(Complex64::new(1.0, 0.0));
        for _ in 0..d {
            yp.push(*yp.last().unwrap() * y);
        }
        let mut w0 = Complex64::new(0.0, 0.0);
        let mut w1 = Complex64::new(0.0, 0.0);
        for k in 0..=d {
            let basis = xp[k] * yp[d - k];
            w0 += self.f[k] * basis;
            w1 += self.g[k] * basis;
        }
        (w0, w1)
    }

    /// `sum_{k=1..n} d^-k ln ||f(v_{k-1})||` along the sup-norm-renormalized
    /// orbit of a unit vector.
    fn escape_sum_from_unit(&self, mut vx: Complex64, mut vy: Complex64, n: u32) -> Result<f64> {
        let d = self.degree as f64;
        let mut sum = 0.0;
        let mut dpow = 1.0;
        for _ in 0..n {
            dpow *= d;
            let (w0, w1) = self.eval_pair(vx, vy);
            let nm = w0.norm().max(w1.norm());
            if !nm.is_finite() || nm == 0.0 {
                return Err(Error::Numeric {
                    msg: "escape orbit hit a numerically degenerate value".into(),
                    residual: nm,
                });
            }
            sum += nm.ln() / dpow;
            vx = w0 / nm;
            vy = w1 / nm;
        }
        Ok(sum)
    }

    /// Homogeneous escape rate `G(x, y) = lim d^-n ln ||F^n(x, y)||` with a
    /// certified geometric tail. Scaling the input pair shifts the value by
    /// the log of the scale.
    pub fn escape_rate(&self, x: Complex64, y: Complex64, tol: f64) -> Result<EscapeValue> {
        if tol <= 0.0 {
            return Err(Error::Input("tolerance must be positive".into()));
        }
        let norm0 = x.norm().max(y.norm());
        if norm0 == 0.0 || !norm0.is_finite() {
            return Err(Error::Input("input pair must have finite nonzero norm".into()));
        }
        let n = steps_for(self.c_escape, self.degree, tol);
        let sum = self.escape_sum_from_unit(x / norm0, y / norm0, n)?;
        let slop = 2e-15 * (1.0 + self.c_escape) + 1e-16 * n as f64;
        Ok(EscapeValue {
            value: norm0.ln() + sum,
            radius: tail_after(self.c_escape, self.degree, n) + slop,
            n_used: n,
        })
    }
}

/// Free-function form of [`ComplexMap::escape_rate`].
pub fn archimedean_escape_rate(
    map: &ComplexMap,
    x: Complex64,
    y: Complex64,
    tol: f64,
) -> Result<EscapeValue> {
    map.escape_rate(x, y, tol)
}

/// Dense complex LU with partial pivoting, sized for Sylvester systems.
struct LuComplex {
    lu: Vec<Vec<Complex64>>,
    perm: Vec<usize>,
}

impl LuComplex {
    fn factor(mut m: Vec<Vec<Complex64>>) -> Option<Self> {
        let n = m.len();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let (pivot, mag) = (col..n)
                .map(|r| (r, m[r][col].norm()))
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())?;
            if mag == 0.0 || !mag.is_finite() {
                return None;
            }
            if pivot != col {
                m.swap(pivot, col);
                perm.swap(pivot, col);
            }
            let pv = m[col][col];
            for r in col + 1..n {
                let factor = m[r][col] / pv;
                m[r][col] = factor;
                for c in col + 1..n {
                    let sub = factor * m[col][c];
                    m[r][c] -= sub;
                }
            }
        }
        Some(LuComplex { lu: m, perm })
    }

    fn det_magnitude(&self) -> f64 {
        self.lu.iter().enumerate().map(|(i, row)| row[i].norm()).product()
    }

    fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let n = rhs.len();
        let mut x: Vec<Complex64> = self.perm.iter().map(|&i| rhs[i]).collect();
        for col in 0..n {
            for r in col + 1..n {
                let sub = self.lu[r][col] * x[col];
                x[r] -= sub;
            }
        }
        for col in (0..n).rev() {
            x[col] /= self.lu[col][col];
            for r in 0..col {
                let sub = self.lu[r][col] * x[col];
                x[r] -= sub;
            }
        }
        x
    }
}

// ---------------------------------------------------------------------------
// coordinate changes
// ---------------------------------------------------------------------------

/// Image of a point under an integer Mobius map given by a 2x2 matrix with
/// determinant +-1.
pub fn mobius_point(m: &[[BigInt; 2]; 2], x: &ProjPointQ) -> Result<ProjPointQ> {
    ProjPointQ::new(
        &m[0][0] * &x.a + &m[0][1] * &x.b,
        &m[1][0] * &x.a + &m[1][1] * &x.b,
    )
}

/// Conjugated map `phi . f . phi^-1` for an integer Mobius `phi` with
/// determinant +-1.
pub fn conjugate(f: &RationalMapQ, m: &[[BigInt; 2]; 2]) -> Result<RationalMapQ> {
    let det = &m[0][0] * &m[1][1] - &m[0][1] * &m[1][0];
    if !det.abs().is_one() {
        return Err(Error::Input("Mobius matrix must have determinant +-1".into()));
    }
    // the adjugate acts as the inverse on P^1
    let inv = [
        [m[1][1].clone(), -m[0][1].clone()],
        [-m[1][0].clone(), m[0][0].clone()],
    ];
    let fc = compose_form(&f.f, f.degree, &inv);
    let gc = compose_form(&f.g, f.degree, &inv);
    let join = |c0: &BigInt, c1: &BigInt| -> Vec<BigInt> {
        fc.iter().zip(&gc).map(|(a, b)| c0 * a + c1 * b).collect()
    };
    RationalMapQ::new(join(&m[0][0], &m[0][1]), join(&m[1][0], &m[1][1]))
}

/// Substitute `(x, y) <- (m00 x + m01 y, m10 x + m11 y)` into a binary form
/// given by its ascending coefficient vector.
fn compose_form(coeffs: &[BigInt], d: usize, m: &[[BigInt; 2]; 2]) -> Vec<BigInt> {
    let mul = |a: &[BigInt], b: &[BigInt]| -> Vec<BigInt> {
        let mut out = vec![BigInt::zero(); a.len() + b.len() - 1];
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                out[i + j] += ai * bj;
            }
        }
        out
    };
    let x_img = vec![m[0][1].clone(), m[0][0].clone()];
    let y_img = vec![m[1][1].clone(), m[1][0].clone()];
    let mut out = vec![BigInt::zero(); d + 1];
    for (k, c) in coeffs.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let mut term = vec![BigInt::one()];
        for _ in 0..k {
            term = mul(&term, &x_img);
        }
        for _ in 0..(d - k) {
            term = mul(&term, &y_img);
        }
        for (i, tc) in term.iter().enumerate() {
            out[i] += c * tc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map(f: &[i64], g: &[i64]) -> RationalMapQ {
        RationalMapQ::new(
            f.iter().map(|&c| BigInt::from(c)).collect(),
            g.iter().map(|&c| BigInt::from(c)).collect(),
        )
        .unwrap()
    }

    fn squaring() -> RationalMapQ {
        map(&[0, 0, 1], &[1, 0, 0]) // z^2
    }

    fn z2_plus_one() -> RationalMapQ {
        map(&[1, 0, 1], &[1, 0, 0]) // z^2 + 1
    }

    fn z2_plus_half() -> RationalMapQ {
        map(&[1, 0, 2], &[2, 0, 0]) // z^2 + 1/2 as (2x^2 + y^2 : 2y^2)
    }

    fn z2_minus(c: i64) -> RationalMapQ {
        map(&[-c, 0, 1], &[1, 0, 0])
    }

    fn pt(a: i64, b: i64) -> ProjPointQ {
        ProjPointQ::from_i64(a, b).unwrap()
    }

    #[test]
    fn point_normalization() {
        assert_eq!(pt(2, 4), pt(1, 2));
        assert_eq!(pt(-3, -6), pt(1, 2));
        assert_eq!(pt(5, 0), ProjPointQ::infinity());
        assert_eq!(pt(-5, 0), ProjPointQ::infinity());
        assert!(ProjPointQ::from_i64(0, 0).is_err());
    }

    #[test]
    fn apply_examples() {
        // z^2 sends [2:1] to [4:1]
        assert_eq!(squaring().apply(&pt(2, 1)), pt(4, 1));
        // z^2+1 sends [1:2] to [5:4]
        assert_eq!(z2_plus_one().apply(&pt(1, 2)), pt(5, 4));
        // z^2 + 1/2 sends [1:1] to [3:2] with removed gcd 1
        let (img, g) = z2_plus_half().apply_step(&pt(1, 1));
        assert_eq!(img, pt(3, 2));
        assert!(g.is_one());
    }

    #[test]
    fn naive_height_examples() {
        assert_eq!(naive_height(&ProjPointQ::infinity()), 0.0);
        assert!((naive_height(&pt(3, 2)) - 3f64.ln()).abs() < 1e-15);
        assert!((naive_height(&pt(41, 16)) - 41f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn iteration_constant_bounds_height_jump() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for f in [squaring(), z2_plus_one(), z2_plus_half()] {
            let c = f.iteration_constant();
            assert!(c >= 0.0);
            for _ in 0..10_000 {
                let a = rng.gen_range(-1000i64..=1000);
                let b = rng.gen_range(-1000i64..=1000);
                if a == 0 && b == 0 {
                    continue;
                }
                let x = pt(a, b);
                let hx = naive_height(&x);
                let hfx = naive_height(&f.apply(&x));
                assert!(
                    (hfx - 2.0 * hx).abs() <= c + 1e-9,
                    "|h(fx) - 2h(x)| = {} > C = {}",
                    (hfx - 2.0 * hx).abs(),
                    c
                );
            }
        }
    }

    #[test]
    fn squaring_constant_is_zero() {
        let f = squaring();
        assert_eq!(f.iteration_constant(), 0.0);
        assert!(f.is_height_exact());
    }

    #[test]
    fn z2_plus_one_constant_at_most_two_log_two() {
        let f = z2_plus_one();
        assert!(f.iteration_constant() <= 2.0 * 2f64.ln() + 1e-9);
    }

    #[test]
    fn canonical_height_power_map_is_exact() {
        let f = squaring();
        let cert = canonical_height(&f, &pt(2, 1), 1e-12).unwrap();
        assert_eq!(cert.value, 2f64.ln());
        assert_eq!(cert.radius, 0.0);
        // paper-anchored value: the squaring map at 4 has height log 4
        let cert4 = canonical_height(&f, &pt(4, 1), 1e-12).unwrap();
        assert_eq!(cert4.value, 4f64.ln());
    }

    #[test]
    fn canonical_height_zero_on_periodic_orbit() {
        // 0 -> -1 -> 0 under z^2 - 1
        let f = z2_minus(1);
        let cert = canonical_height(&f, &pt(0, 1), 1e-12).unwrap();
        assert_eq!(cert.value, 0.0);
        assert_eq!(cert.radius, 0.0);
    }

    #[test]
    fn preperiodicity_decisions() {
        match is_preperiodic(&z2_minus(1), &pt(0, 1), 64).unwrap() {
            PreperiodicDecision::Yes { period, preperiod } => {
                assert_eq!((period, preperiod), (2, 0));
            }
            other => panic!("expected yes, got {other:?}"),
        }
        match is_preperiodic(&z2_minus(2), &pt(0, 1), 64).unwrap() {
            PreperiodicDecision::Yes { period, preperiod } => {
                assert_eq!((period, preperiod), (1, 2));
            }
            other => panic!("expected yes, got {other:?}"),
        }
        match is_preperiodic(&squaring(), &pt(2, 1), 64).unwrap() {
            PreperiodicDecision::No { certificate } => {
                assert!((certificate.value - 2f64.ln()).abs() < 1e-9);
            }
            other => panic!("expected no, got {other:?}"),
        }
        match is_preperiodic(&z2_plus_one(), &pt(0, 1), 64).unwrap() {
            PreperiodicDecision::No { certificate } => {
                assert!(certificate.value - certificate.radius > 0.0);
            }
            other => panic!("expected no, got {other:?}"),
        }
    }

    #[test]
    fn decomposition_matches_exact_iteration_at_loose_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for f in [z2_plus_one(), z2_plus_half(), z2_minus(3)] {
            for _ in 0..25 {
                let a = rng.gen_range(-30i64..=30);
                let b = rng.gen_range(1i64..=30);
                let x = pt(a, b);
                let loose = canonical_height_by_iteration(&f, &x, 5e-3, 1 << 16).unwrap();
                let tight = canonical_height(&f, &x, 1e-10).unwrap();
                assert!(
                    (loose.value - tight.value).abs() <= loose.radius + tight.radius,
                    "iteration {} vs decomposition {} (radius {})",
                    loose.value,
                    tight.value,
                    loose.radius + tight.radius
                );
            }
        }
    }

    #[test]
    fn iteration_budget_reports_partial_progress() {
        let f = z2_plus_one();
        let err = canonical_height_by_iteration(&f, &pt(7, 3), 1e-12, 512).unwrap_err();
        match err {
            Error::Resource { partial, .. } => assert!(partial > 0),
            other => panic!("expected resource error, got {other}"),
        }
    }

    #[test]
    fn functional_equation_within_certificates() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for f in [z2_plus_one(), z2_plus_half(), z2_minus(2)] {
            for _ in 0..20 {
                let a = rng.gen_range(-20i64..=20);
                let b = rng.gen_range(1i64..=20);
                let x = pt(a, b);
                let hx = canonical_height(&f, &x, 1e-10).unwrap();
                let hfx = canonical_height(&f, &f.apply(&x), 1e-10).unwrap();
                assert!(
                    (hfx.value - 2.0 * hx.value).abs() <= hfx.radius + 2.0 * hx.radius + 1e-9,
                    "functional equation broken: {} vs {}",
                    hfx.value,
                    2.0 * hx.value
                );
            }
        }
    }

    #[test]
    fn nonnegativity_of_certificates() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for f in [z2_plus_one(), z2_plus_half()] {
            for _ in 0..50 {
                let a = rng.gen_range(-50i64..=50);
                let b = rng.gen_range(1i64..=50);
                let cert = canonical_height(&f, &pt(a, b), 1e-9).unwrap();
                assert!(cert.value + cert.radius >= 0.0);
            }
        }
    }

    #[test]
    fn local_series_good_reduction_is_zero() {
        // z^2+1 has resultant 1: every prime has good reduction
        let f = z2_plus_one();
        assert!(f.bad_primes().is_empty());
        let v = local_height_series_at_prime(&f, &pt(3, 5), &BigInt::from(2), 10).unwrap();
        assert_eq!(v, 0.0);
        let v = local_height_series_at_prime(&f, &pt(3, 5), &BigInt::from(7), 10).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn local_series_matches_exact_gcd_trace() {
        let f = z2_plus_half();
        for (a, b) in [(1i64, 1i64), (1, 2), (3, 4), (7, 5)] {
            let x = pt(a, b);
            let n = 8u32;
            let trace = gcd_trace(&f, &x, n);
            let p = BigInt::from(2);
            let exact: f64 = trace
                .iter()
                .enumerate()
                .map(|(k, g)| {
                    let v = if g.is_one() { 0 } else { valuation(g, &p) };
                    (v as f64) * 2f64.ln() / 2f64.powi(k as i32 + 1)
                })
                .sum();
            let tracked = local_height_series_at_prime(&f, &x, &p, n).unwrap();
            assert!(
                (exact - tracked).abs() < 1e-12,
                "gcd trace {exact} vs tracker {tracked} at ({a}, {b})"
            );
        }
    }

    #[test]
    fn local_series_positive_limit_for_z2_plus_half() {
        let f = z2_plus_half();
        let v = local_height_series_at_prime(&f, &pt(1, 1), &BigInt::from(2), 30).unwrap();
        // v_2(g_k) = 1 for k >= 2: sum = ln 2 * (1/4 + 1/8 + ...) = ln 2 / 2
        assert!((v - 2f64.ln() / 2.0).abs() < 1e-6);
        // nondecreasing in n
        let shorter = local_height_series_at_prime(&f, &pt(1, 1), &BigInt::from(2), 5).unwrap();
        assert!(shorter <= v + 1e-15);
    }

    #[test]
    fn local_series_rejects_composite_modulus() {
        let f = z2_plus_half();
        assert!(local_height_series_at_prime(&f, &pt(1, 1), &BigInt::from(6), 4).is_err());
    }

    #[test]
    fn place_decomposition_identity() {
        // h_hat = naive + escape(unit) - sum_p series_p, checked through the
        // public pieces against the certified height
        let f = z2_plus_half();
        let cm = f.to_complex().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let a = rng.gen_range(-40i64..=40);
            let b = rng.gen_range(1i64..=40);
            let x = pt(a, b);
            let cert = canonical_height(&f, &x, 1e-10).unwrap();
            let (vx, vy, ln_norm) = x.unit_pair();
            let esc = cm.escape_rate(vx, vy, 1e-12).unwrap();
            let fin = local_height_series_at_prime(&f, &x, &BigInt::from(2), 40).unwrap();
            let recombined = ln_norm + esc.value - fin;
            assert!(
                (cert.value - recombined).abs() <= 1e-8,
                "decomposition mismatch: {} vs {}",
                cert.value,
                recombined
            );
        }
    }

    #[test]
    fn escape_rate_examples() {
        // squaring map at 4: log 4
        let cm = squaring().to_complex().unwrap();
        let v = cm
            .escape_rate(Complex64::new(4.0, 0.0), Complex64::new(1.0, 0.0), 1e-12)
            .unwrap();
        assert!((v.value - 4f64.ln()).abs() < 1e-12);
        // points on the unit circle have zero escape
        let z = Complex64::from_polar(1.0, 0.77);
        let v = cm.escape_rate(z, Complex64::new(1.0, 0.0), 1e-12).unwrap();
        assert!(v.value.abs() < 1e-12);
    }

    #[test]
    fn escape_rate_large_parameter_asymptotics() {
        // z^2 + t at |t| = 10^6: G(0) = (1/2) log|t| + O(1)
        let t = 1e6;
        let cm = ComplexMap::new(
            vec![
                Complex64::new(t, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        )
        .unwrap();
        let v = cm
            .escape_rate(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), 1e-9)
            .unwrap();
        assert!((v.value - 0.5 * t.ln()).abs() < 2.0);
    }

    #[test]
    fn complex_map_rejects_degenerate_forms() {
        // F = G = x y
        let xy = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        assert!(ComplexMap::new(xy.clone(), xy).is_err());
    }

    #[test]
    fn conjugation_preserves_preperiodicity_decisions() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let maps = [z2_minus(1), z2_plus_one(), z2_minus(2)];
        for f in &maps {
            for _ in 0..8 {
                let s = rng.gen_range(-2i64..=2);
                let t = rng.gen_range(-2i64..=2);
                let m = [
                    [BigInt::from(1), BigInt::from(s)],
                    [BigInt::from(t), BigInt::from(1 + s * t)],
                ];
                let fc = conjugate(f, &m).unwrap();
                for (a, b) in [(0i64, 1i64), (1, 1), (2, 1), (1, 2)] {
                    let x = pt(a, b);
                    let y = mobius_point(&m, &x).unwrap();
                    let dx = is_preperiodic(f, &x, 128).unwrap();
                    let dy = is_preperiodic(&fc, &y, 128).unwrap();
                    let as_flag = |d: &PreperiodicDecision| match d {
                        PreperiodicDecision::Yes { .. } => 1,
                        PreperiodicDecision::No { .. } => 0,
                        PreperiodicDecision::Undecided => 2,
                    };
                    assert_eq!(as_flag(&dx), as_flag(&dy), "conjugation changed the decision");
                }
            }
        }
    }

    #[test]
    fn conjugated_map_matches_pointwise() {
        let f = z2_plus_one();
        let m = [
            [BigInt::from(1), BigInt::from(1)],
            [BigInt::from(0), BigInt::from(1)],
        ];
        let fc = conjugate(&f, &m).unwrap();
        for (a, b) in [(0i64, 1i64), (1, 1), (3, 2), (1, 0)] {
            let x = pt(a, b);
            let lhs = fc.apply(&mobius_point(&m, &x).unwrap());
            let rhs = mobius_point(&m, &f.apply(&x)).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn resultant_of_z2_plus_half_model() {
        assert_eq!(z2_plus_half().resultant().abs(), BigInt::from(16));
        let bp = z2_plus_half().bad_primes().to_vec();
        assert_eq!(bp, vec![(BigInt::from(2), 4)]);
    }
}
