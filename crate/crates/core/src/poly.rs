//! Exact univariate polynomials over the rationals, resultants of binary
//! forms, primitive pseudo-remainder gcds and squarefree parts.
//!
//! Coefficients are stored lowest degree first with no trailing zeros; the
//! zero polynomial is the empty coefficient vector. A homogeneous binary
//! form of degree `d` is represented by the same ascending vector, entry `k`
//! being the coefficient of `x^k y^(d-k)`, so the dehomogenization `y = 1`
//! is the identity on coefficient vectors.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;

use crate::error::{Error, Result};
use crate::scale::bigrat_to_f64;

/// Exact rational scalar; reduced form with positive denominator is
/// maintained by the underlying implementation.
pub type BigRat = BigRational;

fn rat_i64(n: i64) -> BigRat {
    BigRat::from_integer(BigInt::from(n))
}

/// Dense polynomial over the rationals.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct PolyQ {
    coeffs: Vec<BigRat>,
}

impl PolyQ {
    pub fn new(mut coeffs: Vec<BigRat>) -> Self {
        while coeffs.last().map_or(false, Zero::is_zero) {
            coeffs.pop();
        }
        PolyQ { coeffs }
    }

    pub fn zero() -> Self {
        PolyQ { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        PolyQ::constant(BigRat::one())
    }

    pub fn constant(c: BigRat) -> Self {
        PolyQ::new(vec![c])
    }

    /// The variable `t`.
    pub fn var() -> Self {
        PolyQ::new(vec![BigRat::zero(), BigRat::one()])
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        PolyQ::new(coeffs.iter().map(|&c| rat_i64(c)).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[BigRat] {
        &self.coeffs
    }

    /// Coefficient of `t^k`, zero-padded beyond the degree.
    pub fn coeff(&self, k: usize) -> BigRat {
        self.coeffs.get(k).cloned().unwrap_or_else(BigRat::zero)
    }

    pub fn leading(&self) -> Option<&BigRat> {
        self.coeffs.last()
    }

    pub fn eval(&self, t: &BigRat) -> BigRat {
        let mut acc = BigRat::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * t + c;
        }
        acc
    }

    /// Horner evaluation with coefficients rounded to doubles. Adequate for
    /// the low-degree polynomials appearing in family data; large-degree
    /// evaluations go through the scale-safe path in `cpoly`.
    pub fn eval_complex(&self, t: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * t + bigrat_to_f64(c);
        }
        acc
    }

    pub fn derivative(&self) -> PolyQ {
        if self.coeffs.len() <= 1 {
            return PolyQ::zero();
        }
        PolyQ::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * rat_i64(k as i64))
                .collect(),
        )
    }

    pub fn scale(&self, s: &BigRat) -> PolyQ {
        PolyQ::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Positive rational `c` with `self = c * primitive(self)`; zero for the
    /// zero polynomial.
    pub fn content(&self) -> BigRat {
        if self.is_zero() {
            return BigRat::zero();
        }
        let mut num_gcd = BigInt::zero();
        let mut den_lcm = BigInt::one();
        for c in &self.coeffs {
            num_gcd = num_gcd.gcd(c.numer());
            den_lcm = den_lcm.lcm(c.denom());
        }
        BigRat::new(num_gcd, den_lcm)
    }

    /// Integer-coprime coefficients with positive leading coefficient.
    pub fn primitive(&self) -> PolyQ {
        if self.is_zero() {
            return PolyQ::zero();
        }
        let c = self.content();
        let mut p = self.scale(&(BigRat::one() / c));
        if p.leading().map_or(false, Signed::is_negative) {
            p = p.scale(&rat_i64(-1));
        }
        p
    }

    /// True division; errors when the remainder is nonzero.
    pub fn exact_div(&self, d: &PolyQ) -> Result<PolyQ> {
        let (q, r) = self.div_rem(d)?;
        if !r.is_zero() {
            return Err(Error::Input("polynomial division leaves a remainder".into()));
        }
        Ok(q)
    }

    pub fn div_rem(&self, d: &PolyQ) -> Result<(PolyQ, PolyQ)> {
        let dd = d
            .degree()
            .ok_or_else(|| Error::Input("division by the zero polynomial".into()))?;
        let lead = d.leading().unwrap().clone();
        let mut rem = self.coeffs.clone();
        if rem.len() < dd + 1 {
            return Ok((PolyQ::zero(), self.clone()));
        }
        let qlen = rem.len() - dd;
        let mut q = vec![BigRat::zero(); qlen];
        for i in (0..qlen).rev() {
            let c = &rem[i + dd] / &lead;
            if !c.is_zero() {
                for (j, dc) in d.coeffs.iter().enumerate() {
                    let t = &c * dc;
                    rem[i + j] = &rem[i + j] - t;
                }
            }
            q[i] = c;
        }
        Ok((PolyQ::new(q), PolyQ::new(rem)))
    }

    pub fn mul_ref(&self, other: &PolyQ) -> PolyQ {
        if self.is_zero() || other.is_zero() {
            return PolyQ::zero();
        }
        let mut out = vec![BigRat::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                out[i + j] = &out[i + j] + a * b;
            }
        }
        PolyQ::new(out)
    }

    pub fn add_ref(&self, other: &PolyQ) -> PolyQ {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            out.push(self.coeff(k) + other.coeff(k));
        }
        PolyQ::new(out)
    }

    pub fn sub_ref(&self, other: &PolyQ) -> PolyQ {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            out.push(self.coeff(k) - other.coeff(k));
        }
        PolyQ::new(out)
    }

    pub fn neg_ref(&self) -> PolyQ {
        PolyQ::new(self.coeffs.iter().map(|c| -c.clone()).collect())
    }

    /// Sum of `|c_k|` as an exact rational.
    pub fn l1_norm(&self) -> BigRat {
        self.coeffs
            .iter()
            .fold(BigRat::zero(), |acc, c| acc + c.abs())
    }
}

impl fmt::Debug for PolyQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}*t")?,
                _ => write!(f, "{c}*t^{k}")?,
            }
        }
        Ok(())
    }
}

impl std::ops::Add for &PolyQ {
    type Output = PolyQ;
    fn add(self, rhs: &PolyQ) -> PolyQ {
        self.add_ref(rhs)
    }
}

impl std::ops::Sub for &PolyQ {
    type Output = PolyQ;
    fn sub(self, rhs: &PolyQ) -> PolyQ {
        self.sub_ref(rhs)
    }
}

impl std::ops::Mul for &PolyQ {
    type Output = PolyQ;
    fn mul(self, rhs: &PolyQ) -> PolyQ {
        self.mul_ref(rhs)
    }
}

// ---------------------------------------------------------------------------
// gcd and squarefree part
// ---------------------------------------------------------------------------

/// Pseudo-remainder of `a` by `b` (requires `deg b >= 0`).
fn pseudo_rem(a: &PolyQ, b: &PolyQ) -> PolyQ {
    let db = b.degree().unwrap();
    let lead = b.leading().unwrap().clone();
    let mut r = a.clone();
    while let Some(dr) = r.degree() {
        if dr < db {
            break;
        }
        // r <- lead*r - lc(r)*t^(dr-db)*b
        let lc = r.leading().unwrap().clone();
        let mut next = vec![BigRat::zero(); dr + 1];
        for (k, c) in r.coeffs().iter().enumerate() {
            next[k] = c * &lead;
        }
        for (k, c) in b.coeffs().iter().enumerate() {
            let idx = k + dr - db;
            next[idx] = &next[idx] - &lc * c;
        }
        r = PolyQ::new(next);
    }
    r
}

/// Modular probe: `Some(true)` when the two primitive integer polynomials
/// are provably coprime, `Some(false)` when the probe found a common factor
/// mod p (inconclusive about the rational gcd), `None` when the prime was
/// unusable for these inputs.
fn coprime_mod_prime(a: &PolyQ, b: &PolyQ, p: u64) -> Option<bool> {
    let reduce = |poly: &PolyQ| -> Option<Vec<u64>> {
        let mut out = Vec::with_capacity(poly.coeffs().len());
        for c in poly.coeffs() {
            let num = c.numer();
            let den = c.denom();
            let dm = (den % BigInt::from(p)).magnitude().to_u64_digits();
            let dm = *dm.first().unwrap_or(&0);
            if dm == 0 {
                return None;
            }
            let nm_big = num % BigInt::from(p);
            let mut nm = *nm_big.magnitude().to_u64_digits().first().unwrap_or(&0);
            if num.is_negative() && nm != 0 {
                nm = p - nm;
            }
            out.push(mulmod(nm, inv_mod(dm, p)?, p));
        }
        while out.last() == Some(&0) {
            out.pop();
        }
        Some(out)
    };
    let mut fa = reduce(a)?;
    let mut fb = reduce(b)?;
    // leading coefficients must survive the reduction
    if fa.len() != a.coeffs().len() || fb.len() != b.coeffs().len() {
        return None;
    }
    while !fb.is_empty() {
        fa = poly_mod_rem(&fa, &fb, p);
        std::mem::swap(&mut fa, &mut fb);
    }
    Some(fa.len() == 1)
}

fn poly_mod_rem(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let inv_lead = inv_mod(b[db], p).expect("leading coefficient invertible");
    while r.len() > db {
        let dr = r.len() - 1;
        let c = mulmod(r[dr], inv_lead, p);
        if c != 0 {
            for (k, &bc) in b.iter().enumerate() {
                let idx = k + dr - db;
                let sub = mulmod(c, bc, p);
                r[idx] = (r[idx] + p - sub) % p;
            }
        }
        r.pop();
        while r.last() == Some(&0) {
            r.pop();
        }
        if r.is_empty() {
            break;
        }
    }
    r
}

fn mulmod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn inv_mod(a: u64, p: u64) -> Option<u64> {
    if a == 0 {
        return None;
    }
    // Fermat; p is prime
    let mut result = 1u64;
    let mut base = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            result = mulmod(result, base, p);
        }
        base = mulmod(base, base, p);
        e >>= 1;
    }
    Some(result)
}

/// Primitive gcd over the rationals (positive leading coefficient), computed
/// with a primitive pseudo-remainder sequence. Two modular probes short-cut
/// the common coprime case before any big-coefficient work.
pub fn poly_gcd(a: &PolyQ, b: &PolyQ) -> PolyQ {
    if a.is_zero() {
        return b.primitive();
    }
    if b.is_zero() {
        return a.primitive();
    }
    let mut p = a.primitive();
    let mut q = b.primitive();
    if p.degree() < q.degree() {
        std::mem::swap(&mut p, &mut q);
    }
    if q.degree() == Some(0) {
        return PolyQ::one();
    }
    for prime in [2_305_843_009_213_693_951u64, 2_147_483_647u64] {
        if coprime_mod_prime(&p, &q, prime) == Some(true) {
            return PolyQ::one();
        }
    }
    loop {
        let r = pseudo_rem(&p, &q);
        if r.is_zero() {
            return q.primitive();
        }
        if r.degree() == Some(0) {
            return PolyQ::one();
        }
        p = q;
        q = r.primitive();
    }
}

/// `p / gcd(p, p')`: same roots, multiplicity one, primitive.
pub fn squarefree_part(p: &PolyQ) -> Result<PolyQ> {
    if p.is_zero() {
        return Err(Error::Input("squarefree part of the zero polynomial".into()));
    }
    if p.degree() == Some(0) {
        return Ok(PolyQ::one());
    }
    let g = poly_gcd(p, &p.derivative());
    if g.degree() == Some(0) {
        return Ok(p.primitive());
    }
    Ok(p.exact_div(&g)?.primitive())
}

// ---------------------------------------------------------------------------
// resultants
// ---------------------------------------------------------------------------

/// Sylvester matrix of two binary forms of common degree `d`, given by
/// ascending coefficient vectors (length at most `d + 1`).
fn sylvester(f: &PolyQ, g: &PolyQ, d: usize) -> Vec<Vec<BigRat>> {
    let n = 2 * d;
    let mut m = vec![vec![BigRat::zero(); n]; n];
    let desc = |p: &PolyQ, k: usize| -> BigRat {
        // descending entry k is the coefficient of x^(d-k) y^k
        p.coeff(d - k)
    };
    for row in 0..d {
        for k in 0..=d {
            m[row][row + k] = desc(f, k);
        }
    }
    for row in 0..d {
        for k in 0..=d {
            m[d + row][row + k] = desc(g, k);
        }
    }
    m
}

/// Exact determinant by fraction-full Gaussian elimination.
fn det_rational(mut m: Vec<Vec<BigRat>>) -> BigRat {
    let n = m.len();
    let mut det = BigRat::one();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero());
        let pivot = match pivot {
            Some(p) => p,
            None => return BigRat::zero(),
        };
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        let pv = m[col][col].clone();
        det = det * &pv;
        for r in col + 1..n {
            if m[r][col].is_zero() {
                continue;
            }
            let factor = &m[r][col] / &pv;
            for c in col..n {
                let t = &factor * &m[col][c];
                m[r][c] = &m[r][c] - t;
            }
        }
    }
    det
}

/// Solve the square rational system `M x = rhs` for several right-hand
/// sides; `None` when singular.
pub(crate) fn solve_rational(
    mut m: Vec<Vec<BigRat>>,
    mut rhs: Vec<Vec<BigRat>>,
) -> Option<Vec<Vec<BigRat>>> {
    let n = m.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero())?;
        if pivot != col {
            m.swap(pivot, col);
            rhs.iter_mut().for_each(|v| v.swap(pivot, col));
        }
        let pv = m[col][col].clone();
        for c in col..n {
            m[col][c] = &m[col][c] / &pv;
        }
        for v in rhs.iter_mut() {
            v[col] = &v[col] / &pv;
        }
        for r in 0..n {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let factor = m[r][col].clone();
            for c in col..n {
                let t = &factor * &m[col][c];
                m[r][c] = &m[r][c] - t;
            }
            for v in rhs.iter_mut() {
                let t = &factor * &v[col];
                v[r] = &v[r] - t;
            }
        }
    }
    Some(rhs)
}

/// Sylvester resultant of two binary forms of declared common degree `d`.
///
/// Zero exactly when the forms share a projective root. The declared degree
/// matters: trailing zero coefficients represent powers of `y`.
pub fn resultant(f: &PolyQ, g: &PolyQ, d: usize) -> Result<BigRat> {
    if d == 0 {
        return Err(Error::Input("resultant requires degree >= 1".into()));
    }
    if f.degree().map_or(false, |df| df > d) || g.degree().map_or(false, |dg| dg > d) {
        return Err(Error::Input(format!(
            "form degree exceeds declared degree {d}"
        )));
    }
    Ok(det_rational(sylvester(f, g, d)))
}

/// Resultant of two binary forms whose coefficients are polynomials in a
/// parameter, as an exact polynomial in that parameter.
///
/// Computed by exact evaluation at `bound + 1` integer parameters followed by
/// Lagrange interpolation, where `bound` is the degree bound
/// `d * (max deg f_coeff + max deg g_coeff)`.
pub fn resultant_poly(f: &[PolyQ], g: &[PolyQ], d: usize) -> Result<PolyQ> {
    if f.len() != d + 1 || g.len() != d + 1 {
        return Err(Error::Input(
            "coefficient lists must have length degree + 1".into(),
        ));
    }
    let max_deg = |coeffs: &[PolyQ]| {
        coeffs
            .iter()
            .filter_map(|p| p.degree())
            .max()
            .unwrap_or(0)
    };
    let bound = d * (max_deg(f) + max_deg(g));
    let mut xs = Vec::with_capacity(bound + 1);
    let mut ys = Vec::with_capacity(bound + 1);
    for i in 0..=bound {
        let t = rat_i64(i as i64);
        let fv = PolyQ::new(f.iter().map(|p| p.eval(&t)).collect());
        let gv = PolyQ::new(g.iter().map(|p| p.eval(&t)).collect());
        ys.push(resultant(&fv, &gv, d)?);
        xs.push(t);
    }
    Ok(lagrange_interpolate(&xs, &ys))
}

/// Exact polynomial through the given points (Newton divided differences).
pub fn lagrange_interpolate(xs: &[BigRat], ys: &[BigRat]) -> PolyQ {
    let n = xs.len();
    if n == 0 {
        return PolyQ::zero();
    }
    // divided-difference table
    let mut coef = ys.to_vec();
    for j in 1..n {
        for i in (j..n).rev() {
            let num = &coef[i] - &coef[i - 1];
            let den = &xs[i] - &xs[i - j];
            coef[i] = num / den;
        }
    }
    // Horner expansion of the Newton form
    let mut p = PolyQ::zero();
    for i in (0..n).rev() {
        let lin = PolyQ::new(vec![-xs[i].clone(), BigRat::one()]);
        p = &p.mul_ref(&lin) + &PolyQ::constant(coef[i].clone());
        if i == 0 {
            break;
        }
    }
    p
}
