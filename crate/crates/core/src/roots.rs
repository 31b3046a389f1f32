//! Simultaneous polynomial root finding (Aberth-Ehrlich iteration).
//!
//! No deflation: all roots are refined together, which keeps accuracy for
//! the moderately high degrees produced by preperiodic-parameter
//! polynomials. The iteration core is generic over the Newton-ratio
//! evaluator, so callers with a better-conditioned way to evaluate the same
//! root function (orbit recursions rather than expanded coefficients) can
//! plug it in. Multiple roots converge linearly and are merged by a
//! post-clustering pass at relative radius 1e-8.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cpoly::PolyC;
use crate::error::{Error, Result};
use crate::scale::exp2_i64;

const MAX_ITER: usize = 1000;
const CLUSTER_RADIUS: f64 = 1e-8;
/// Sweeps without a 5% improvement before the iteration is declared
/// stagnant (noise floor reached) and judged on residuals alone.
const STAGNATION_WINDOW: usize = 40;

/// Roots with per-root relative residual certificates.
#[derive(Clone, Debug)]
pub struct FoundRoots {
    pub roots: Vec<Complex64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Newton-ratio source for the Aberth engine.
pub(crate) trait AberthEval {
    /// `p(z) / p'(z)` (any well-scaled surrogate with the same zeros).
    fn newton_ratio(&self, z: Complex64) -> Complex64;
    /// Relative residual used for stopping and certificates.
    fn residual(&self, z: Complex64) -> f64;
}

/// Expanded-coefficient evaluator with scale-tracked Horner; residuals are
/// backward errors relative to `sum_k |c_k| |z|^k`.
pub(crate) struct PolyEval<'a> {
    p: &'a PolyC,
    dp: PolyC,
}

impl<'a> PolyEval<'a> {
    pub(crate) fn new(p: &'a PolyC) -> Self {
        PolyEval { p, dp: p.derivative() }
    }
}

impl AberthEval for PolyEval<'_> {
    fn newton_ratio(&self, z: Complex64) -> Complex64 {
        let (mp, ep) = self.p.eval_scaled(z);
        let (md, ed) = self.dp.eval_scaled(z);
        if md.norm_sqr() == 0.0 {
            return Complex64::new(1e-12, 1e-12) * z.norm().max(1.0);
        }
        (mp / md) * exp2_i64(ep - ed)
    }

    fn residual(&self, z: Complex64) -> f64 {
        let ln_p = self.p.ln_abs(z);
        if ln_p == f64::NEG_INFINITY {
            return 0.0;
        }
        (ln_p - self.p.ln_l1_scale(z)).exp()
    }
}

/// Core Aberth-Ehrlich sweep loop. Terminates when a full sweep's
/// corrections settle near machine precision, or when progress stagnates at
/// a residual-certified noise floor; hitting the iteration cap without
/// either is a numeric error carrying the worst residual.
pub(crate) fn aberth_iterate(
    eval: &impl AberthEval,
    mut z: Vec<Complex64>,
    tol: f64,
) -> Result<(Vec<Complex64>, usize)> {
    let deg = z.len();
    let mut iterations = 0;
    let mut best_moved = f64::MAX;
    let mut stagnant = 0usize;
    let mut settled = false;
    for iter in 0..MAX_ITER {
        iterations = iter + 1;
        let mut moved = 0.0f64;
        for j in 0..deg {
            let w = eval.newton_ratio(z[j]);
            let w = if w.is_finite() { w } else { Complex64::new(1e-6, 1e-6) };
            let mut s = Complex64::new(0.0, 0.0);
            for (k, zk) in z.iter().enumerate() {
                if k != j {
                    s += 1.0 / (z[j] - zk);
                }
            }
            let denom = 1.0 - w * s;
            let correction = if denom.norm_sqr() > 0.0 { w / denom } else { w };
            z[j] -= correction;
            moved = moved.max(correction.norm() / z[j].norm().max(1.0));
        }
        if moved < 1e-13 {
            settled = true;
            break;
        }
        if moved < 0.95 * best_moved {
            best_moved = moved;
            stagnant = 0;
        } else {
            stagnant += 1;
            if stagnant >= STAGNATION_WINDOW {
                // jitter at the attainable noise floor: accept on residuals
                let worst = z.iter().map(|&r| eval.residual(r)).fold(0.0f64, f64::max);
                if worst <= tol {
                    settled = true;
                    break;
                }
                stagnant = 0;
            }
        }
    }
    if !settled {
        let worst = z.iter().map(|&r| eval.residual(r)).fold(0.0f64, f64::max);
        return Err(Error::Numeric {
            msg: format!("root finder did not settle at degree {deg}"),
            residual: worst,
        });
    }
    Ok((z, iterations))
}

/// All complex roots of `p`, with multiplicity, sorted by real then
/// imaginary part.
///
/// `tol` bounds the accepted relative residual; `seed` drives the tiny
/// angular jitter of the initial circle (symmetry breaking), so equal seeds
/// give bit-identical output.
pub fn complex_roots(p: &PolyC, tol: f64, seed: u64) -> Result<FoundRoots> {
    if tol <= 0.0 {
        return Err(Error::Input("tolerance must be positive".into()));
    }
    let deg = match p.degree() {
        None | Some(0) => {
            return Err(Error::Input("root finding requires degree >= 1".into()))
        }
        Some(d) => d,
    };
    let c = p.coeffs();
    if deg == 1 {
        let r = -c[0] / c[1];
        let eval = PolyEval::new(p);
        let residual = eval.residual(r);
        return Ok(FoundRoots { roots: vec![r], residuals: vec![residual], iterations: 0 });
    }
    if deg == 2 {
        let (a, b, c0) = (c[2], c[1], c[0]);
        let disc = (b * b - 4.0 * a * c0).sqrt();
        // stable form: avoid cancellation in -b +- disc
        let q = if (b.conj() * disc).re >= 0.0 { -(b + disc) / 2.0 } else { -(b - disc) / 2.0 };
        let mut roots = if q.norm_sqr() > 0.0 {
            vec![q / a, c0 / q]
        } else {
            vec![Complex64::new(0.0, 0.0), -b / a]
        };
        sort_roots(&mut roots);
        let eval = PolyEval::new(p);
        let residuals = roots.iter().map(|&r| eval.residual(r)).collect();
        return Ok(FoundRoots { roots, residuals, iterations: 0 });
    }

    let centroid = -c[deg - 1] / (c[deg] * deg as f64);
    let radius = fujiwara_radius(&c.iter().map(|x| x.norm()).collect::<Vec<_>>());
    let init = initial_circle(centroid, radius, deg, seed);
    let eval = PolyEval::new(p);
    let (z, iterations) = aberth_iterate(&eval, init, tol)?;

    let mut roots = cluster(z);
    sort_roots(&mut roots);
    let residuals: Vec<f64> = roots.iter().map(|&r| eval.residual(r)).collect();
    let worst = residuals.iter().copied().fold(0.0f64, f64::max);
    if worst > tol {
        return Err(Error::Numeric {
            msg: format!("residual above tolerance at degree {deg}"),
            residual: worst,
        });
    }
    Ok(FoundRoots { roots, residuals, iterations })
}

/// Fujiwara bound on root magnitude from coefficient magnitudes (ascending).
pub(crate) fn fujiwara_radius(mags: &[f64]) -> f64 {
    let deg = mags.len() - 1;
    let lead = mags[deg];
    let mut radius = 0.0f64;
    for k in 1..=deg {
        let a = mags[deg - k] / lead;
        let a = if k == deg { a / 2.0 } else { a };
        if a > 0.0 {
            radius = radius.max(2.0 * a.powf(1.0 / k as f64));
        }
    }
    if radius == 0.0 {
        1.0
    } else {
        radius
    }
}

/// Seed-jittered starting circle.
pub(crate) fn initial_circle(
    center: Complex64,
    radius: f64,
    deg: usize,
    seed: u64,
) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..deg)
        .map(|j| {
            let jitter: f64 = rng.gen_range(-0.5..0.5) / deg as f64;
            let theta = 2.0 * std::f64::consts::PI * (j as f64 + 0.35) / deg as f64 + jitter;
            center + 0.9 * radius * Complex64::new(theta.cos(), theta.sin())
        })
        .collect()
}

/// Merge root estimates closer than `CLUSTER_RADIUS * max(1, |z|)` into
/// their centroid, preserving multiplicity by repetition.
pub(crate) fn cluster(mut z: Vec<Complex64>) -> Vec<Complex64> {
    sort_roots(&mut z);
    let mut out: Vec<Complex64> = Vec::with_capacity(z.len());
    let mut i = 0;
    while i < z.len() {
        let mut j = i + 1;
        let mut sum = z[i];
        while j < z.len() {
            let scale = z[i].norm().max(1.0);
            if (z[j] - z[i]).norm() <= CLUSTER_RADIUS * scale {
                sum += z[j];
                j += 1;
            } else {
                break;
            }
        }
        let count = j - i;
        let centroid = sum / count as f64;
        for _ in 0..count {
            out.push(centroid);
        }
        i = j;
    }
    out
}

pub(crate) fn sort_roots(z: &mut [Complex64]) {
    z.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}
