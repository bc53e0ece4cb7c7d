//! Generic optimization primitives: bisection, BFGS quasi-Newton with a
//! strong-Wolfe cubic line search, and a log-barrier Newton loop for smooth
//! inequality-constrained problems.
//!
//! Gradients and Hessians are obtained by central finite differences unless a
//! caller supplies its own oracle; the objectives in this crate are smooth in
//! the continuous variables once the integer matrices are frozen.

use alloc::vec;
use alloc::vec::Vec;

use super::linalg::{cholesky, solve_spd};
use super::{Matrix, NumericsError};
use crate::math;

/// Why an optimizer run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    ToleranceMet,
    MaxIterations,
    LineSearchFailed,
}

/// Summary of an optimizer run.
#[derive(Debug, Clone)]
pub struct OptimizerReport {
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub termination_reason: TerminationReason,
}

impl OptimizerReport {
    fn new(iterations: usize, final_objective: f64, reason: TerminationReason) -> Self {
        Self {
            iterations,
            converged: reason == TerminationReason::ToleranceMet,
            final_objective,
            termination_reason: reason,
        }
    }
}

/// Wolfe line-search constants, `0 < c1 < c2 < 1`.
#[derive(Debug, Clone, Copy)]
pub struct WolfeParams {
    pub c1: f64,
    pub c2: f64,
}

impl Default for WolfeParams {
    fn default() -> Self {
        Self { c1: 1e-4, c2: 0.9 }
    }
}

/// Scalar root bracketing by interval halving.
///
/// Returns `x` with `|f(x)| <= eps` or bracket width `<= eps`, after at most
/// `max_iter` halvings. The bracket endpoints must straddle a sign change.
pub fn bisection<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    eps: f64,
    max_iter: usize,
) -> Result<f64, NumericsError> {
    assert!(eps > 0.0, "eps must be positive");
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let flo = f(lo);
    if flo == 0.0 {
        return Ok(lo);
    }
    let fhi = f(hi);
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo * fhi > 0.0 {
        return Err(NumericsError::NoSignChange);
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..max_iter {
        mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if math::abs(fm) <= eps || (hi - lo) <= eps {
            return Ok(mid);
        }
        if fm * flo < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(mid)
}

/// Central finite-difference gradient with per-coordinate step
/// `1e-6 * (1 + |x_i|)`. Steps shrink when a probe leaves the objective's
/// domain (non-finite value).
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let mut h = 1e-6 * (1.0 + math::abs(x[i]));
        let mut d = f64::NAN;
        for _ in 0..8 {
            xp[i] = x[i] + h;
            let fp = f(&xp);
            xp[i] = x[i] - h;
            let fm = f(&xp);
            xp[i] = x[i];
            d = (fp - fm) / (2.0 * h);
            if d.is_finite() {
                break;
            }
            h *= 0.1;
        }
        g[i] = d;
    }
    g
}

/// Central finite-difference Hessian (symmetric), step `1e-4 * (1 + |x_i|)`.
pub fn fd_hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Matrix {
    let n = x.len();
    let f0 = f(x);
    let steps: Vec<f64> = x.iter().map(|&xi| 1e-4 * (1.0 + math::abs(xi))).collect();
    let mut h = Matrix::zeros(n, n);
    let mut xp = x.to_vec();
    for i in 0..n {
        let hi = steps[i];
        xp[i] = x[i] + hi;
        let fp = f(&xp);
        xp[i] = x[i] - hi;
        let fm = f(&xp);
        xp[i] = x[i];
        h[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in (i + 1)..n {
            let hj = steps[j];
            xp[i] = x[i] + hi;
            xp[j] = x[j] + hj;
            let fpp = f(&xp);
            xp[j] = x[j] - hj;
            let fpm = f(&xp);
            xp[i] = x[i] - hi;
            xp[j] = x[j] + hj;
            let fmp = f(&xp);
            xp[j] = x[j] - hj;
            let fmm = f(&xp);
            xp[i] = x[i];
            xp[j] = x[j];
            let v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, &x| m.max(math::abs(x)))
}

/// Minimizer of the cubic through `(a0, f0, g0)` and `(a1, f1, g1)`;
/// `None` when the interpolant has no interior minimizer.
fn cubic_minimizer(a0: f64, f0: f64, g0: f64, a1: f64, f1: f64, g1: f64) -> Option<f64> {
    let d1 = g0 + g1 - 3.0 * (f0 - f1) / (a0 - a1);
    let disc = d1 * d1 - g0 * g1;
    if disc < 0.0 {
        return None;
    }
    let sign = if a1 >= a0 { 1.0 } else { -1.0 };
    let d2 = sign * math::sqrt(disc);
    let denom = g1 - g0 + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let t = a1 - (a1 - a0) * (g1 + d2 - d1) / denom;
    if t.is_finite() {
        Some(t)
    } else {
        None
    }
}

struct LineProbe {
    a: f64,
    value: f64,
    slope: f64,
}

/// Strong-Wolfe line search (bracket then zoom with cubic interpolation).
/// Returns the accepted step length, or `None` after the probe budget.
fn wolfe_line_search<F, G>(
    f: &F,
    grad: &G,
    x: &[f64],
    p: &[f64],
    f0: f64,
    slope0: f64,
    wolfe: WolfeParams,
) -> Option<f64>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let probe = |a: f64| -> LineProbe {
        let xa: Vec<f64> = x.iter().zip(p).map(|(xi, pi)| xi + a * pi).collect();
        let value = f(&xa);
        let slope = dot(&grad(&xa), p);
        LineProbe { a, value, slope }
    };
    let zoom = |mut lo: LineProbe, mut hi: LineProbe| -> Option<f64> {
        for _ in 0..30 {
            let width = math::abs(hi.a - lo.a);
            if width <= 1e-14 * (1.0 + math::abs(lo.a)) {
                return None;
            }
            let mut a = cubic_minimizer(lo.a, lo.value, lo.slope, hi.a, hi.value, hi.slope)
                .unwrap_or(0.5 * (lo.a + hi.a));
            // Keep the trial safely interior to the bracket.
            let (bl, bh) = if lo.a < hi.a { (lo.a, hi.a) } else { (hi.a, lo.a) };
            if !(a > bl + 0.1 * width && a < bh - 0.1 * width) {
                a = 0.5 * (lo.a + hi.a);
            }
            let t = probe(a);
            if !t.value.is_finite() || t.value > f0 + wolfe.c1 * t.a * slope0 || t.value >= lo.value
            {
                hi = t;
            } else {
                if math::abs(t.slope) <= -wolfe.c2 * slope0 {
                    return Some(t.a);
                }
                if t.slope * (hi.a - lo.a) >= 0.0 {
                    hi = lo;
                }
                lo = t;
            }
        }
        None
    };

    let mut prev = LineProbe {
        a: 0.0,
        value: f0,
        slope: slope0,
    };
    let mut a = 1.0;
    for i in 0..20 {
        let t = probe(a);
        if !t.value.is_finite()
            || t.value > f0 + wolfe.c1 * a * slope0
            || (t.value >= prev.value && i > 0)
        {
            return zoom(prev, t);
        }
        if math::abs(t.slope) <= -wolfe.c2 * slope0 {
            return Some(a);
        }
        if t.slope >= 0.0 {
            return zoom(t, prev);
        }
        a = (2.0 * a).min(1e6);
        prev = t;
    }
    None
}

/// BFGS quasi-Newton minimization with a cubic line search satisfying the
/// strong Wolfe conditions.
///
/// Stops when the gradient infinity-norm drops to `tol`; a failed line search
/// is reported through [`TerminationReason::LineSearchFailed`] together with
/// the best point reached, so callers can restart from fresh initializations.
pub fn bfgs_minimize<F, G>(
    f: F,
    grad: G,
    x0: &[f64],
    wolfe: WolfeParams,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, OptimizerReport)
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    assert!(
        0.0 < wolfe.c1 && wolfe.c1 < wolfe.c2 && wolfe.c2 < 1.0,
        "require 0 < c1 < c2 < 1"
    );
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut g = grad(&x);
    let mut h = Matrix::identity(n);
    let mut first_update = true;

    for k in 0..max_iter {
        if inf_norm(&g) <= tol {
            return (
                x,
                OptimizerReport::new(k, fx, TerminationReason::ToleranceMet),
            );
        }
        let mut p: Vec<f64> = h.mul_vec(&g).iter().map(|v| -v).collect();
        let mut slope = dot(&g, &p);
        if !(slope < 0.0) {
            // Curvature information went bad; restart from steepest descent.
            h = Matrix::identity(n);
            first_update = true;
            p = g.iter().map(|v| -v).collect();
            slope = dot(&g, &p);
            if !(slope < 0.0) {
                return (
                    x,
                    OptimizerReport::new(k, fx, TerminationReason::LineSearchFailed),
                );
            }
        }
        let Some(alpha) = wolfe_line_search(&f, &grad, &x, &p, fx, slope, wolfe) else {
            return (
                x,
                OptimizerReport::new(k, fx, TerminationReason::LineSearchFailed),
            );
        };
        let s: Vec<f64> = p.iter().map(|pi| alpha * pi).collect();
        let x_new: Vec<f64> = x.iter().zip(&s).map(|(xi, si)| xi + si).collect();
        let g_new = grad(&x_new);
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let ys = dot(&y, &s);
        let y_norm_sq = dot(&y, &y);
        if ys > 1e-12 * math::sqrt(y_norm_sq * dot(&s, &s)).max(1e-300) {
            if first_update {
                // Scale the initial inverse Hessian before the first update.
                h = Matrix::identity(n).scale(ys / y_norm_sq);
                first_update = false;
            }
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / ys;
            let hy = h.mul_vec(&y);
            let yhy = dot(&y, &hy);
            let mut h_next = h.clone();
            for i in 0..n {
                for j in 0..n {
                    h_next[(i, j)] += -rho * (s[i] * hy[j] + hy[i] * s[j])
                        + rho * rho * yhy * s[i] * s[j]
                        + rho * s[i] * s[j];
                }
            }
            h = h_next;
        }
        x = x_new;
        fx = f(&x);
        g = g_new;
    }
    (
        x,
        OptimizerReport::new(max_iter, fx, TerminationReason::MaxIterations),
    )
}

/// Log-barrier interior-point minimization of `objective` subject to
/// `constraints(x)[i] <= 0` for all `i`.
///
/// Each centering step minimizes `objective(x) - (1/θ) Σ log(-g_i(x))` with a
/// damped Newton iteration (finite-difference derivatives, Levenberg shift on
/// factorization failure); the outer loop multiplies `θ` by `eta` until
/// `m / θ < eps` with `m` the number of constraints. `x0` must be strictly
/// feasible.
pub fn barrier_newton<F, G>(
    objective: F,
    constraints: G,
    x0: &[f64],
    theta0: f64,
    eta: f64,
    eps: f64,
) -> Result<(Vec<f64>, OptimizerReport), NumericsError>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    assert!(theta0 > 0.0, "theta0 must be positive");
    assert!(eta > 1.0, "eta must exceed 1");
    assert!(eps > 0.0, "eps must be positive");
    let g0 = constraints(x0);
    if g0.iter().any(|&gi| gi >= 0.0) {
        return Err(NumericsError::InfeasibleStart);
    }
    let m = g0.len();
    let n = x0.len();
    let inner_tol = 1e-6;
    let max_inner = 100;

    let mut x = x0.to_vec();
    let mut theta = theta0;
    let mut outer = 0usize;
    loop {
        outer += 1;
        let barrier = |pt: &[f64]| -> f64 {
            let gs = constraints(pt);
            let mut phi = 0.0;
            for gi in gs {
                if gi >= 0.0 {
                    return f64::INFINITY;
                }
                phi -= math::ln(-gi);
            }
            objective(pt) + phi / theta
        };
        // Damped Newton centering.
        for _ in 0..max_inner {
            let grad = fd_gradient(&barrier, &x);
            if !grad.iter().all(|v| v.is_finite()) {
                break;
            }
            if inf_norm(&grad) <= inner_tol {
                break;
            }
            let hess = fd_hessian(&barrier, &x);
            let mut lambda = 1e-8;
            let mut step: Option<Vec<f64>> = None;
            while lambda <= 1e10 {
                let mut damped = hess.clone();
                for i in 0..n {
                    damped[(i, i)] += lambda;
                }
                if cholesky(&damped).is_ok() {
                    let rhs = Matrix::column(&grad.iter().map(|v| -v).collect::<Vec<f64>>());
                    if let Ok(sol) = solve_spd(&damped, &rhs) {
                        let s = sol.col(0);
                        if s.iter().all(|v| v.is_finite()) {
                            step = Some(s);
                            break;
                        }
                    }
                }
                lambda *= 10.0;
            }
            let Some(p) = step else { break };
            let h_here = barrier(&x);
            let slope = dot(&grad, &p);
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let cand: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + t * pi).collect();
                let h_cand = barrier(&cand);
                if h_cand.is_finite() && h_cand <= h_here + 1e-4 * t * slope {
                    x = cand;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if (m as f64) / theta < eps {
            let fx = objective(&x);
            return Ok((
                x,
                OptimizerReport::new(outer, fx, TerminationReason::ToleranceMet),
            ));
        }
        theta *= eta;
    }
}
