//! Bound-constrained limited-memory quasi-Newton minimizer.
//!
//! The inverse Hessian is never formed: search directions come from the
//! two-loop recursion over the last `m` curvature pairs. Box constraints are
//! handled by gradient projection — iterates are projected onto the box,
//! direction components pushing into an active bound are zeroed, and
//! curvature pairs that violate `s.y > 0` are dropped. The bisecting
//! backtracking line search enforces sufficient decrease on the projected
//! step and, on unclamped steps, the weak curvature condition, so accepted
//! pairs almost always carry positive curvature. Convergence is declared
//! when the infinity norm of the projected gradient `x - P(x - g)` falls
//! below the tolerance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimizer hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Curvature-pair history size.
    pub memory: usize,
    /// Projected-gradient infinity-norm tolerance.
    pub grad_tol: f64,
    pub max_iters: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { memory: 10, grad_tol: 1e-8, max_iters: 500 }
    }
}

/// One line of the convergence log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub objective: f64,
    pub proj_grad_norm: f64,
}

/// Successful minimization outcome.
#[derive(Debug, Clone)]
pub struct Convergence {
    pub x: Vec<f64>,
    pub f: f64,
    pub iters: usize,
    pub history: Vec<IterRecord>,
}

const ARMIJO_C1: f64 = 1e-4;
const WOLFE_C2: f64 = 0.9;
const MIN_STEP: f64 = 1e-20;
const MAX_LINE_SEARCH: usize = 60;
/// Relative curvature threshold for accepting an (s, y) pair.
const CURVATURE_EPS: f64 = 1e-12;
/// Objective decrease below this relative floor counts as stagnation; a few
/// consecutive stagnating steps terminate the run as converged at machine
/// precision even if the gradient tolerance was set below what double
/// arithmetic can resolve for the given objective.
const F_STAGNATION_REL: f64 = 1e2 * f64::EPSILON;
const STAGNATION_LIMIT: usize = 3;

fn project(x: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    x.iter().zip(bounds).map(|(v, (lo, hi))| v.clamp(*lo, *hi)).collect()
}

fn proj_grad_inf_norm(x: &[f64], g: &[f64], bounds: &[(f64, f64)]) -> f64 {
    x.iter()
        .zip(g)
        .zip(bounds)
        .map(|((xi, gi), (lo, hi))| (xi - (xi - gi).clamp(*lo, *hi)).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Apply the implicit inverse Hessian to `g` via the two-loop recursion.
fn two_loop(g: &[f64], pairs: &[(Vec<f64>, Vec<f64>)]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y) in pairs.iter().rev() {
        let rho = 1.0 / dot(s, y);
        let alpha = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= alpha * yi;
        }
        alphas.push((alpha, rho));
    }
    // scale by the most recent curvature estimate
    if let Some((s, y)) = pairs.last() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y), (alpha, rho)) in pairs.iter().zip(alphas.into_iter().rev()) {
        let beta = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (alpha - beta) * si;
        }
    }
    q
}

/// Minimize `f` over the box, starting from `x0` (projected inside if
/// necessary). `bounds` pairs may use infinities for unbounded coordinates.
pub fn minimize<F, G>(
    mut f: F,
    mut grad: G,
    x0: &[f64],
    bounds: &[(f64, f64)],
    cfg: &OptimizerConfig,
) -> Result<Convergence>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    if x0.len() != bounds.len() {
        return Err(Error::invalid(format!(
            "x0 has dimension {} but bounds have {}",
            x0.len(),
            bounds.len()
        )));
    }
    for (lo, hi) in bounds {
        // also rejects NaN bounds, which compare false both ways
        if lo.partial_cmp(hi) != Some(std::cmp::Ordering::Less) && lo != hi {
            return Err(Error::invalid(format!("bad bound [{lo}, {hi}]")));
        }
    }
    if cfg.memory == 0 || cfg.grad_tol <= 0.0 {
        return Err(Error::invalid("optimizer needs memory >= 1 and grad_tol > 0"));
    }

    let mut x = project(x0, bounds);
    let mut fx = f(&x);
    let mut g = grad(&x);
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut history = Vec::new();
    let mut stagnant = 0usize;

    for iter in 0..cfg.max_iters {
        let pg = proj_grad_inf_norm(&x, &g, bounds);
        history.push(IterRecord { iter, objective: fx, proj_grad_norm: pg });
        if pg <= cfg.grad_tol {
            return Ok(Convergence { x, f: fx, iters: iter, history });
        }

        let mut d: Vec<f64> = two_loop(&g, &pairs).iter().map(|v| -v).collect();
        // drop components that push into an active bound
        for ((di, xi), (lo, hi)) in d.iter_mut().zip(&x).zip(bounds) {
            if (*xi <= *lo && *di < 0.0) || (*xi >= *hi && *di > 0.0) {
                *di = 0.0;
            }
        }
        // fall back to the projected steepest descent direction when the
        // quasi-Newton direction is not a descent direction
        if dot(&d, &g) >= 0.0 || d.iter().all(|v| *v == 0.0) {
            d = x
                .iter()
                .zip(&g)
                .zip(bounds)
                .map(|((xi, gi), (lo, hi))| (xi - gi).clamp(*lo, *hi) - xi)
                .collect();
        }

        // bisecting backtracking: shrink until sufficient decrease holds,
        // then grow unclamped steps that are still too short for the weak
        // curvature condition
        let gd = dot(&g, &d);
        let mut alpha = 1.0;
        let (mut alpha_lo, mut alpha_hi) = (0.0, f64::INFINITY);
        let mut accepted: Option<(Vec<f64>, f64, Vec<f64>)> = None;
        for _ in 0..MAX_LINE_SEARCH {
            let trial: Vec<f64> =
                project(&x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect::<Vec<_>>(), bounds);
            let disp: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if disp.iter().all(|v| *v == 0.0) {
                break;
            }
            let f_trial = f(&trial);
            if f_trial > fx + ARMIJO_C1 * dot(&g, &disp) {
                alpha_hi = alpha;
                alpha = 0.5 * (alpha_lo + alpha_hi);
                if alpha < MIN_STEP {
                    break;
                }
                continue;
            }
            let clamped = disp
                .iter()
                .zip(&d)
                .any(|(real, di)| (real - alpha * di).abs() > 1e-14 * di.abs().max(1.0));
            let g_trial = grad(&trial);
            if !clamped && dot(&g_trial, &d) < WOLFE_C2 * gd {
                // decrease is fine but the step is too short: keep it as the
                // fallback and probe a longer one
                accepted = Some((trial, f_trial, g_trial));
                alpha_lo = alpha;
                alpha = if alpha_hi.is_finite() { 0.5 * (alpha_lo + alpha_hi) } else { 2.0 * alpha };
                continue;
            }
            accepted = Some((trial, f_trial, g_trial));
            break;
        }

        let (x_new, f_new, g_new) = match accepted {
            Some(v) => v,
            None => {
                // no acceptable step along d: memory is stale, restart it
                if pairs.is_empty() {
                    return Err(Error::NoConvergence {
                        iters: iter,
                        best_f: fx,
                        best_x: x,
                        history,
                    });
                }
                pairs.clear();
                continue;
            }
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let s_norm = dot(&s, &s).sqrt();
        let y_norm = dot(&y, &y).sqrt();
        if sy > CURVATURE_EPS * s_norm * y_norm {
            pairs.push((s, y));
            if pairs.len() > cfg.memory {
                pairs.remove(0);
            }
        }
        if fx - f_new <= F_STAGNATION_REL * fx.abs().max(f_new.abs()).max(1.0) {
            stagnant += 1;
        } else {
            stagnant = 0;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        if stagnant >= STAGNATION_LIMIT {
            let pg = proj_grad_inf_norm(&x, &g, bounds);
            history.push(IterRecord { iter: iter + 1, objective: fx, proj_grad_norm: pg });
            return Ok(Convergence { x, f: fx, iters: iter + 1, history });
        }
    }

    let pg = proj_grad_inf_norm(&x, &g, bounds);
    if pg <= cfg.grad_tol {
        let iters = cfg.max_iters;
        history.push(IterRecord { iter: iters, objective: fx, proj_grad_norm: pg });
        return Ok(Convergence { x, f: fx, iters, history });
    }
    Err(Error::NoConvergence { iters: cfg.max_iters, best_f: fx, best_x: x, history })
}
