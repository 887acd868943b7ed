//! A small sequential quadratic programming solver for problems with a smooth
//! objective and at most a handful of inequality constraints c_j(x) ≥ 0.
//!
//! Each iteration solves the quadratic model
//! min ½pᵀBp + ∇fᵀp subject to c + Ap ≥ 0 exactly by enumerating active sets,
//! takes a backtracking step on the ℓ1 merit function f + μ·Σ max(0, −c_j), and
//! updates B by damped BFGS on the Lagrangian gradient. Constraint Jacobians come
//! from central finite differences.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop once the step changes the objective (or moves x) by less than this and
    /// the total constraint violation is below it too.
    pub ftol: f64,
    /// Central finite-difference step for constraint gradients.
    pub fd_eps: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            ftol: 1e-3,
            fd_eps: 1e-3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || !(self.ftol > 0.0) || !(self.fd_eps > 0.0) {
            return Err(Error::Invalid(format!(
                "solver parameters must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

pub trait Problem {
    fn dim(&self) -> usize;
    /// Objective value and gradient.
    fn objective(&self, x: &[f64]) -> (f64, Vec<f64>);
    /// Constraint values; feasible means every entry ≥ 0.
    fn constraints(&self, x: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqpOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    pub constraints: Vec<f64>,
    /// Σ max(0, −c_j) at `x`.
    pub violation: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `violation` ≤ ftol.
    pub feasible: bool,
}

fn violation(c: &[f64]) -> f64 {
    c.iter().map(|v| (-v).max(0.0)).sum()
}

fn jacobian<P: Problem + ?Sized>(problem: &P, x: &[f64], m: usize, h: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut a = DMatrix::zeros(m, n);
    let mut probe = x.to_vec();
    for i in 0..n {
        probe[i] = x[i] + h;
        let up = problem.constraints(&probe);
        probe[i] = x[i] - h;
        let down = problem.constraints(&probe);
        probe[i] = x[i];
        for j in 0..m {
            a[(j, i)] = (up[j] - down[j]) / (2.0 * h);
        }
    }
    a
}

struct QpStep {
    p: DVector<f64>,
    lambda: DVector<f64>,
}

/// Solves min ½pᵀBp + gᵀp s.t. c + Ap ≥ 0 for small m by trying every active set.
/// Falls back to a minimum-norm restoration step when the linearization is
/// inconsistent.
fn solve_qp(b: &DMatrix<f64>, g: &DVector<f64>, a: &DMatrix<f64>, c: &DVector<f64>) -> QpStep {
    let m = c.len();
    let chol = b
        .clone()
        .cholesky()
        .expect("BFGS matrix stays positive definite");
    let binv_g = chol.solve(g);
    let mut best: Option<(f64, QpStep)> = None;
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|j| mask & (1 << j) != 0).collect();
        let mut lambda = DVector::zeros(m);
        let p = if active.is_empty() {
            -&binv_g
        } else {
            let a_s = DMatrix::from_fn(active.len(), a.ncols(), |r, k| a[(active[r], k)]);
            let c_s = DVector::from_fn(active.len(), |r, _| c[active[r]]);
            let binv_at = chol.solve(&a_s.transpose());
            let gram = &a_s * &binv_at;
            let rhs = &a_s * &binv_g - c_s;
            let Some(l) = gram.lu().solve(&rhs) else {
                continue;
            };
            if l.iter().any(|v| !v.is_finite() || *v < 0.0) {
                continue;
            }
            for (r, &j) in active.iter().enumerate() {
                lambda[j] = l[r];
            }
            binv_at * l - &binv_g
        };
        let lin = c + a * &p;
        let slack = 1e-10 * (1.0 + c.amax());
        if lin.iter().any(|v| *v < -slack) {
            continue;
        }
        let q = 0.5 * p.dot(&(b * &p)) + g.dot(&p);
        if best.as_ref().is_none_or(|(bq, _)| q < *bq) {
            best = Some((q, QpStep { p, lambda }));
        }
    }
    if let Some((_, step)) = best {
        return step;
    }
    // Restoration: the least-norm p driving the violated linearized constraints to 0.
    let violated: Vec<usize> = (0..m)
        .filter(|&j| c[j] < 0.0 && a.row(j).norm() > 0.0)
        .collect();
    if violated.is_empty() {
        return QpStep {
            p: -binv_g,
            lambda: DVector::zeros(m),
        };
    }
    let a_v = DMatrix::from_fn(violated.len(), a.ncols(), |r, k| a[(violated[r], k)]);
    let c_v = DVector::from_fn(violated.len(), |r, _| -c[violated[r]]);
    let p = a_v
        .clone()
        .pseudo_inverse(1e-12)
        .map(|pinv| pinv * c_v)
        .unwrap_or_else(|_| -binv_g);
    QpStep {
        p,
        lambda: DVector::zeros(m),
    }
}

const ARMIJO: f64 = 1e-4;
/// The quadratic model asks for c + Ap ≥ TARGET_MARGIN·ftol rather than ≥ 0: hard-decision
/// constraints are step functions, and aiming exactly at the boundary lands on the
/// wrong side about half the time.
const TARGET_MARGIN: f64 = 0.5;
const MAX_HALVINGS: usize = 20;
const RESTORATION_TRIALS: usize = 6;

/// Minimizes `problem` from `x0`. Returns the best iterate with violation within
/// `ftol` (lowest objective), or else the least-violating iterate.
pub fn minimize<P: Problem + ?Sized>(
    problem: &P,
    x0: &[f64],
    config: &SolverConfig,
) -> Result<SqpOutcome> {
    config.validate()?;
    let n = problem.dim();
    if x0.len() != n {
        return Err(Error::Invalid(format!(
            "start point has {} entries, problem has {n}",
            x0.len()
        )));
    }
    let mut x = DVector::from_column_slice(x0);
    let (mut f, grad) = problem.objective(x.as_slice());
    let mut g = DVector::from_vec(grad);
    let mut c_vec = problem.constraints(x.as_slice());
    let m = c_vec.len();
    let mut c = DVector::from_column_slice(&c_vec);
    let mut a = jacobian(problem, x.as_slice(), m, config.fd_eps);
    let mut b = DMatrix::<f64>::identity(n, n);
    let mut mu = 1.0f64;

    let snapshot = |x: &DVector<f64>, f: f64, c: &[f64], it: usize, converged: bool| SqpOutcome {
        x: x.as_slice().to_vec(),
        objective: f,
        constraints: c.to_vec(),
        violation: violation(c),
        iterations: it,
        converged,
        feasible: violation(c) <= config.ftol,
    };
    let mut best = snapshot(&x, f, &c_vec, 0, false);
    let keep_best = |cand: SqpOutcome, best: &mut SqpOutcome| {
        let better = match (cand.feasible, best.feasible) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => cand.objective < best.objective,
            (false, false) => cand.violation < best.violation,
        };
        if better {
            *best = cand;
        }
    };

    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=config.max_iterations {
        iterations = it;
        let target = TARGET_MARGIN * config.ftol;
        let step = solve_qp(&b, &g, &a, &c.add_scalar(-target));
        if !step.p.iter().all(|v| v.is_finite()) {
            break;
        }
        if step.p.norm() <= f64::EPSILON * (1.0 + x.norm()) {
            converged = violation(c.as_slice()) < config.ftol;
            break;
        }
        mu = mu.max(1.5 * step.lambda.amax());
        let viol = violation(c.as_slice());
        let merit = f + mu * viol;
        let slope = g.dot(&step.p) - mu * viol;

        let mut alpha = 1.0;
        let mut accepted: Option<Trial> = None;
        for _ in 0..MAX_HALVINGS {
            let x_new = &x + alpha * &step.p;
            let (f_new, g_new) = problem.objective(x_new.as_slice());
            let c_new = problem.constraints(x_new.as_slice());
            let merit_new = f_new + mu * violation(&c_new);
            let ok = if slope < 0.0 {
                merit_new <= merit + ARMIJO * alpha * slope
            } else {
                merit_new < merit
            };
            if ok && f_new.is_finite() {
                accepted = Some((x_new, f_new, g_new, c_new));
                break;
            }
            alpha *= 0.5;
        }
        if accepted.is_none() && viol > config.ftol {
            accepted = restore(problem, &x, &a, &c, viol, target);
        }
        let Some((x_new, f_new, g_new, c_new)) = accepted else {
            // a stale curvature model is the usual culprit; retry once from the identity
            if b != DMatrix::identity(n, n) {
                b = DMatrix::identity(n, n);
                continue;
            }
            break;
        };

        let g_new = DVector::from_vec(g_new);
        let a_new = jacobian(problem, x_new.as_slice(), m, config.fd_eps);
        let s = &x_new - &x;
        let lag = |g: &DVector<f64>, a: &DMatrix<f64>| g - a.transpose() * &step.lambda;
        let y = lag(&g_new, &a_new) - lag(&g, &a);
        damped_bfgs(&mut b, &s, &y);

        let df = (f_new - f).abs();
        let viol_new = violation(&c_new);
        x = x_new;
        f = f_new;
        g = g_new;
        a = a_new;
        c_vec = c_new;
        c = DVector::from_column_slice(&c_vec);
        keep_best(snapshot(&x, f, &c_vec, it, false), &mut best);
        if viol_new < config.ftol && (df < config.ftol || s.norm() < config.ftol) {
            converged = true;
            break;
        }
    }
    best.iterations = iterations;
    best.converged = converged;
    Ok(best)
}

type Trial = (DVector<f64>, f64, Vec<f64>, Vec<f64>);

/// Feasibility restoration after a failed line search: the least-norm step that
/// drives the violated linearized constraints to `target`, tried at growing
/// multiples until the true violation drops.
fn restore<P: Problem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    a: &DMatrix<f64>,
    c: &DVector<f64>,
    viol: f64,
    target: f64,
) -> Option<Trial> {
    let violated: Vec<usize> = (0..c.len())
        .filter(|&j| c[j] < 0.0 && a.row(j).norm() > 0.0)
        .collect();
    if violated.is_empty() {
        return None;
    }
    let a_v = DMatrix::from_fn(violated.len(), a.ncols(), |r, k| a[(violated[r], k)]);
    let rhs = DVector::from_fn(violated.len(), |r, _| target - c[violated[r]]);
    let p = a_v.pseudo_inverse(1e-12).ok()? * rhs;
    let mut scale = 1.0;
    for _ in 0..RESTORATION_TRIALS {
        let x_new = x + scale * &p;
        let c_new = problem.constraints(x_new.as_slice());
        if violation(&c_new) < viol {
            let (f_new, g_new) = problem.objective(x_new.as_slice());
            if f_new.is_finite() {
                return Some((x_new, f_new, g_new, c_new));
            }
        }
        scale *= 2.0;
    }
    None
}

/// Powell-damped BFGS update keeping `b` positive definite.
fn damped_bfgs(b: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let bs = &*b * s;
    let sbs = s.dot(&bs);
    if !(sbs > 0.0) || !sbs.is_finite() {
        return;
    }
    let sy = s.dot(y);
    let theta = if sy >= 0.2 * sbs {
        1.0
    } else {
        0.8 * sbs / (sbs - sy)
    };
    let r = theta * y + (1.0 - theta) * &bs;
    let sr = s.dot(&r);
    if !(sr > 0.0) || !sr.is_finite() {
        return;
    }
    let updated = &*b - (&bs * bs.transpose()) / sbs + (&r * r.transpose()) / sr;
    if updated.iter().all(|v| v.is_finite()) && updated.clone().cholesky().is_some() {
        *b = updated;
    }
}
