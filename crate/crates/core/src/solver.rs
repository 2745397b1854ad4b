//! Gradient descent with a backtracking (Armijo) line search.
//!
//! Each iteration tries a Barzilai-Borwein step length first and halves it
//! until the sufficient-decrease condition holds, so the objective sequence is
//! nonincreasing. Close to the minimiser the achievable decrease drops below
//! the rounding error of `f`; there a step is also accepted when `f` does not
//! rise by more than that rounding slack and the gradient norm shrinks.
//!
//! Nothing here assumes convexity. Failures are reported through
//! [`SolveStatus`], never by panicking.

use serde::{Deserialize, Serialize};

/// A differentiable objective `f: R^p -> R`.
pub trait Objective {
    fn dim(&self) -> usize;

    /// Returns `f(theta)` and writes `grad f(theta)` into `grad`.
    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> f64;
}

/// Adapter turning a closure into an [`Objective`].
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) -> f64> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) -> f64> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        (self.f)(theta, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Stop once `||grad f||_2 <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Upper bound on the trial step length.
    pub max_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 10_000, max_step: 1e3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    /// No acceptable step length was found.
    LineSearchFailed,
    /// The objective or its gradient was NaN or infinite.
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub theta_hat: Vec<f64>,
    pub converged: bool,
    pub status: SolveStatus,
    pub grad_norm: f64,
    pub iterations: usize,
    pub objective_value: f64,
}

const ARMIJO_C1: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;

pub fn minimize<O: Objective + ?Sized>(
    objective: &O,
    theta0: &[f64],
    options: &SolverOptions,
) -> SolveReport {
    let p = theta0.len();
    debug_assert_eq!(p, objective.dim());
    let mut x = theta0.to_vec();
    let mut g = vec![0.0; p];
    let mut f = objective.eval(&x, &mut g);
    let mut gnorm = norm(&g);

    let report = |x: Vec<f64>, f: f64, gnorm: f64, iterations: usize, status: SolveStatus| SolveReport {
        converged: status == SolveStatus::Converged,
        theta_hat: x,
        status,
        grad_norm: gnorm,
        iterations,
        objective_value: f,
    };

    if !(f.is_finite() && gnorm.is_finite()) {
        return report(x, f, gnorm, 0, SolveStatus::NonFinite);
    }

    let mut x_new = vec![0.0; p];
    let mut g_new = vec![0.0; p];
    let mut trial = (1.0 / gnorm.max(1.0)).min(options.max_step);
    let mut iterations = 0;

    loop {
        if gnorm <= options.tol {
            return report(x, f, gnorm, iterations, SolveStatus::Converged);
        }
        if iterations >= options.max_iter {
            return report(x, f, gnorm, iterations, SolveStatus::MaxIterations);
        }

        let slack = 8.0 * f64::EPSILON * (1.0 + f.abs());
        let mut alpha = trial;
        let mut saw_finite = false;
        let (f_next, gnorm_next) = loop {
            for i in 0..p {
                x_new[i] = x[i] - alpha * g[i];
            }
            let fv = objective.eval(&x_new, &mut g_new);
            let gn = norm(&g_new);
            if fv.is_finite() && gn.is_finite() {
                saw_finite = true;
                let armijo = fv <= f - ARMIJO_C1 * alpha * gnorm * gnorm;
                let rounding = fv <= f + slack && gn < gnorm;
                if armijo || rounding {
                    break (fv, gn);
                }
            }
            alpha *= 0.5;
            if alpha < MIN_STEP {
                let status =
                    if saw_finite { SolveStatus::LineSearchFailed } else { SolveStatus::NonFinite };
                return report(x, f, gnorm, iterations, status);
            }
        };
        debug_assert!(f_next <= f + slack, "objective increased: {f} -> {f_next}");

        // Barzilai-Borwein length s's / s'y for the next trial step.
        let (mut ss, mut sy) = (0.0, 0.0);
        for i in 0..p {
            let s = x_new[i] - x[i];
            ss += s * s;
            sy += s * (g_new[i] - g[i]);
        }
        trial = if sy > 0.0 { ss / sy } else { 2.0 * alpha };
        trial = trial.clamp(MIN_STEP * 1e4, options.max_step);

        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_next;
        gnorm = gnorm_next;
        iterations += 1;
    }
}

#[inline]
pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
