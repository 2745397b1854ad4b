//! Estimators: non-private references, the robust M-estimator, the
//! perturbed M-estimator and two families of K-norm baselines.
//!
//! The K-norm baselines are stand-ins for comparison. Their sensitivities are
//! derived here from the bounded domain; they are not claimed to match any
//! particular published implementation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::loss::LossSpec;
use crate::noise::{sample_knorm, sample_l2_exponential, NoiseDraw, NormKind};
use crate::score::{dot, logistic, Family, ScoreModel};
use crate::sensitivity::{bounds_for, SensitivityBounds};
use crate::solver::{minimize, norm, Objective, SolveReport, SolveStatus, SolverOptions};

/// Pure differential privacy budget (`delta = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    epsilon: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        0.0
    }
}

/// Output of [`fit_perturbed_mestimator`] with everything needed to audit it.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivateFitResult {
    pub theta_dp: Vec<f64>,
    pub solve: SolveReport,
    pub bounds: SensitivityBounds,
    /// Ridge coefficient `2 lambda_k / epsilon`.
    pub delta_k: f64,
    pub noise: NoiseDraw,
    pub budget: PrivacyBudget,
    pub k: f64,
}

impl PrivateFitResult {
    /// The privacy guarantee requires an exact minimiser, so it is only
    /// claimed for converged solves.
    pub fn privacy_claimed(&self) -> bool {
        self.solve.converged
    }
}

/// `(1/n) sum rho_k(s(theta; d_i)) + ridge/(2n) ||theta||^2 + b'theta / n`.
struct RobustObjective<'a> {
    model: ScoreModel,
    data: &'a Dataset,
    spec: LossSpec,
    ridge: f64,
    linear: Option<&'a [f64]>,
}

impl Objective for RobustObjective<'_> {
    fn dim(&self) -> usize {
        self.data.p()
    }

    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for (x, y) in self.data.rows() {
            let prof = self.model.profile(dot(x, theta), y);
            total += self.spec.rho_unchecked(prof.score);
            let w = self.spec.psi_unchecked(prof.score) * prof.d1;
            for (g, xj) in grad.iter_mut().zip(x) {
                *g += w * xj;
            }
        }
        finish(total, grad, theta, self.data.n() as f64, self.ridge, self.linear)
    }
}

/// Mean logistic negative log-likelihood with the same optional perturbation.
struct LogisticNll<'a> {
    data: &'a Dataset,
    ridge: f64,
    linear: Option<&'a [f64]>,
}

impl Objective for LogisticNll<'_> {
    fn dim(&self) -> usize {
        self.data.p()
    }

    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for (x, y) in self.data.rows() {
            let u = dot(x, theta);
            total += softplus(u) - y * u;
            let w = logistic(u) - y;
            for (g, xj) in grad.iter_mut().zip(x) {
                *g += w * xj;
            }
        }
        finish(total, grad, theta, self.data.n() as f64, self.ridge, self.linear)
    }
}

#[inline]
fn finish(total: f64, grad: &mut [f64], theta: &[f64], n: f64, ridge: f64, linear: Option<&[f64]>) -> f64 {
    let mut value = total / n;
    for (g, t) in grad.iter_mut().zip(theta) {
        *g = *g / n + ridge / n * t;
    }
    if ridge != 0.0 {
        value += ridge / (2.0 * n) * dot(theta, theta);
    }
    if let Some(b) = linear {
        value += dot(b, theta) / n;
        for (g, bj) in grad.iter_mut().zip(b) {
            *g += bj / n;
        }
    }
    value
}

/// `ln(1 + e^u)` without overflow.
#[inline]
fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

fn check_model(model: &ScoreModel, data: &Dataset) -> Result<()> {
    check_dim(model.p(), data.p())?;
    if data.n() == 0 {
        return Err(Error::InvalidParameter("dataset is empty".into()));
    }
    Ok(())
}

fn warn_if_unconverged(what: &str, solve: &SolveReport) {
    if !solve.converged {
        log::warn!(
            "{what}: solver stopped with {:?} after {} iterations (|grad| = {:e})",
            solve.status,
            solve.iterations,
            solve.grad_norm
        );
    }
}

/// Ordinary least squares `(X'X)^{-1} X'y` through a Cholesky factorisation.
pub fn least_squares(data: &Dataset) -> Result<Vec<f64>> {
    let x = data.design_matrix();
    let xtx = x.tr_mul(&x);
    let xty = x.tr_mul(&data.response());
    let chol = xtx
        .cholesky()
        .ok_or_else(|| Error::Singular("X'X is not invertible".into()))?;
    Ok(chol.solve(&xty).iter().copied().collect())
}

/// Least squares for linear models, the maximum-likelihood estimate for
/// logistic ones. The logistic MLE does not exist on separable data; the
/// solver then runs out of iterations and the report says so.
pub fn fit_nonprivate_reference(
    model: &ScoreModel,
    data: &Dataset,
    options: &SolverOptions,
) -> Result<SolveReport> {
    check_model(model, data)?;
    match model.family() {
        Family::Linear => {
            let theta = least_squares(data)?;
            // gradient of the mean half squared residual, for the report
            let n = data.n() as f64;
            let mut grad = vec![0.0; data.p()];
            let mut value = 0.0;
            for (x, y) in data.rows() {
                let r = y - dot(x, &theta);
                value += 0.5 * r * r / n;
                for (g, xj) in grad.iter_mut().zip(x) {
                    *g -= r * xj / n;
                }
            }
            Ok(SolveReport {
                theta_hat: theta,
                converged: true,
                status: SolveStatus::Converged,
                grad_norm: norm(&grad),
                iterations: 0,
                objective_value: value,
            })
        }
        Family::Logistic => {
            let objective = LogisticNll { data, ridge: 0.0, linear: None };
            let solve = minimize(&objective, &vec![0.0; data.p()], options);
            warn_if_unconverged("logistic MLE", &solve);
            Ok(solve)
        }
    }
}

/// Non-private robust M-estimator `argmin (1/n) sum rho_k(s(theta; d_i))`.
///
/// No Fisher-consistency correction is applied.
pub fn fit_robust_mestimator(
    model: &ScoreModel,
    data: &Dataset,
    spec: &LossSpec,
    options: &SolverOptions,
) -> Result<SolveReport> {
    check_model(model, data)?;
    let objective = RobustObjective { model: *model, data, spec: *spec, ridge: 0.0, linear: None };
    let solve = minimize(&objective, &vec![0.0; data.p()], options);
    warn_if_unconverged("robust M-estimator", &solve);
    Ok(solve)
}

/// The perturbed M-estimator: objective perturbation of the RobHyt loss.
///
/// 1. `Delta_k = 2 lambda_k / epsilon`
/// 2. `b_k ~ exp(-epsilon ||b||_2 / (2 xi_k))`
/// 3. `argmin (1/n) sum rho_k(s_i) + Delta_k/(2n) ||theta||^2 + b_k'theta / n`
///
/// Data outside the bounded domain is refused, since the bounds `xi_k`,
/// `lambda_k` would not hold for it.
pub fn fit_perturbed_mestimator<R: Rng + ?Sized>(
    model: &ScoreModel,
    data: &Dataset,
    spec: &LossSpec,
    budget: &PrivacyBudget,
    rng: &mut R,
    options: &SolverOptions,
) -> Result<PrivateFitResult> {
    check_model(model, data)?;
    data.check_domain(model.family())?;
    let bounds = bounds_for(model, spec);
    let delta_k = 2.0 * bounds.lambda_k / budget.epsilon();
    let noise = sample_l2_exponential(model.p(), budget.epsilon(), bounds.xi_k, rng)?;
    let objective = RobustObjective {
        model: *model,
        data,
        spec: *spec,
        ridge: delta_k,
        linear: Some(&noise.b),
    };
    let solve = minimize(&objective, &vec![0.0; data.p()], options);
    warn_if_unconverged("perturbed M-estimator", &solve);
    Ok(PrivateFitResult {
        theta_dp: solve.theta_hat.clone(),
        solve,
        bounds,
        delta_k,
        noise,
        budget: *budget,
        k: spec.k(),
    })
}

/// Length of the stacked sufficient statistic: upper triangle of `X'X`
/// (diagonal included) followed by `X'y`.
pub fn suffstats_len(p: usize) -> usize {
    p * (p + 1) / 2 + p
}

/// Change-one-row sensitivity of the stacked sufficient statistic in `norm`.
///
/// Every coordinate is a product of two values in `[-1, 1]`, so replacing one
/// row moves it by at most 2.
pub fn suffstats_sensitivity(p: usize, norm: NormKind) -> f64 {
    let m = suffstats_len(p) as f64;
    match norm {
        NormKind::L1 => 2.0 * m,
        NormKind::L2 => 2.0 * m.sqrt(),
        NormKind::Linf => 2.0,
    }
}

/// Stacked `(upper(X'X), X'y)` for the given rows.
pub fn suffstats(data: &Dataset) -> Vec<f64> {
    let p = data.p();
    let mut out = vec![0.0; suffstats_len(p)];
    for (x, y) in data.rows() {
        let mut idx = 0;
        for a in 0..p {
            for b in a..p {
                out[idx] += x[a] * x[b];
                idx += 1;
            }
        }
        for a in 0..p {
            out[idx + a] += x[a] * y;
        }
    }
    out
}

/// Eigenvalue floor used to repair a perturbed `X'X`.
pub const EIGENVALUE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SuffStatsFit {
    pub theta: Vec<f64>,
    pub noise: NoiseDraw,
    pub sensitivity: f64,
    /// The perturbed `X'X` was not positive definite and had its eigenvalues
    /// floored at [`EIGENVALUE_FLOOR`].
    pub repaired: bool,
}

/// Sufficient-statistics perturbation for linear regression: K-norm noise on
/// `(X'X, X'y)` followed by the perturbed normal equations.
pub fn fit_knorm_suffstats<R: Rng + ?Sized>(
    data: &Dataset,
    budget: &PrivacyBudget,
    norm: NormKind,
    rng: &mut R,
) -> Result<SuffStatsFit> {
    data.check_domain(Family::Linear)?;
    let p = data.p();
    let sensitivity = suffstats_sensitivity(p, norm);
    let mut stats = suffstats(data);
    let noise = sample_knorm(stats.len(), budget.epsilon(), sensitivity, norm, rng)?;
    stats.iter_mut().zip(&noise.b).for_each(|(s, z)| *s += z);

    let mut xtx = DMatrix::zeros(p, p);
    let mut idx = 0;
    for a in 0..p {
        for b in a..p {
            xtx[(a, b)] = stats[idx];
            xtx[(b, a)] = stats[idx];
            idx += 1;
        }
    }
    let xty = DVector::from_column_slice(&stats[idx..]);

    let eig = SymmetricEigen::new(xtx.clone());
    let repaired = eig.eigenvalues.iter().any(|&e| !(e >= EIGENVALUE_FLOOR));
    let theta = if repaired {
        let floored = eig.eigenvalues.map(|e| e.max(EIGENVALUE_FLOOR));
        // V diag(1/e) V' xty
        let proj = eig.eigenvectors.tr_mul(&xty).component_div(&floored);
        &eig.eigenvectors * proj
    } else {
        xtx.cholesky()
            .ok_or_else(|| Error::Singular("perturbed X'X".into()))?
            .solve(&xty)
    };
    Ok(SuffStatsFit { theta: theta.iter().copied().collect(), noise, sensitivity, repaired })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KNormObjectiveFit {
    pub theta: Vec<f64>,
    pub solve: SolveReport,
    pub noise: NoiseDraw,
    pub budget: PrivacyBudget,
    pub q: f64,
    /// Ridge coefficient `lambda / (exp((1 - q) epsilon) - 1)`.
    pub regularizer: f64,
    /// Change-one-row K-norm sensitivity of the loss gradient.
    pub gradient_sensitivity: f64,
    /// Bound on the Hessian eigenvalues of the per-row loss.
    pub hessian_bound: f64,
}

/// Objective perturbation of the logistic log-likelihood with K-norm noise.
///
/// The budget is split by `q`: the noise `b ∝ exp(-q eps ||b||_K / S_K)` uses
/// `q eps` with `S_K = 2 sup ||x||_K`, and the ridge
/// `lambda / (exp((1 - q) eps) - 1)` with `lambda = p / 4` pays for the
/// Jacobian of the rank-one Hessian change under replacement of a row.
pub fn fit_knorm_objective_logistic<R: Rng + ?Sized>(
    data: &Dataset,
    budget: &PrivacyBudget,
    norm: NormKind,
    q: f64,
    rng: &mut R,
    options: &SolverOptions,
) -> Result<KNormObjectiveFit> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("q must lie in (0, 1), got {q}")));
    }
    data.check_domain(Family::Logistic)?;
    let p = data.p();
    let pf = p as f64;
    let gradient_sensitivity = 2.0 * match norm {
        NormKind::L1 => pf,
        NormKind::L2 => pf.sqrt(),
        NormKind::Linf => 1.0,
    };
    let hessian_bound = 0.25 * pf;
    let regularizer = hessian_bound / ((1.0 - q) * budget.epsilon()).exp_m1();
    let noise = sample_knorm(p, q * budget.epsilon(), gradient_sensitivity, norm, rng)?;
    let objective = LogisticNll { data, ridge: regularizer, linear: Some(&noise.b) };
    let solve = minimize(&objective, &vec![0.0; p], options);
    warn_if_unconverged("K-norm objective perturbation", &solve);
    Ok(KNormObjectiveFit {
        theta: solve.theta_hat.clone(),
        solve,
        noise,
        budget: *budget,
        q,
        regularizer,
        gradient_sensitivity,
        hessian_bound,
    })
}
