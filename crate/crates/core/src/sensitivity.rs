//! Calibration constants for objective perturbation with the RobHyt loss.
//!
//! For `l(theta; d) = rho_k(s(theta; d))`:
//!
//! ```text
//! grad l = psi_k(s) * grad s
//! hess l = rho_k''(s) * grad s grad s' + psi_k(s) * hess s
//! ```
//!
//! With `|psi_k| <= k`, `rho_k'' <= 2` and `||x||_2 <= sqrt(p)` on the bounded
//! domain this gives
//!
//! | family   | `xi_k`          | `lambda_k`               |
//! |----------|-----------------|--------------------------|
//! | linear   | `k sqrt(p)`     | `2 p`                    |
//! | logistic | `k sqrt(p) / 4` | `p (1/8 + k c2)`         |
//!
//! where `eta' <= 1/4` and `c2 = sup |eta''| = 1 / (6 sqrt 3)`. The bounds
//! depend only on the declared domain, never on observed data.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::score::{dot, Family, ScoreModel};

/// `sup_u |eta''(u)|` for the logistic link, `1 / (6 sqrt(3))`.
pub const LOGISTIC_CURVATURE_BOUND: f64 = 0.096_225_044_864_937_63;

/// Half-width of the box `[-B, B]^p` used as the compact parameter set when
/// sampling parameters for bound verification.
pub const PARAMETER_BOX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityBounds {
    /// Bound on `||grad rho_k(s(theta; d))||_2`.
    pub xi_k: f64,
    /// Bound on the eigenvalues of `hess rho_k(s(theta; d))`.
    pub lambda_k: f64,
}

pub fn bounds_for(model: &ScoreModel, spec: &LossSpec) -> SensitivityBounds {
    let p = model.p() as f64;
    let k = spec.k();
    match model.family() {
        Family::Linear => SensitivityBounds { xi_k: k * p.sqrt(), lambda_k: 2.0 * p },
        Family::Logistic => SensitivityBounds {
            xi_k: 0.25 * k * p.sqrt(),
            lambda_k: p * (0.125 + k * LOGISTIC_CURVATURE_BOUND),
        },
    }
}

/// Tightest observed ratios from [`verify_bounds_empirically`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerificationReport {
    pub trials: usize,
    /// `max ||grad|| / xi_k` over all samples.
    pub max_gradient_ratio: f64,
    /// `max |eigenvalue| / lambda_k` over all samples.
    pub max_eigenvalue_ratio: f64,
}

/// Randomized soundness check of `bounds`.
///
/// Draws `theta` uniformly from [`PARAMETER_BOX`] and observations from the
/// bounded domain (covariates pushed to the corners of `[-1, 1]^p` half the
/// time, where the norm bounds are tight), then checks the gradient norm and
/// the spectral radius of the Hessian of `rho_k(s)`. A violation means the
/// bound derivation is wrong.
pub fn verify_bounds_empirically<R: Rng + ?Sized>(
    model: &ScoreModel,
    spec: &LossSpec,
    bounds: &SensitivityBounds,
    trials: usize,
    rng: &mut R,
) -> Result<VerificationReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let p = model.p();
    let mut theta = vec![0.0; p];
    let mut x = vec![0.0; p];
    let mut report = VerificationReport { trials, max_gradient_ratio: 0.0, max_eigenvalue_ratio: 0.0 };
    for sample in 0..trials {
        theta.iter_mut().for_each(|t| *t = rng.random_range(-PARAMETER_BOX..=PARAMETER_BOX));
        let corners = rng.random_bool(0.5);
        x[0] = 1.0;
        for xj in x.iter_mut().skip(1) {
            *xj = if corners {
                if rng.random_bool(0.5) { 1.0 } else { -1.0 }
            } else {
                rng.random_range(-1.0..=1.0)
            };
        }
        let y = match model.family() {
            Family::Linear => rng.random_range(-1.0..=1.0),
            Family::Logistic => f64::from(u8::from(rng.random_bool(0.5))),
        };
        let (grad_norm, spectral) = loss_derivative_sizes(model, spec, &theta, &x, y);
        let g_ratio = grad_norm / bounds.xi_k;
        let e_ratio = spectral / bounds.lambda_k;
        if !(g_ratio <= 1.0 && e_ratio <= 1.0) {
            return Err(Error::BoundViolation {
                sample,
                detail: format!(
                    "theta={theta:?} x={x:?} y={y}: |grad|={grad_norm} (xi_k={}), \
                     spectral radius={spectral} (lambda_k={})",
                    bounds.xi_k, bounds.lambda_k
                ),
            });
        }
        report.max_gradient_ratio = report.max_gradient_ratio.max(g_ratio);
        report.max_eigenvalue_ratio = report.max_eigenvalue_ratio.max(e_ratio);
    }
    Ok(report)
}

/// `(||grad rho_k(s)||_2, max |eig(hess rho_k(s))|)` at one point.
fn loss_derivative_sizes(
    model: &ScoreModel,
    spec: &LossSpec,
    theta: &[f64],
    x: &[f64],
    y: f64,
) -> (f64, f64) {
    let prof = model.profile(dot(x, theta), y);
    let psi = spec.psi_unchecked(prof.score);
    let curv = spec.rho_second_unchecked(prof.score);
    let x_norm = dot(x, x).sqrt();
    let grad_norm = (psi * prof.d1).abs() * x_norm;
    // hess = (rho'' d1^2 + psi d2) x x'
    let p = x.len();
    let scale = curv * prof.d1 * prof.d1 + psi * prof.d2;
    let hess = DMatrix::from_fn(p, p, |i, j| scale * x[i] * x[j]);
    let spectral = SymmetricEigen::new(hess)
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, e| m.max(e.abs()));
    (grad_norm, spectral)
}
