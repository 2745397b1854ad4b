//! Regression score functions `s(theta; d)` and their derivatives in `theta`.
//!
//! Both families are single-index: the score depends on `theta` only through
//! `u = x' theta`, so every derivative is a scalar factor times `x` or `x x'`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `s = y - x' theta`
    Linear,
    /// `s = y - eta(x' theta)` with the logistic link `eta`
    Logistic,
}

/// One row `d = (x, y)`. The first covariate is the intercept and equals 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Observation {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoreModel {
    family: Family,
    p: usize,
}

impl ScoreModel {
    pub fn new(family: Family, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("coefficient dimension p must be >= 1".into()));
        }
        Ok(Self { family, p })
    }

    pub fn linear(p: usize) -> Result<Self> {
        Self::new(Family::Linear, p)
    }

    pub fn logistic(p: usize) -> Result<Self> {
        Self::new(Family::Logistic, p)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn score(&self, theta: &[f64], obs: &Observation) -> Result<f64> {
        let u = self.index(theta, obs)?;
        Ok(self.profile(u, obs.y).score)
    }

    pub fn score_grad(&self, theta: &[f64], obs: &Observation) -> Result<Vec<f64>> {
        let u = self.index(theta, obs)?;
        let d1 = self.profile(u, obs.y).d1;
        Ok(obs.x.iter().map(|xj| d1 * xj).collect())
    }

    pub fn score_hess(&self, theta: &[f64], obs: &Observation) -> Result<DMatrix<f64>> {
        let u = self.index(theta, obs)?;
        let d2 = self.profile(u, obs.y).d2;
        let p = self.p;
        Ok(DMatrix::from_fn(p, p, |i, j| d2 * obs.x[i] * obs.x[j]))
    }

    fn index(&self, theta: &[f64], obs: &Observation) -> Result<f64> {
        check_dim(self.p, theta.len())?;
        check_dim(self.p, obs.x.len())?;
        Ok(dot(&obs.x, theta))
    }

    /// Score and its first two derivatives with respect to the linear index.
    #[inline]
    pub(crate) fn profile(&self, u: f64, y: f64) -> ScoreProfile {
        match self.family {
            Family::Linear => ScoreProfile { score: y - u, d1: -1.0, d2: 0.0 },
            Family::Logistic => {
                let eta = logistic(u);
                let deta = eta * (1.0 - eta);
                ScoreProfile {
                    score: y - eta,
                    d1: -deta,
                    d2: -deta * (1.0 - 2.0 * eta),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ScoreProfile {
    pub score: f64,
    /// ds/du
    pub d1: f64,
    /// d^2 s / du^2
    pub d2: f64,
}

/// `exp(u) / (1 + exp(u))` evaluated without overflow.
#[inline]
pub fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // eta'(1) and eta''(1) from 40-digit arithmetic.
    const DETA_1: f64 = 0.196_611_933_241_481_85;
    const D2ETA_1: f64 = -0.090_857_747_672_948_41;

    fn obs(x: &[f64], y: f64) -> Observation {
        Observation::new(x.to_vec(), y)
    }

    #[test]
    fn score_examples() {
        let lin = ScoreModel::linear(2).unwrap();
        let logit = ScoreModel::logistic(2).unwrap();
        assert_eq!(lin.score(&[0.0, 0.0], &obs(&[1.0, 0.3], 0.5)).unwrap(), 0.5);
        assert_eq!(logit.score(&[0.0, 0.0], &obs(&[1.0, -0.7], 1.0)).unwrap(), 0.5);
        let s = lin.score(&[1.0, -1.0], &obs(&[1.0, 0.5], 0.2)).unwrap();
        assert_relative_eq!(s, -0.3, max_relative = 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let lin = ScoreModel::linear(3).unwrap();
        let g = lin.score_grad(&[4.0, -2.0, 9.0], &obs(&[1.0, -1.0, 0.5], 0.1)).unwrap();
        assert_eq!(g, vec![-1.0, 1.0, -0.5]);

        let logit = ScoreModel::logistic(2).unwrap();
        let g = logit.score_grad(&[0.0, 0.0], &obs(&[1.0, 1.0], 0.0)).unwrap();
        assert_eq!(g, vec![-0.25, -0.25]);
        let g = logit.score_grad(&[1.0, 0.0], &obs(&[1.0, 1.0], 1.0)).unwrap();
        for gj in g {
            assert_relative_eq!(gj, -DETA_1, max_relative = 1e-14);
        }
    }

    #[test]
    fn hessian_examples() {
        let lin = ScoreModel::linear(2).unwrap();
        let h = lin.score_hess(&[0.3, 0.1], &obs(&[1.0, 0.2], 0.4)).unwrap();
        assert!(h.iter().all(|v| *v == 0.0));

        let logit = ScoreModel::logistic(2).unwrap();
        let h = logit.score_hess(&[0.0, 0.0], &obs(&[1.0, 0.8], 1.0)).unwrap();
        assert!(h.iter().all(|v| *v == 0.0));

        let one = ScoreModel::logistic(1).unwrap();
        let h = one.score_hess(&[1.0], &obs(&[1.0], 0.0)).unwrap();
        assert_relative_eq!(h[(0, 0)], -D2ETA_1, max_relative = 1e-13);
        assert!(h[(0, 0)] > 0.0);
        // sign cross-check against a difference of gradients
        let step = 1e-6;
        let gp = one.score_grad(&[1.0 + step], &obs(&[1.0], 0.0)).unwrap()[0];
        let gm = one.score_grad(&[1.0 - step], &obs(&[1.0], 0.0)).unwrap()[0];
        assert_relative_eq!((gp - gm) / (2.0 * step), h[(0, 0)], max_relative = 1e-6);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let lin = ScoreModel::linear(3).unwrap();
        assert!(matches!(
            lin.score(&[0.0; 2], &obs(&[1.0, 0.0, 0.0], 0.0)),
            Err(Error::Dimension { expected: 3, got: 2 })
        ));
        assert!(lin.score_grad(&[0.0; 3], &obs(&[1.0], 0.0)).is_err());
        assert!(ScoreModel::linear(0).is_err());
    }

    #[test]
    fn logistic_score_is_bounded() {
        let model = ScoreModel::logistic(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let theta: Vec<f64> = (0..3).map(|_| rng.random_range(-50.0..50.0)).collect();
            let x = vec![1.0, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let y = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
            let s = model.score(&theta, &obs(&x, y)).unwrap();
            assert!(s.abs() <= 1.0);
        }
        assert!(logistic(800.0).is_finite() && logistic(-800.0) >= 0.0);
    }
}
