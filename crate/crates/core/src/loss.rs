//! The RobHyt loss family.
//!
//! For a tuning constant `k > 0` the loss, its derivative and its second
//! derivative are
//!
//! ```text
//! rho_k(z)  = (k^2 / 2) * log(cosh(2 z / k))
//! psi_k(z)  = k * tanh(2 z / k)
//! rho_k''(z) = 2 * sech(2 z / k)^2
//! ```
//!
//! `rho_k` is convex and even, `psi_k` is bounded by `k` in absolute value and
//! `rho_k(z) -> z^2` as `k -> infinity`. All evaluators are overflow free for
//! every finite `z`, which matters in the small-`k` regime where `2 z / k` is
//! routinely in the thousands.

use crate::error::{Error, Result};

/// Tuning constant of the RobHyt loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    k: f64,
}

impl LossSpec {
    pub fn new(k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tuning constant k must be positive and finite, got {k}"
            )));
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// `rho_k(z)`.
    pub fn rho(&self, z: f64) -> Result<f64> {
        finite_arg(z)?;
        Ok(self.rho_unchecked(z))
    }

    /// `psi_k(z) = d rho_k / dz`, always in `[-k, k]`.
    pub fn psi(&self, z: f64) -> Result<f64> {
        finite_arg(z)?;
        Ok(self.psi_unchecked(z))
    }

    /// `rho_k''(z) = 2 sech(2z/k)^2`, always in `(0, 2]` up to underflow.
    pub fn rho_second(&self, z: f64) -> Result<f64> {
        finite_arg(z)?;
        Ok(self.rho_second_unchecked(z))
    }

    // The unchecked evaluators propagate NaN instead of failing; the solver
    // reports non-finite objectives itself.

    #[inline]
    pub(crate) fn rho_unchecked(&self, z: f64) -> f64 {
        0.5 * self.k * self.k * log_cosh(2.0 * z / self.k)
    }

    #[inline]
    pub(crate) fn psi_unchecked(&self, z: f64) -> f64 {
        // tanh saturates at exactly +-1, so the product never exceeds k.
        self.k * (2.0 * z / self.k).tanh()
    }

    #[inline]
    pub(crate) fn rho_second_unchecked(&self, z: f64) -> f64 {
        let s = sech(2.0 * z / self.k);
        2.0 * s * s
    }
}

fn finite_arg(z: f64) -> Result<()> {
    if z.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("loss argument must be finite, got {z}")))
    }
}

/// `log(cosh(x))` without overflow or cancellation.
///
/// For `|x| > 1` this is `|x| - ln 2 + ln(1 + exp(-2|x|))`. Near zero that
/// form cancels catastrophically (the result is ~x^2/2 while the terms are
/// O(1)), so small arguments use `log1p(2 sinh(x/2)^2)` instead.
#[inline]
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        let h = (0.5 * a).sinh();
        (2.0 * h * h).ln_1p()
    } else {
        a - std::f64::consts::LN_2 + (-2.0 * a).exp().ln_1p()
    }
}

/// `sech(x) = 2 e^{-|x|} / (1 + e^{-2|x|})`, which underflows to 0 instead
/// of overflowing through `cosh`.
#[inline]
pub fn sech(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    2.0 * e / (1.0 + e * e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const KS: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 1000.0];

    fn grid() -> impl Iterator<Item = f64> {
        (-2000..=2000).map(|i| i as f64 * 0.005)
    }

    #[test]
    fn rejects_nonpositive_k() {
        assert!(LossSpec::new(0.0).is_err());
        assert!(LossSpec::new(-1.0).is_err());
        assert!(LossSpec::new(f64::NAN).is_err());
        assert!(LossSpec::new(f64::INFINITY).is_err());
    }

    #[test]
    fn rejects_nonfinite_argument() {
        let spec = LossSpec::new(1.0).unwrap();
        assert!(matches!(spec.rho(f64::NAN), Err(Error::Domain(_))));
        assert!(spec.psi(f64::INFINITY).is_err());
        assert!(spec.rho_second(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn scalar_values() {
        for k in KS {
            let spec = LossSpec::new(k).unwrap();
            assert_eq!(spec.rho(0.0).unwrap(), 0.0);
            assert_eq!(spec.psi(0.0).unwrap(), 0.0);
            assert_eq!(spec.rho_second(0.0).unwrap(), 2.0);
        }
        // 2 log cosh 1, 2 tanh 0.5 and 2 sech(1)^2 evaluated in 50-digit arithmetic.
        let two = LossSpec::new(2.0).unwrap();
        assert_relative_eq!(two.rho(1.0).unwrap(), 0.867_561_660_966_054_4, max_relative = 1e-14);
        assert_relative_eq!(two.psi(0.5).unwrap(), 0.924_234_314_520_019_5, max_relative = 1e-14);
        assert_relative_eq!(
            two.rho_second(1.0).unwrap(),
            0.839_948_683_228_052_1,
            max_relative = 1e-14
        );

        let one = LossSpec::new(1.0).unwrap();
        assert!((one.psi(10.0).unwrap() - 1.0).abs() < 1e-8);
        assert!(one.rho_second(100.0).unwrap().abs() < 1e-12);

        let big = LossSpec::new(1000.0).unwrap();
        assert!((big.rho(3.0).unwrap() - 9.0).abs() <= 27.0 / 1000.0);
    }

    #[test]
    fn no_overflow_for_extreme_ratios() {
        let spec = LossSpec::new(0.01).unwrap();
        for z in [1e3, -1e5, 1e300] {
            assert!(spec.rho(z).unwrap().is_finite(), "rho({z})");
            assert!(spec.psi(z).unwrap().is_finite());
            assert!(spec.rho_second(z).unwrap().is_finite());
        }
        // For |2z/k| far past the naive overflow point, rho is k|z| - k^2 ln2 / 2.
        let z = 50.0;
        let expected = 0.01 * z - 0.5 * 0.01 * 0.01 * std::f64::consts::LN_2;
        assert_relative_eq!(spec.rho(z).unwrap(), expected, max_relative = 1e-14);
    }

    #[test]
    fn small_argument_precision() {
        // k -> infinity recovers z^2; with the naive asymptotic formula the
        // k^2 factor amplifies cancellation error to ~1e-4.
        let spec = LossSpec::new(1e6).unwrap();
        for z in [1e-3, 0.3, -0.7, 2.0] {
            assert_relative_eq!(spec.rho(z).unwrap(), z * z, max_relative = 1e-10);
        }
        assert_relative_eq!(log_cosh(1e-8), 5e-17, max_relative = 1e-12);
    }

    #[test]
    fn log_cosh_branches_agree_at_switch() {
        let below = log_cosh(1.0 - 1e-12);
        let above = log_cosh(1.0 + 1e-12);
        assert!((above - below).abs() < 1e-11);
        assert_relative_eq!(log_cosh(1.0), 1.0f64.cosh().ln(), max_relative = 1e-15);
    }

    #[test]
    fn remainder_bound_holds_on_grid() {
        for k in KS {
            let spec = LossSpec::new(k).unwrap();
            for z in grid() {
                let gap = (spec.rho(z).unwrap() - z * z).abs();
                assert!(gap <= z.abs().powi(3) / k + 1e-12, "k={k} z={z} gap={gap}");
            }
        }
    }

    #[test]
    fn psi_bounded_and_odd_rho_even() {
        for k in KS {
            let spec = LossSpec::new(k).unwrap();
            for z in grid().chain([1e6, -1e6, 1e300]) {
                let psi = spec.psi(z).unwrap();
                assert!(psi.abs() <= k, "k={k} z={z}");
                assert!((psi + spec.psi(-z).unwrap()).abs() <= 1e-12);
                assert!((spec.rho(z).unwrap() - spec.rho(-z).unwrap()).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn strictly_convex_on_moderate_range() {
        for k in KS {
            let spec = LossSpec::new(k).unwrap();
            for z in grid().filter(|z| (2.0 * z / k).abs() < 300.0) {
                assert!(spec.rho_second(z).unwrap() > 0.0, "k={k} z={z}");
            }
        }
    }

    #[test]
    fn rho_nonnegative_zero_only_at_origin() {
        let spec = LossSpec::new(0.5).unwrap();
        for z in grid() {
            let r = spec.rho(z).unwrap();
            if z == 0.0 {
                assert_eq!(r, 0.0);
            } else {
                assert!(r > 0.0);
            }
        }
    }
}
