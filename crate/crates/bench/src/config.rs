//! Experiment configuration, read from TOML.
//!
//! ```toml
//! dataset = "synthetic_logistic"
//! estimators = ["nonprivate", "perturbed", "opm_l1"]
//! k_grid = { start = 0.01, end = 2.0, points = 20 }
//! epsilon = 0.1
//! replications = 100
//! master_seed = 1
//! n = 100
//! ```

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;

use pmest_core::{Family, NormKind, PreprocessConfig, SolverOptions};
use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    AttitudeCsv,
    SyntheticLinear,
    SyntheticLogistic,
}

impl DatasetKind {
    pub fn family(self) -> Family {
        match self {
            DatasetKind::AttitudeCsv | DatasetKind::SyntheticLinear => Family::Linear,
            DatasetKind::SyntheticLogistic => Family::Logistic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Least squares or the logistic MLE.
    Nonprivate,
    /// Robust M-estimator without noise.
    Robust,
    /// Perturbed M-estimator.
    Perturbed,
    SsL1,
    /// K-norm sufficient statistics with the L2 ball, reported as the
    /// generic "K-norm" line.
    SsL2,
    SsLinf,
    OpmL1,
    OpmL2,
    OpmLinf,
    /// L-infinity objective perturbation with `q = 0.85`.
    OpmLinfStar,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 10] = [
        EstimatorKind::Nonprivate,
        EstimatorKind::Robust,
        EstimatorKind::Perturbed,
        EstimatorKind::SsL1,
        EstimatorKind::SsL2,
        EstimatorKind::SsLinf,
        EstimatorKind::OpmL1,
        EstimatorKind::OpmL2,
        EstimatorKind::OpmLinf,
        EstimatorKind::OpmLinfStar,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Nonprivate => "nonprivate",
            EstimatorKind::Robust => "robust",
            EstimatorKind::Perturbed => "perturbed",
            EstimatorKind::SsL1 => "ss_l1",
            EstimatorKind::SsL2 => "ss_l2",
            EstimatorKind::SsLinf => "ss_linf",
            EstimatorKind::OpmL1 => "opm_l1",
            EstimatorKind::OpmL2 => "opm_l2",
            EstimatorKind::OpmLinf => "opm_linf",
            EstimatorKind::OpmLinfStar => "opm_linf_star",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.label() == s)
    }

    /// Whether the estimate changes with the tuning constant `k`.
    pub fn depends_on_k(self) -> bool {
        matches!(self, EstimatorKind::Robust | EstimatorKind::Perturbed)
    }

    /// Whether the estimator consumes randomness.
    pub fn is_private(self) -> bool {
        !matches!(self, EstimatorKind::Nonprivate | EstimatorKind::Robust)
    }

    /// Family the estimator is restricted to, if any.
    pub fn required_family(self) -> Option<Family> {
        match self {
            EstimatorKind::SsL1 | EstimatorKind::SsL2 | EstimatorKind::SsLinf => Some(Family::Linear),
            EstimatorKind::OpmL1 | EstimatorKind::OpmL2 | EstimatorKind::OpmLinf | EstimatorKind::OpmLinfStar => {
                Some(Family::Logistic)
            }
            _ => None,
        }
    }

    pub fn norm(self) -> Option<NormKind> {
        match self {
            EstimatorKind::SsL1 | EstimatorKind::OpmL1 => Some(NormKind::L1),
            EstimatorKind::SsL2 | EstimatorKind::OpmL2 => Some(NormKind::L2),
            EstimatorKind::SsLinf | EstimatorKind::OpmLinf | EstimatorKind::OpmLinfStar => Some(NormKind::Linf),
            _ => None,
        }
    }

    /// Budget share of the noise term for the objective-perturbation baselines.
    pub fn q(self) -> Option<f64> {
        match self {
            EstimatorKind::OpmL1 | EstimatorKind::OpmL2 | EstimatorKind::OpmLinf => Some(0.5),
            EstimatorKind::OpmLinfStar => Some(0.85),
            _ => None,
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KGrid {
    List(Vec<f64>),
    Linspace { start: f64, end: f64, points: usize },
}

impl KGrid {
    /// Twenty points from 0.01 to 2.
    pub fn standard() -> Self {
        KGrid::Linspace { start: 0.01, end: 2.0, points: 20 }
    }

    /// Ten points from 0.01 to 2, for the large linear runs.
    pub fn coarse() -> Self {
        KGrid::Linspace { start: 0.01, end: 2.0, points: 10 }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            KGrid::List(v) => v.clone(),
            KGrid::Linspace { start, end, points } => match points {
                0 => vec![],
                1 => vec![*start],
                _ => (0..*points)
                    .map(|i| start + (end - start) * i as f64 / (*points - 1) as f64)
                    .collect(),
            },
        }
    }
}

impl Default for KGrid {
    fn default() -> Self {
        KGrid::standard()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `log` of the aggregated `||theta - reference||_2`.
    LogL2CoefError,
    /// `log` of the aggregated mean squared prediction error `||X theta - y||^2 / n`.
    LogL2PredictionError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// The coefficients the data were simulated from.
    TrueBeta,
    /// The non-private estimate on the same replication.
    Nonprivate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    LogOfMean,
    MeanOfLogs,
}

/// Synthetic linear design: intercept plus `U[-1, 1]` covariates and Gaussian
/// noise, the response optionally clamped and rescaled into `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearDesign {
    pub p: usize,
    pub noise_sd: f64,
    /// Defaults to `p` evenly spaced values from -0.5 to 0.5.
    pub beta: Option<Vec<f64>>,
    /// Clamp `y` at `clamp * sd(y)` and divide by that threshold. `None` keeps
    /// the raw response.
    pub clamp: Option<f64>,
}

impl Default for LinearDesign {
    fn default() -> Self {
        Self { p: 10, noise_sd: 0.5, beta: None, clamp: None }
    }
}

impl LinearDesign {
    pub fn beta(&self) -> Vec<f64> {
        self.beta.clone().unwrap_or_else(|| match self.p {
            1 => vec![0.0],
            p => (0..p).map(|j| -0.5 + j as f64 / (p - 1) as f64).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub k_grid: KGrid,
    pub epsilon: f64,
    pub replications: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_metric")]
    pub metric: Metric,
    #[serde(default = "default_reference")]
    pub reference: Reference,
    #[serde(default)]
    pub aggregation: Aggregation,
    /// Sample size for synthetic datasets.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub linear: LinearDesign,
    /// Column handling for CSV datasets. Defaults to `rating` as the response
    /// with every other column a covariate.
    #[serde(default)]
    pub preprocess: Option<PreprocessConfig>,
    /// CSV to use instead of the bundled attitude data.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn default_metric() -> Metric {
    Metric::LogL2CoefError
}

fn default_reference() -> Reference {
    Reference::TrueBeta
}

fn default_n() -> usize {
    100
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn family(&self) -> Family {
        self.dataset.family()
    }

    pub fn k_values(&self) -> Vec<f64> {
        self.k_grid.values()
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.replications == 0 {
            return bad("replications must be >= 1".into());
        }
        let ks = self.k_values();
        if ks.is_empty() {
            return bad("k_grid is empty".into());
        }
        if let Some(k) = ks.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
            return bad(format!("k_grid values must be positive, got {k}"));
        }
        if self.estimators.is_empty() {
            return bad("no estimators listed".into());
        }
        let mut seen = HashSet::new();
        for e in &self.estimators {
            if !seen.insert(e) {
                return bad(format!("estimator {e} listed twice"));
            }
            if let Some(f) = e.required_family() {
                if f != self.family() {
                    return bad(format!("estimator {e} needs a {f:?} dataset"));
                }
            }
        }
        if self.dataset != DatasetKind::AttitudeCsv && self.n == 0 {
            return bad("n must be >= 1".into());
        }
        if self.dataset == DatasetKind::SyntheticLinear {
            if self.linear.p == 0 {
                return bad("linear.p must be >= 1".into());
            }
            if self.linear.beta().len() != self.linear.p {
                return bad("linear.beta length differs from linear.p".into());
            }
            if self.linear.clamp.is_none() && self.estimators.iter().any(|e| e.is_private()) {
                return bad("private estimators need a bounded response; set linear.clamp".into());
            }
        }
        if self.dataset == DatasetKind::AttitudeCsv && self.reference == Reference::TrueBeta
            && self.metric == Metric::LogL2CoefError
        {
            return bad("the attitude data has no true coefficients; use reference = \"nonprivate\"".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_grid_points() {
        let ks = KGrid::standard().values();
        assert_eq!(ks.len(), 20);
        assert_eq!(ks[0], 0.01);
        assert!((ks[1] - 0.114_736_842).abs() < 1e-8);
        assert!((ks[10] - 1.057_368_421).abs() < 1e-8);
        assert!((ks[19] - 2.0).abs() < 1e-15);
        let coarse = KGrid::coarse().values();
        assert_eq!(coarse.len(), 10);
        assert!((coarse[1] - 0.231_111_111).abs() < 1e-8);
    }

    #[test]
    fn parses_both_grid_forms() {
        let base = "dataset = \"synthetic_logistic\"\nestimators = [\"nonprivate\", \"opm_linf_star\"]\nepsilon = 0.1\nreplications = 3\n";
        let a = ExperimentConfig::from_toml(&format!("{base}k_grid = [0.5, 1.0]\n")).unwrap();
        assert_eq!(a.k_values(), vec![0.5, 1.0]);
        let b = ExperimentConfig::from_toml(&format!("{base}k_grid = {{ start = 0.1, end = 0.3, points = 3 }}\n")).unwrap();
        assert_eq!(b.k_values().len(), 3);
        let c = ExperimentConfig::from_toml(base).unwrap();
        assert_eq!(c.k_values().len(), 20);
        assert_eq!(c.aggregation, Aggregation::LogOfMean);
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_configs() {
        let ok = "dataset = \"synthetic_linear\"\nestimators = [\"perturbed\"]\nepsilon = 0.1\nreplications = 3\n[linear]\nclamp = 1.0\n";
        assert!(ExperimentConfig::from_toml(ok).is_ok());
        for broken in [
            ok.replace("0.1", "0.0"),
            ok.replace("= 3", "= 0"),
            ok.replace("[\"perturbed\"]", "[\"opm_l1\"]"),
            ok.replace("[\"perturbed\"]", "[\"perturbed\", \"perturbed\"]"),
            format!("k_grid = [0.0, 1.0]\n{ok}"),
            format!("unknown = 1\n{ok}"),
            ok.replace("clamp = 1.0\n", ""),
            ok.replace("synthetic_linear", "attitude_csv"),
        ] {
            assert!(ExperimentConfig::from_toml(&broken).is_err(), "{broken}");
        }
    }

    #[test]
    fn estimator_labels_round_trip() {
        for e in EstimatorKind::ALL {
            assert_eq!(EstimatorKind::from_label(e.label()), Some(e));
        }
        assert!(EstimatorKind::Perturbed.depends_on_k() && !EstimatorKind::SsL2.depends_on_k());
    }

    #[test]
    fn default_linear_beta() {
        let d = LinearDesign { p: 5, ..Default::default() };
        assert_eq!(d.beta(), vec![-0.5, -0.25, 0.0, 0.25, 0.5]);
    }
}
