//! Empirical consistency of the non-private robust M-estimator when `k`
//! follows a sample-size schedule.

use pmest_core::{fit_robust_mestimator, LossSpec, ScoreModel, SolverOptions};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::LinearDesign;
use crate::simulate::simulate_linear;
use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KSchedule {
    /// `k_n = ln(ln n)`
    LoglogN,
    /// `k_n = 1 / ln n`
    InvLogN,
    Fixed(f64),
}

impl KSchedule {
    pub fn k(&self, n: usize) -> f64 {
        let ln = (n as f64).ln();
        match self {
            KSchedule::LoglogN => ln.ln(),
            KSchedule::InvLogN => 1.0 / ln,
            KSchedule::Fixed(k) => *k,
        }
    }

    pub fn label(&self) -> String {
        match self {
            KSchedule::LoglogN => "loglog_n".into(),
            KSchedule::InvLogN => "inv_log_n".into(),
            KSchedule::Fixed(k) => format!("fixed_{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencyConfig {
    pub n_grid: Vec<usize>,
    pub schedules: Vec<KSchedule>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Gaussian linear model; `clamp` should stay unset so the score is
    /// symmetric.
    #[serde(default = "default_design")]
    pub design: LinearDesign,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn default_replicates() -> usize {
    20
}

fn default_design() -> LinearDesign {
    LinearDesign { p: 3, noise_sd: 1.0, beta: Some(vec![0.5, -1.0, 0.25]), clamp: None }
}

impl ConsistencyConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        if cfg.n_grid.is_empty() || cfg.n_grid.windows(2).any(|w| w[0] >= w[1]) || cfg.n_grid[0] < 2 {
            return Err(BenchError::Config("n_grid must be increasing and start at >= 2".into()));
        }
        if cfg.replicates == 0 || cfg.schedules.is_empty() {
            return Err(BenchError::Config("need at least one schedule and one replicate".into()));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub schedule: String,
    pub n: usize,
    pub k: f64,
    pub median_error: f64,
    pub n_converged: usize,
    pub n_total: usize,
}

impl ConsistencyRow {
    pub const COLUMNS: [&'static str; 6] = ["schedule", "n", "k", "median_error", "n_converged", "n_total"];
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Median `||theta_hat - beta||_2` over `replicates` fresh datasets for every
/// `n` in `n_grid`. The same datasets are shared by all schedules.
pub fn consistency_study(
    design: &LinearDesign,
    schedule: KSchedule,
    n_grid: &[usize],
    replicates: usize,
    seed: u64,
    solver: &SolverOptions,
) -> Result<Vec<ConsistencyRow>, BenchError> {
    let model = ScoreModel::linear(design.p)?;
    n_grid
        .iter()
        .map(|&n| {
            let k = schedule.k(n);
            let spec = LossSpec::new(k)?;
            let fits: Vec<(f64, bool)> = (0..replicates)
                .into_par_iter()
                .map(|r| {
                    let data_seed = pmest_core::derive_rng(seed, &[n as u64, r as u64]).next_u64();
                    let (data, beta) = simulate_linear(n, design, data_seed);
                    let fit = fit_robust_mestimator(&model, &data, &spec, solver)?;
                    let err = fit.theta_hat.iter().zip(&beta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    Ok((err, fit.converged))
                })
                .collect::<Result<_, BenchError>>()?;
            Ok(ConsistencyRow {
                schedule: schedule.label(),
                n,
                k,
                median_error: median(fits.iter().map(|f| f.0).collect()),
                n_converged: fits.iter().filter(|f| f.1).count(),
                n_total: replicates,
            })
        })
        .collect()
}

/// Runs every schedule of `cfg`.
pub fn run_consistency(cfg: &ConsistencyConfig) -> Result<Vec<ConsistencyRow>, BenchError> {
    let mut rows = Vec::new();
    for s in &cfg.schedules {
        rows.extend(consistency_study(&cfg.design, *s, &cfg.n_grid, cfg.replicates, cfg.master_seed, &cfg.solver)?);
    }
    Ok(rows)
}

/// Least-squares slope of `ln(median_error)` against `ln(n)`.
pub fn log_log_slope(rows: &[ConsistencyRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| ((r.n as f64).ln(), r.median_error.ln())).collect();
    let m = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / m, b + y / m));
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        assert!((KSchedule::LoglogN.k(100) - 100f64.ln().ln()).abs() < 1e-15);
        assert!((KSchedule::InvLogN.k(1000) - 1.0 / 1000f64.ln()).abs() < 1e-15);
        assert_eq!(KSchedule::Fixed(3.0).k(10), 3.0);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let rows: Vec<ConsistencyRow> = [10usize, 100, 1000]
            .iter()
            .map(|&n| ConsistencyRow {
                schedule: "x".into(),
                n,
                k: 1.0,
                median_error: 3.0 * (n as f64).powf(-0.5),
                n_converged: 1,
                n_total: 1,
            })
            .collect();
        assert!((log_log_slope(&rows) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn config_parses_schedules() {
        let cfg = ConsistencyConfig::from_toml(
            "n_grid = [100, 1000]\nschedules = [\"loglog_n\", \"inv_log_n\", { fixed = 1e6 }]\n",
        )
        .unwrap();
        assert_eq!(cfg.schedules[2], KSchedule::Fixed(1e6));
        assert_eq!(cfg.replicates, 20);
        assert!(ConsistencyConfig::from_toml("n_grid = [100, 10]\nschedules = [\"loglog_n\"]\n").is_err());
    }
}
