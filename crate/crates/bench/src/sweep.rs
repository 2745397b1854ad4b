//! k-grid sweeps over `H` replications.

use pmest_core::{
    derive_rng, fit_knorm_objective_logistic, fit_knorm_suffstats, fit_nonprivate_reference,
    fit_perturbed_mestimator, fit_robust_mestimator, Dataset, Family, LossSpec, PrivacyBudget, ScoreModel,
};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Aggregation, DatasetKind, EstimatorKind, ExperimentConfig, Metric, Reference};
use crate::simulate::{load_csv_dataset, simulate_linear, simulate_logistic, LOGISTIC_BETA};
use crate::BenchError;

/// One aggregated point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub estimator: String,
    pub k: f64,
    /// Aggregate over every replication that produced a finite estimate,
    /// converged or not.
    #[serde(with = "nan_as_null")]
    pub metric_value: f64,
    pub n_converged: usize,
    pub n_total: usize,
    /// Aggregate over converged replications only.
    pub metric_converged_only: Option<f64>,
}

impl MetricRecord {
    pub const COLUMNS: [&'static str; 6] =
        ["estimator", "k", "metric_value", "n_converged", "n_total", "metric_converged_only"];
}

pub(crate) mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Outcome {
    error: Option<f64>,
    converged: bool,
}

const FAILED: Outcome = Outcome { error: None, converged: false };

/// Seed of the synthetic data for replication `h`.
pub fn data_seed(master_seed: u64, replication: usize) -> u64 {
    derive_rng(master_seed, &[replication as u64, 0]).next_u64()
}

fn stream_id(e: EstimatorKind) -> u64 {
    1 + EstimatorKind::ALL.iter().position(|x| *x == e).expect("listed") as u64
}

struct Replicate {
    data: Dataset,
    beta: Option<Vec<f64>>,
}

fn replicate_data(cfg: &ExperimentConfig, h: usize, fixed: Option<&Dataset>) -> Replicate {
    match cfg.dataset {
        DatasetKind::AttitudeCsv => Replicate { data: fixed.expect("csv loaded").clone(), beta: None },
        DatasetKind::SyntheticLinear => {
            let (data, beta) = simulate_linear(cfg.n, &cfg.linear, data_seed(cfg.master_seed, h));
            Replicate { data, beta: Some(beta) }
        }
        DatasetKind::SyntheticLogistic => Replicate {
            data: simulate_logistic(cfg.n, data_seed(cfg.master_seed, h)),
            beta: Some(LOGISTIC_BETA.to_vec()),
        },
    }
}

fn error_of(cfg: &ExperimentConfig, data: &Dataset, reference: &[f64], theta: &[f64]) -> Option<f64> {
    let e = match cfg.metric {
        Metric::LogL2CoefError => theta.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(),
        Metric::LogL2PredictionError => {
            data.rows()
                .map(|(x, y)| (x.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() - y).powi(2))
                .sum::<f64>()
                / data.n() as f64
        }
    };
    e.is_finite().then_some(e)
}

/// Per-estimator, per-k outcomes of replication `h`.
fn run_replication(cfg: &ExperimentConfig, h: usize, ks: &[f64], fixed: Option<&Dataset>) -> Vec<Vec<Outcome>> {
    let Replicate { data, beta } = replicate_data(cfg, h, fixed);
    let family = cfg.family();
    let model = ScoreModel::new(family, data.p()).expect("p >= 1");
    let budget = PrivacyBudget::new(cfg.epsilon).expect("validated");

    let nonprivate = fit_nonprivate_reference(&model, &data, &cfg.solver);
    let reference: Option<Vec<f64>> = match cfg.reference {
        Reference::TrueBeta => beta,
        Reference::Nonprivate => nonprivate.as_ref().ok().map(|r| r.theta_hat.clone()),
    };
    let reference = match (cfg.metric, reference) {
        (Metric::LogL2PredictionError, _) => Vec::new(),
        (_, Some(r)) => r,
        (_, None) => {
            log::warn!("replication {h}: no reference estimate, counted as failed");
            return cfg.estimators.iter().map(|_| vec![FAILED; ks.len()]).collect();
        }
    };
    let score = |theta: &[f64], converged: bool| match error_of(cfg, &data, &reference, theta) {
        Some(e) => Outcome { error: Some(e), converged },
        None => FAILED,
    };

    cfg.estimators
        .iter()
        .map(|&est| {
            // Common random numbers: every grid point of a replication reuses
            // the same stream, so noise draws differ across k only by scale.
            let fit_at = |k: f64| -> Outcome {
                let mut rng = derive_rng(cfg.master_seed, &[h as u64, stream_id(est)]);
                let spec = match LossSpec::new(k) {
                    Ok(s) => s,
                    Err(_) => return FAILED,
                };
                let result = match est {
                    EstimatorKind::Nonprivate => {
                        return match &nonprivate {
                            Ok(r) => score(&r.theta_hat, r.converged),
                            Err(_) => FAILED,
                        }
                    }
                    EstimatorKind::Robust => {
                        fit_robust_mestimator(&model, &data, &spec, &cfg.solver).map(|r| (r.theta_hat, r.converged))
                    }
                    EstimatorKind::Perturbed => {
                        fit_perturbed_mestimator(&model, &data, &spec, &budget, &mut rng, &cfg.solver)
                            .map(|r| (r.theta_dp, r.solve.converged))
                    }
                    EstimatorKind::SsL1 | EstimatorKind::SsL2 | EstimatorKind::SsLinf => {
                        fit_knorm_suffstats(&data, &budget, est.norm().expect("norm"), &mut rng).map(|r| (r.theta, true))
                    }
                    _ => fit_knorm_objective_logistic(
                        &data,
                        &budget,
                        est.norm().expect("norm"),
                        est.q().expect("q"),
                        &mut rng,
                        &cfg.solver,
                    )
                    .map(|r| (r.theta, r.solve.converged)),
                };
                match result {
                    Ok((theta, converged)) => score(&theta, converged),
                    Err(e) => {
                        log::warn!("replication {h}, {est}, k={k}: {e}");
                        FAILED
                    }
                }
            };
            if est.depends_on_k() {
                ks.iter().map(|&k| fit_at(k)).collect()
            } else {
                vec![fit_at(ks[0]); ks.len()]
            }
        })
        .collect()
}

pub fn aggregate(errors: &[f64], how: Aggregation) -> f64 {
    if errors.is_empty() {
        return f64::NAN;
    }
    let n = errors.len() as f64;
    match how {
        Aggregation::LogOfMean => (errors.iter().sum::<f64>() / n).ln(),
        Aggregation::MeanOfLogs => errors.iter().map(|e| e.ln()).sum::<f64>() / n,
    }
}

/// Runs every (estimator, k) pair of `cfg` over `cfg.replications`
/// replications. `jobs = None` uses all cores.
///
/// Records come out in config order of estimators, then grid order of `k`,
/// and do not depend on `jobs`.
pub fn run_sweep(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<Vec<MetricRecord>, BenchError> {
    cfg.validate()?;
    let ks = cfg.k_values();
    let fixed = match cfg.dataset {
        DatasetKind::AttitudeCsv => {
            let pre = load_csv_dataset(cfg.csv.as_deref(), cfg.preprocess.as_ref())?;
            if cfg.family() == Family::Linear {
                pre.data.check_domain(Family::Linear)?;
            }
            Some(pre.data)
        }
        _ => None,
    };

    let run = || -> Vec<Vec<Vec<Outcome>>> {
        (0..cfg.replications)
            .into_par_iter()
            .map(|h| run_replication(cfg, h, &ks, fixed.as_ref()))
            .collect()
    };
    let outcomes = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| BenchError::Config(e.to_string()))?
            .install(run),
        None => run(),
    };

    let mut records = Vec::with_capacity(cfg.estimators.len() * ks.len());
    for (e, est) in cfg.estimators.iter().enumerate() {
        for (j, &k) in ks.iter().enumerate() {
            let per_rep: Vec<Outcome> = outcomes.iter().map(|rep| rep[e][j]).collect();
            let all: Vec<f64> = per_rep.iter().filter_map(|o| o.error).collect();
            let conv: Vec<f64> = per_rep.iter().filter(|o| o.converged).filter_map(|o| o.error).collect();
            records.push(MetricRecord {
                estimator: est.label().to_owned(),
                k,
                metric_value: aggregate(&all, cfg.aggregation),
                n_converged: conv.len(),
                n_total: cfg.replications,
                metric_converged_only: (!conv.is_empty()).then(|| aggregate(&conv, cfg.aggregation)),
            });
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregation_modes() {
        let e = [1.0, std::f64::consts::E.powi(2)];
        assert!((aggregate(&e, Aggregation::MeanOfLogs) - 1.0).abs() < 1e-15);
        assert!((aggregate(&e, Aggregation::LogOfMean) - ((1.0 + e[1]) / 2.0).ln()).abs() < 1e-15);
        assert!(aggregate(&[], Aggregation::LogOfMean).is_nan());
    }

    #[test]
    fn jobs_do_not_change_results() {
        let cfg = ExperimentConfig::from_toml(
            "dataset = \"synthetic_logistic\"\nestimators = [\"nonprivate\", \"perturbed\", \"opm_l2\"]\n\
             epsilon = 0.5\nreplications = 4\nn = 60\nk_grid = [0.5, 1.5]\nmaster_seed = 3\n",
        )
        .unwrap();
        let a = run_sweep(&cfg, Some(1)).unwrap();
        let b = run_sweep(&cfg, Some(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert_eq!(a[0].metric_value, a[1].metric_value);
        assert_ne!(a[2].metric_value, a[3].metric_value);
    }
}
