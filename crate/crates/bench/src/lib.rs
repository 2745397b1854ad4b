//! Experiment harness for the perturbed M-estimator: k-grid sweeps,
//! consistency studies, synthetic data and result files.

pub mod config;
pub mod consistency;
pub mod output;
pub mod simulate;
pub mod sweep;

pub use config::{Aggregation, DatasetKind, EstimatorKind, ExperimentConfig, KGrid, LinearDesign, Metric, Reference};
pub use consistency::{consistency_study, log_log_slope, run_consistency, ConsistencyConfig, ConsistencyRow, KSchedule};
pub use output::{emit_results, read_table, Format, Manifest};
pub use simulate::{simulate_linear, simulate_logistic, ATTITUDE_CSV, LOGISTIC_BETA};
pub use sweep::{run_sweep, MetricRecord};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] pmest_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
