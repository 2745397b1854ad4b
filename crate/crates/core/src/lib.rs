//! Differentially private robust M-estimation with the RobHyt loss.
//!
//! The crate covers the loss itself, score models for linear and logistic
//! regression, closed-form sensitivity bounds, noise samplers, a gradient
//! solver, and the estimators built from them.

pub mod data;
pub mod error;
pub mod estimators;
pub mod loss;
pub mod noise;
pub mod score;
pub mod sensitivity;
pub mod solver;

pub use data::{preprocess, ColumnScaling, Dataset, PreprocessConfig, Preprocessed, RawTable};
pub use error::{Error, Result};
pub use estimators::{
    fit_knorm_objective_logistic, fit_knorm_suffstats, fit_nonprivate_reference, fit_perturbed_mestimator,
    fit_robust_mestimator, least_squares, suffstats_sensitivity, KNormObjectiveFit, PrivacyBudget,
    PrivateFitResult, SuffStatsFit,
};
pub use loss::LossSpec;
pub use noise::{derive_rng, sample_knorm, sample_l2_exponential, NoiseDraw, NormKind, StreamRng};
pub use score::{Family, Observation, ScoreModel};
pub use sensitivity::{bounds_for, verify_bounds_empirically, SensitivityBounds, VerificationReport};
pub use solver::{minimize, FnObjective, Objective, SolveReport, SolveStatus, SolverOptions};
