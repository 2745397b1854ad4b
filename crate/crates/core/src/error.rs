use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("row {row} lies outside the bounded data domain: {reason}")]
    DomainViolation { row: usize, reason: String },

    #[error("column '{column}': {reason}")]
    Preprocess { column: String, reason: String },

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    #[error("sensitivity bound violated at sample {sample}: {detail}")]
    BoundViolation { sample: usize, detail: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
