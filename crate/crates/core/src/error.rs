use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("matrix is not symmetric positive-definite: {0}")]
    NotPositiveDefinite(String),

    #[error(
        "conformity estimate {value} is within {eps} of 1; preference vector cannot be recovered"
    )]
    Singular { value: f64, eps: f64 },

    #[error("invalid configuration: `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("dataset is empty after filtering (min {min_count} ratings per user and item)")]
    EmptyDataset { min_count: usize },

    #[error("training diverged (loss = {loss}); reduce `{hyperparameter}`")]
    Divergence {
        hyperparameter: &'static str,
        loss: f64,
    },

    #[error("unknown user `{0}`")]
    UnknownUser(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {detail}")]
    Parse { path: PathBuf, detail: String },

    #[error("run `{policy}` seed {seed} failed: {source}")]
    Run {
        policy: String,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
