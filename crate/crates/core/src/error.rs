use std::path::PathBuf;

use crate::config::Resolution;

/// Errors raised by the model, the solvers and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("effective channel is rank deficient: smallest singular value {smallest:e} <= threshold {threshold:e}")]
    Singular { smallest: f64, threshold: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("optimization failed: {0}")]
    OptimizationFailure(String),

    #[error("no convergence after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("exhaustive search needs {required} candidates, cap is {cap}")]
    EnumerationCap { required: u128, cap: u128 },

    #[error("no per-element power entry for resolution {0}")]
    MissingElementPower(Resolution),

    #[error("index {index} out of range for {len} users")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dims(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
