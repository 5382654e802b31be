use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at coordinate {index}: {value}")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    /// A bound's denominator is nonpositive, so the bound is vacuous.
    #[error("bound denominator `{denominator}` = {value} must be positive")]
    NonPositiveDenominator {
        denominator: &'static str,
        value: f64,
    },

    #[error("gradient bound is unavailable for {0}; supply C explicitly")]
    UnboundedGradient(String),

    #[error("dirichlet partition left a client empty after {retries} retries")]
    PartitionFailed { retries: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("run diverged at round {round}")]
    Diverged { round: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that stem from bad user input rather than runtime failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::DimensionMismatch { .. }
                | Error::Empty(_)
                | Error::NonPositiveDenominator { .. }
                | Error::UnboundedGradient(_)
                | Error::PartitionFailed { .. }
                | Error::Config(_)
                | Error::Json(_)
        )
    }
}
