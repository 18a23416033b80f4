//! Crate-wide error type.
//!
//! Errors split into three families that callers treat differently:
//! invalid input/configuration (caller mistake), numerical failure
//! (estimation or linear algebra broke down on valid input), and I/O.

use crate::whittle::RestartTrace;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Data or parameters violate a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value (grid, policy, model spec) is unusable.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Valid input led to a numerical dead end (non-PD spectral matrix,
    /// singular system, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Every restart of a Whittle fit ended without convergence.
    /// The traces record where each restart started and stopped.
    #[error("fit failed: none of the {restarts} restarts converged")]
    FitFailed {
        restarts: usize,
        traces: Vec<RestartTrace>,
    },

    /// A subsample fit inside the support pipeline failed; `index` points
    /// at the offending subsample.
    #[error("subsample {index}: {source}")]
    Subsample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors a caller should fix in its inputs or configuration
    /// (CLI exit code 2), false for numerical failures (exit code 3).
    pub fn is_usage_error(&self) -> bool {
        match self {
            Error::InvalidInput(_) | Error::InvalidConfig(_) | Error::Io(_) | Error::Csv(_)
            | Error::Json(_) => true,
            Error::Numerical(_) | Error::FitFailed { .. } => false,
            Error::Subsample { source, .. } => source.is_usage_error(),
        }
    }
}
