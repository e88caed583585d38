//! Crate-wide error type with the exit-code mapping used by the CLI.

use thiserror::Error;

/// Errors produced by population ingestion, design, inference and diagnostics.
#[derive(Error, Debug)]
pub enum Error {
    /// Invalid inputs, malformed files, out-of-domain parameters.
    #[error("{0}")]
    Validation(String),

    /// A cell that should hold a number does not. Row/column are 1-based,
    /// the row count excludes the header.
    #[error("non-numeric at (row {row}, col {col})")]
    NonNumeric { row: usize, col: usize },

    /// A required cell is absent. Row/column are 1-based.
    #[error("missing value at (row {row}, col {col})")]
    MissingCell { row: usize, col: usize },

    /// A covariance matrix required to be positive definite is not.
    /// Singularity is reported, never silently regularized.
    #[error("singular covariance: {0}")]
    SingularCovariance(String),

    /// The rerandomization loop exhausted its draw budget. Carries the number
    /// of draws attempted and the smallest imbalance observed, so the caller
    /// can decide whether to raise the threshold or the budget.
    #[error(
        "no acceptable assignment within {draws} draws (minimum M observed: {min_m:.6}); \
         raise the threshold or max_draws"
    )]
    MaxDrawsExceeded { draws: u64, min_m: f64 },

    /// Exhaustive enumeration was requested beyond the combinatorial guard.
    #[error("enumeration guard exceeded: C({n}, {n1}) > {guard}")]
    EnumerationGuard { n: usize, n1: usize, guard: u64 },

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// CSV-level failure (framing, encoding).
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code contract: 0 success, 2 validation, 3 draw budget
    /// exhausted, 4 singular covariance.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MaxDrawsExceeded { .. } => 3,
            Error::SingularCovariance(_) => 4,
            _ => 2,
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
