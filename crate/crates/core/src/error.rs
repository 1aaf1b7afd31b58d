use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("no usable rows remain after dropping incomplete records")]
    NoUsableRows,

    #[error("non-numeric value `{value}` in column `{column}` at data row {row}")]
    NonNumeric { column: String, row: usize, value: String },

    #[error("exposure `{column}` has nonpositive value {value} at row {row}; log transform undefined")]
    NonPositiveExposure { column: String, row: usize, value: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch { context: &'static str, expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("covariance matrix is not positive definite (after jitter {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },

    #[error("log-posterior is not finite at the initial state; re-initialize with a different starting point")]
    NonFiniteInitialization,
}

impl Error {
    /// Whether the error comes from numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NotPositiveDefinite { .. } | Error::NonFiniteInitialization)
    }

    pub(crate) fn dims(context: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch { context, expected, found }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
