//! Crate-wide error type.
//!
//! Library code never panics on bad input; every fallible operation returns
//! [`Result`]. Batch drivers are expected to downgrade per-item failures
//! (e.g. a series too short to test) to counted statuses instead of letting
//! them abort the batch.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv parse error in {path}: {message}")]
    Csv { path: String, message: String },

    #[error("duplicate timestamp {timestamp} in {asset_id}")]
    DuplicateTimestamp { asset_id: String, timestamp: i64 },

    #[error("{context}: series too short ({len} observations, need at least {min})")]
    SeriesTooShort {
        context: &'static str,
        len: usize,
        min: usize,
    },

    #[error("mixed frequencies: {0}")]
    MixedFrequencies(String),

    #[error("series alignment produced an empty intersection of timestamps")]
    EmptyAlignment,

    #[error("length mismatch in {context}: {left} vs {right}")]
    LengthMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error(
        "optimizer failed to converge after {iterations} iterations \
         (objective spread {spread:.3e}, gradient norm {grad_norm:.3e})"
    )]
    NoConvergence {
        iterations: usize,
        spread: f64,
        grad_norm: f64,
    },

    #[error("near-singular moment matrix in {context} (condition number {condition:.3e})")]
    NearSingular { context: &'static str, condition: f64 },

    #[error("all {0} candidate model fits failed")]
    AllFitsFailed(usize),

    #[error("forecast unstable: {0}")]
    UnstableForecast(String),

    #[error("all observations excluded: {0}")]
    AllExcluded(&'static str),

    #[error("json error: {0}")]
    Json(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// True when the error marks a series that should be counted as
    /// `Dropped` by a batch driver rather than aborting the batch.
    pub fn is_droppable(&self) -> bool {
        matches!(self, Error::SeriesTooShort { .. })
    }
}
