//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Input contained NaN or infinite values.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// A matrix that must be positive definite has an eigenvalue <= 0.
    #[error("matrix not positive definite (min eigenvalue {min_eig:e})")]
    NotPositiveDefinite { min_eig: f64 },

    /// Hawkes excitation spectral radius >= 1; the process has no stationary regime.
    #[error("Hawkes model not stationary (spectral radius {radius:.6})")]
    NotStationary { radius: f64 },

    /// Model parameters are structurally invalid (e.g. non-positive stationary intensity).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Expected simulation volume exceeds the configured cap.
    #[error("expected event budget exceeded: {expected:.3e} events > cap {cap:.3e}")]
    BudgetExceeded { expected: f64, cap: f64 },

    /// Dimensions of two inputs do not agree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An aggregate over an empty collection was requested.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// A spectral matrix has a zero diagonal entry where a positive one is required.
    #[error("degenerate channel {channel}: zero spectral power")]
    DegenerateChannel { channel: usize },

    /// Argument lies outside the mathematical domain of the function.
    #[error("out of domain: {0}")]
    OutOfDomain(String),

    /// Generic invalid argument.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// File parse failure, with 1-based line number where applicable.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },

    /// Underlying I/O failure.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// JSON (de)serialization failure.
    #[error("json error on {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// True for failures of the numerical core (as opposed to bad usage or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::NotStationary { .. }
                | Error::InvalidModel(_)
                | Error::BudgetExceeded { .. }
                | Error::DegenerateChannel { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
