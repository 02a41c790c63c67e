//! Error type shared across the crate.
//!
//! Every variant maps to a stable machine-readable category string so that
//! the command-line front end can report structured failures and pick exit
//! codes without matching on display text.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a precondition (length mismatch, symbol out of
    /// range, zero-length input where forbidden, bad parameter domain, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A model definition violated its invariants.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// An exact computation was requested outside the configured exact
    /// envelope; the caller should fall back to bracket mode.
    #[error("exact envelope exceeded: {0}; use bracket mode")]
    EnvelopeExceeded(String),

    /// The induced state chain has no unique stationary distribution.
    #[error("no unique stationary distribution: {0}")]
    NonUniqueStationary(String),

    /// An iterative solver failed to reach the requested tolerance.
    #[error("solver did not converge: {0}")]
    Convergence(String),

    /// Bracketed normalizer cells left a decision ambiguous.
    #[error("indeterminate result: {0}")]
    Indeterminate(String),

    /// A quantity violated a proven inequality beyond numerical slack;
    /// this signals a bug, not a user error.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    /// The requested experiment does not apply to the configured process.
    #[error("unsupported process for this experiment: {0}")]
    UnsupportedProcess(String),

    /// Random access past the end of a finite oracle bit source.
    #[error("oracle bit index out of range: {0}")]
    OracleIndex(String),

    /// A persisted file could not be parsed or failed its version check.
    #[error("malformed file: {0}")]
    Format(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable category tag for structured error reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::InvalidModel(_) => "invalid-model",
            Error::EnvelopeExceeded(_) => "envelope",
            Error::NonUniqueStationary(_) => "non-unique-stationary",
            Error::Convergence(_) => "convergence",
            Error::Indeterminate(_) => "indeterminate",
            Error::InvariantViolation(_) => "invariant",
            Error::UnsupportedProcess(_) => "unsupported-process",
            Error::OracleIndex(_) => "oracle-index",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}
