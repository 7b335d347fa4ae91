//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by space construction, model building, time evolution, and
/// configuration handling.
#[derive(Debug, Error)]
pub enum SimError {
    /// A precondition on user input was violated (bad dimensions, zero
    /// detuning, malformed pairing, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two objects living on different Hilbert spaces were combined.
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    /// The integrator diverged or produced non-finite values.
    #[error("numerical failure at t = {t:.6e} s: {message}")]
    Numerical { t: f64, message: String },

    /// Configuration file could not be parsed or failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem problem while reading configs or writing results.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SimError::InvalidInput(msg.into())
    }

    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        SimError::SpaceMismatch(msg.into())
    }

    pub(crate) fn numerical(t: f64, msg: impl Into<String>) -> Self {
        SimError::Numerical { t, message: msg.into() }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, SimError>;
