//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the simulation and estimation routines.
#[derive(Debug, Error)]
pub enum CtpError {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numerical routine failed (non-Hermitian input, loss of positive
    /// definiteness, singular system, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An operation was invoked on an object in the wrong state
    /// (e.g. an unfitted normalizer).
    #[error("invalid state: {0}")]
    State(String),

    /// Configuration file or scenario errors.
    #[error("configuration error: {0}")]
    Config(String),

    /// Training diverged (NaN/inf loss).
    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, CtpError>;
