//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad caller-supplied data (dimension mismatch, non-finite input, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// Invalid parameter value (nonpositive lengthscale, m > n, ...).
    #[error("invalid parameter: {0}")]
    Param(String),

    /// Unknown benchmark or method name.
    #[error("unknown name: {0}")]
    Lookup(String),

    /// Numerical failure that survived all recovery attempts.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Operation not defined for this model variant.
    #[error("unsupported variant: {0}")]
    UnsupportedVariant(String),

    /// Configuration file problem; the message names the offending key.
    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
