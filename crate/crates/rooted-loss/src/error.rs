//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by dataset handling, loss evaluation, and training.
#[derive(Debug, Error)]
pub enum Error {
    /// A dataset, batch, or trace had no rows where at least one is required.
    #[error("empty input: {0}")]
    Empty(&'static str),

    /// Shapes that must agree did not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A scalar configuration value was out of its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The labels attached to a dataset do not fit the requested operation,
    /// e.g. margin losses on multiclass labels.
    #[error("label mismatch: {0}")]
    LabelMismatch(String),

    /// A delimited text file failed to parse. Lines and columns are 1-based.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// An eigensolve was asked for on a matrix that is not symmetric.
    #[error("matrix is not symmetric: max |a[i,j] - a[j,i]| = {max_asymmetry:.3e}")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
