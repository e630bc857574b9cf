use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("matrix is not Hermitian: max |M - M^H| = {0:e}")]
    NotHermitian(f64),

    #[error("arcsin argument {value} outside [-1, 1] at ({row}, {col})")]
    DomainError { row: usize, col: usize, value: f64 },

    #[error("unsupported modulation `{0}`")]
    UnsupportedModulation(String),

    #[error("bit count {bits} is not a multiple of {bits_per_symbol}")]
    LengthMismatch { bits: usize, bits_per_symbol: usize },

    #[error("symbol {0} is not a constellation point")]
    UnknownSymbol(num_complex::Complex64),

    #[error("received covariance has non-positive diagonal entry {value} at {index}")]
    DegenerateCovariance { index: usize, value: f64 },

    #[error("channel Gram matrix is rank deficient")]
    RankDeficient,

    #[error("equalization denominator for user {user} is degenerate ({magnitude:e})")]
    DegenerateDenominator { user: usize, magnitude: f64 },

    #[error("cannot rescale a zero vector")]
    ZeroVector,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
