use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid space descriptor: {0}")]
    InvalidSpace(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("precision of {0} digits is outside the supported range 17..=200")]
    Precision(u32),

    #[error("refusing to certify: {0}")]
    NotCertifiable(String),

    #[error("certificate mismatch: {0}")]
    Mismatch(String),

    #[error("unknown schema version {0:?}")]
    Schema(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
