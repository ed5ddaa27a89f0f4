use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("matrix is singular to working precision (pivot step {pivot}, |pivot| = {magnitude:e})")]
    Singular { pivot: usize, magnitude: f64 },

    #[error("coarse operator is rank deficient (pivot step {pivot}, contributed by subdomain {subdomain})")]
    RankDeficientCoarse { pivot: usize, subdomain: usize },

    #[error("degree of freedom {0} is not covered by any subdomain")]
    UncoveredDof(usize),

    #[error("point ({0}, {1}) lies outside the domain")]
    PointOutsideDomain(f64, f64),

    #[error("eigensolver failed on subdomain {subdomain}: {reason}")]
    Eigensolver { subdomain: usize, reason: String },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
