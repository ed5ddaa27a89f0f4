//! Config-driven experiment runner.

pub mod config;
pub mod output;
pub mod runner;

use thiserror::Error;

/// Command failure, classified by exit code.
#[derive(Debug, Error)]
pub enum Failure {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("assertion failed: {0}")]
    Assertion(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Io(_) => 3,
            Failure::Solver(_) => 4,
            Failure::Assertion(_) => 5,
        }
    }
}

impl From<msras_core::Error> for Failure {
    fn from(e: msras_core::Error) -> Self {
        use msras_core::Error as E;
        match e {
            E::Io(err) => Failure::Io(err.to_string()),
            E::InvalidArgument(_) | E::InvalidGrid(_) | E::UnknownModel(_) | E::Parse(_) => Failure::Validation(e.to_string()),
            other => Failure::Solver(other.to_string()),
        }
    }
}
