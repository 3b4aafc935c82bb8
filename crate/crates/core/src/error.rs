use thiserror::Error;

/// Errors produced by the kernel, geometry, evaluation and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid kernel spec: {0}")]
    InvalidKernel(String),

    #[error("capability error: {0}")]
    Capability(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("node system is not compatible with permutation {sigma}: {reason}")]
    IncompatibleSimplex { sigma: String, reason: String },

    #[error("jacobian unavailable: {0}")]
    JacobianUnavailable(String),

    #[error("no descent direction exists: {0}")]
    Infeasible(String),

    #[error("step too large: {0}")]
    StepTooLarge(String),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
