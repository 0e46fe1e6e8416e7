use alloc::boxed::Box;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("sublevel set is empty: level {level} is below the minimum value {min_value}")]
    EmptySublevelSet { level: f64, min_value: f64 },
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("beta * m = {product} is outside the guarantee regime (needs beta * m > 4)")]
    OutOfRegime { product: f64 },
    #[error("instance has no rounds")]
    EmptyInstance,
    #[error("control matrix is singular (condition number {condition:e})")]
    SingularControl { condition: f64 },
    #[error("round {round}: {source}")]
    Round { round: usize, source: Box<Error> },
    #[error("internal error: {0}")]
    Internal(&'static str),
}

impl Error {
    pub(crate) fn at_round(self, round: usize) -> Self {
        Error::Round {
            round,
            source: Box::new(self),
        }
    }
}
