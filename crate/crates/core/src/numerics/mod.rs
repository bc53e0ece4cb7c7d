//! Shared dense linear algebra and generic optimization primitives.
//!
//! Everything downstream (lattice selection, the rate formulas, and both
//! iterative optimizers) is built from the handful of operations here:
//! Cholesky factorization, SPD solves, exact integer rank, bisection, BFGS
//! with a Wolfe cubic line search, and a log-barrier Newton loop.

mod linalg;
mod matrix;
mod optim;

pub use linalg::{cholesky, solve_spd};
pub(crate) use linalg::solve_general;
pub use matrix::{IntegerMatrix, Matrix};
pub use optim::{
    barrier_newton, bfgs_minimize, bisection, fd_gradient, fd_hessian, OptimizerReport,
    TerminationReason, WolfeParams,
};

use core::fmt;

/// Failure modes of the numeric primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumericsError {
    /// A pivot of a supposedly SPD matrix was non-positive; the covariance is
    /// degenerate and the caller must regularize or reject the realization.
    NotPositiveDefinite,
    /// Operand shapes do not conform.
    DimensionMismatch,
    /// Bisection was handed a bracket on which the function does not change
    /// sign.
    NoSignChange,
    /// The barrier method was started at a point violating a strict
    /// inequality constraint; the caller must shrink toward the interior.
    InfeasibleStart,
}

impl fmt::Display for NumericsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotPositiveDefinite => write!(f, "matrix is not positive definite"),
            Self::DimensionMismatch => write!(f, "operand dimensions do not conform"),
            Self::NoSignChange => write!(f, "bisection bracket has no sign change"),
            Self::InfeasibleStart => write!(f, "barrier start point is not strictly feasible"),
        }
    }
}

impl core::error::Error for NumericsError {}
