//! Sparse linear algebra: compressed-row storage, a pivoting sparse LU for
//! the indefinite per-step systems, preconditioned conjugate gradients and
//! extreme generalized eigenpairs.

mod cg;
mod csr;
pub mod dense;
mod eigen;
mod lu;
mod ordering;

pub use cg::{cg, solve_spd, CgOptions, CgOutcome};
pub use csr::{CsrMatrix, SparseSym, TripletBuilder};
pub use eigen::{eig_extremes, EigOptions, EigPair, Which};
pub use lu::{solve_saddle, LuOptions, SparseLu};
pub use ordering::reverse_cuthill_mckee;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not symmetric (entry ({row}, {col}) differs from its transpose)")]
    NotSymmetric { row: usize, col: usize },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("matrix is numerically singular at elimination step {step} (pivot ratio {pivot:e})")]
    Singular { step: usize, pivot: f64 },
    #[error("{0}")]
    InvalidInput(&'static str),
}
