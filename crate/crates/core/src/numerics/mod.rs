//! Self-contained dense linear algebra: vectors and matrices, LU solves,
//! symmetric eigenvalues by cyclic Jacobi iteration, Lyapunov and algebraic
//! Riccati equations, and finite-difference differentiation.
//!
//! Sizes here are small (state dimensions below ~10), so everything is plain
//! row-major storage and O(n³) dense algorithms.

mod eigen;
mod finite_diff;
mod lu;
mod lyapunov;
mod matrix;
mod riccati;
mod vector;

pub use eigen::{is_pd, loewner_leq, sym_eigvals};
pub use finite_diff::finite_diff_gradient;
pub use lu::{inverse, solve, solve_many};
pub use lyapunov::{is_hurwitz, kron, lyap_solve};
pub use matrix::Matrix;
pub use riccati::{solve_are, solve_are_with_gain};
pub use vector::Vector;

use crate::Scalar;
use thiserror::Error;

/// Errors from the dense linear-algebra routines. Diagnostics are carried as
/// `f64` regardless of the scalar type in use.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumericsError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NonSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {context}")]
    Dimension { context: String },
    #[error("matrix asymmetry {asymmetry:.3e} exceeds tolerance {tolerance:.3e}")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },
    #[error("matrix is singular or numerically rank-deficient")]
    Singular,
    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("no stabilizing initial gain found; (A, B) appears not stabilizable")]
    Stabilizability,
    #[error("iteration failed to converge: {context}")]
    Convergence { context: String },
}

/// An `f64`-scale tolerance, widened to a few machine epsilons when the
/// scalar type is coarser than `f64` (so the same code converges for `f32`).
pub fn machine_floor<T: Scalar>(f64_floor: f64) -> T {
    let floor = T::lit(f64_floor);
    let eps = T::epsilon() * T::lit(16.0);
    if eps > floor {
        eps
    } else {
        floor
    }
}

/// Symmetry tolerance for an input of Frobenius norm `fro`: 1e-10 · (1 + fro).
pub fn symmetry_tol<T: Scalar>(fro: T) -> T {
    machine_floor::<T>(1e-10) * (T::one() + fro)
}
