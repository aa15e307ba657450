//! Continuous Lyapunov equations by Kronecker vectorization, and the
//! Lyapunov-based Hurwitz certificate used by the Riccati solver.

use super::{is_pd, lu, Matrix, NumericsError};
use crate::Scalar;

/// Kronecker product A ⊗ B.
pub fn kron<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    Matrix::from_fn(a.rows() * b.rows(), a.cols() * b.cols(), |i, j| {
        a[(i / b.rows(), j / b.cols())] * b[(i % b.rows(), j % b.cols())]
    })
}

/// Solve AᵀX + XA + C = 0 for symmetric C.
///
/// Vectorized as (I ⊗ Aᵀ + Aᵀ ⊗ I) vec(X) = −vec(C); the problem sizes here
/// keep the n²×n² system small. Fails with `Singular` when A has eigenvalues
/// λᵢ + λⱼ = 0 (in particular whenever A is not Hurwitz and C demands it).
pub fn lyap_solve<T: Scalar>(a: &Matrix<T>, c: &Matrix<T>) -> Result<Matrix<T>, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::NonSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if c.rows() != a.rows() || c.cols() != a.rows() {
        return Err(NumericsError::Dimension {
            context: format!(
                "lyap_solve: A is {}x{}, C is {}x{}",
                a.rows(),
                a.cols(),
                c.rows(),
                c.cols()
            ),
        });
    }
    let n = a.rows();
    let at = a.transpose();
    let eye = Matrix::identity(n);
    let system = &kron(&eye, &at) + &kron(&at, &eye);

    // Column-stacked vec(C).
    let mut rhs = super::Vector::zeros(n * n);
    for j in 0..n {
        for i in 0..n {
            rhs[j * n + i] = -c[(i, j)];
        }
    }
    let sol = lu::solve(&system, &rhs)?;
    let x = Matrix::from_fn(n, n, |i, j| sol[j * n + i]);
    Ok(x.symmetric_part())
}

/// Exact Hurwitz certificate: A is Hurwitz iff AᵀX + XA = −I has a positive
/// definite solution. Avoids a general nonsymmetric eigensolver.
pub fn is_hurwitz<T: Scalar>(a: &Matrix<T>) -> Result<bool, NumericsError> {
    match lyap_solve(a, &Matrix::identity(a.rows())) {
        Ok(x) => is_pd(&x, T::zero()),
        Err(NumericsError::Singular) => Ok(false),
        Err(e) => Err(e),
    }
}
