//! LU factorization with partial pivoting; linear solves and inversion.

use super::{Matrix, NumericsError, Vector};
use crate::Scalar;

struct Lu<T> {
    /// Combined L (unit lower) and U factors.
    lu: Matrix<T>,
    /// Row permutation: factored row i came from input row `perm[i]`.
    perm: Vec<usize>,
}

fn factor<T: Scalar>(a: &Matrix<T>) -> Result<Lu<T>, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::NonSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let pivot_floor = T::epsilon() * T::lit(n as f64) * a.max_abs();

    for k in 0..n {
        let mut pivot_row = k;
        let mut pivot_val = lu[(k, k)].abs();
        for i in (k + 1)..n {
            if lu[(i, k)].abs() > pivot_val {
                pivot_val = lu[(i, k)].abs();
                pivot_row = i;
            }
        }
        if pivot_val <= pivot_floor || !pivot_val.is_finite() {
            return Err(NumericsError::Singular);
        }
        if pivot_row != k {
            perm.swap(k, pivot_row);
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(pivot_row, j)];
                lu[(pivot_row, j)] = tmp;
            }
        }
        for i in (k + 1)..n {
            let factor = lu[(i, k)] / lu[(k, k)];
            lu[(i, k)] = factor;
            for j in (k + 1)..n {
                let sub = factor * lu[(k, j)];
                lu[(i, j)] -= sub;
            }
        }
    }
    Ok(Lu { lu, perm })
}

fn substitute<T: Scalar>(f: &Lu<T>, b: &Vector<T>) -> Vector<T> {
    let n = f.lu.rows();
    let mut y = Vector::from_fn(n, |i| b[f.perm[i]]);
    for i in 1..n {
        let mut acc = y[i];
        for j in 0..i {
            acc -= f.lu[(i, j)] * y[j];
        }
        y[i] = acc;
    }
    for i in (0..n).rev() {
        let mut acc = y[i];
        for j in (i + 1)..n {
            acc -= f.lu[(i, j)] * y[j];
        }
        y[i] = acc / f.lu[(i, i)];
    }
    y
}

/// Solve A x = b.
pub fn solve<T: Scalar>(a: &Matrix<T>, b: &Vector<T>) -> Result<Vector<T>, NumericsError> {
    if a.rows() != b.len() {
        return Err(NumericsError::Dimension {
            context: format!("solve: A is {}x{}, b has length {}", a.rows(), a.cols(), b.len()),
        });
    }
    let f = factor(a)?;
    Ok(substitute(&f, b))
}

/// Solve A X = B column by column.
pub fn solve_many<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, NumericsError> {
    if a.rows() != b.rows() {
        return Err(NumericsError::Dimension {
            context: format!("solve_many: A is {}x{}, B is {}x{}", a.rows(), a.cols(), b.rows(), b.cols()),
        });
    }
    let f = factor(a)?;
    let mut x = Matrix::zeros(a.cols(), b.cols());
    for j in 0..b.cols() {
        let col = substitute(&f, &b.column(j));
        for i in 0..x.rows() {
            x[(i, j)] = col[i];
        }
    }
    Ok(x)
}

pub fn inverse<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>, NumericsError> {
    solve_many(a, &Matrix::identity(a.rows()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_2x2_hand_checked() {
        // [2 1; 1 3] x = [3; 5]  =>  x = (4/5, 7/5)
        let a: Matrix<f64> = Matrix::from_f64_rows(&[&[2.0, 1.0], &[1.0, 3.0]]);
        let b = Vector::from_f64s(&[3.0, 5.0]);
        let x = solve(&a, &b).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14);
        assert!((x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a: Matrix<f64> =
            Matrix::from_f64_rows(&[&[4.0, -2.0, 1.0], &[3.0, 6.0, -4.0], &[2.0, 1.0, 8.0]]);
        let inv = inverse(&a).unwrap();
        let eye = &a * &inv;
        let err = (&eye - &Matrix::identity(3)).max_abs();
        assert!(err < 1e-13, "residual {err}");
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a: Matrix<f64> = Matrix::from_f64_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(solve(&a, &Vector::from_f64s(&[1.0, 1.0])), Err(NumericsError::Singular));
    }
}
