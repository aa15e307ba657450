//! Continuous algebraic Riccati equation by Newton–Kleinman iteration.
//!
//! Needs only Lyapunov solves: starting from a stabilizing gain K₀, iterate
//!   Aₖ = A − B Kₖ,   AₖᵀX + XAₖ = −(Q + KₖᵀRKₖ),   Kₖ₊₁ = R⁻¹BᵀX
//! until the increment stalls. The initial gain comes from a shifted-Lyapunov
//! (Bass-style) construction so that no nonsymmetric eigensolver is required.

use super::{
    is_hurwitz, is_pd, lu, lyap_solve, machine_floor, sym_eigvals, Matrix,
    NumericsError,
};
use crate::Scalar;

const MAX_NEWTON_ITERS: usize = 80;

/// Solve AᵀX + XA − XBR⁻¹BᵀX + Q = 0 for the stabilizing X ⪰ 0.
///
/// Q must be symmetric positive semidefinite and R symmetric positive
/// definite; (A, B) must be stabilizable (failure to find a stabilizing
/// initial gain is reported as `Stabilizability`).
pub fn solve_are<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    q: &Matrix<T>,
    r: &Matrix<T>,
) -> Result<Matrix<T>, NumericsError> {
    solve_are_with_gain(a, b, q, r, None)
}

/// Same as [`solve_are`], seeding the iteration with a caller-supplied
/// stabilizing gain instead of the built-in construction.
pub fn solve_are_with_gain<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    q: &Matrix<T>,
    r: &Matrix<T>,
    initial_gain: Option<&Matrix<T>>,
) -> Result<Matrix<T>, NumericsError> {
    let n = a.rows();
    let m = b.cols();
    if !a.is_square() {
        return Err(NumericsError::NonSquare { rows: a.rows(), cols: a.cols() });
    }
    if b.rows() != n || q.rows() != n || q.cols() != n || r.rows() != m || r.cols() != m {
        return Err(NumericsError::Dimension {
            context: format!(
                "solve_are: A {}x{}, B {}x{}, Q {}x{}, R {}x{}",
                a.rows(), a.cols(), b.rows(), b.cols(), q.rows(), q.cols(), r.rows(), r.cols()
            ),
        });
    }
    let q_eigs = sym_eigvals(q)?;
    let psd_floor = -machine_floor::<T>(1e-10) * (T::one() + q.frobenius_norm());
    if q_eigs[0] < psd_floor {
        return Err(NumericsError::NotPositiveDefinite {
            min_eigenvalue: q_eigs[0].as_f64(),
        });
    }
    if !is_pd(r, T::zero())? {
        return Err(NumericsError::NotPositiveDefinite {
            min_eigenvalue: sym_eigvals(r)?[0].as_f64(),
        });
    }

    let k0 = match initial_gain {
        Some(k) => {
            if k.rows() != m || k.cols() != n {
                return Err(NumericsError::Dimension {
                    context: format!("initial gain must be {m}x{n}"),
                });
            }
            if !is_hurwitz(&(a - &(b * k)))? {
                return Err(NumericsError::Stabilizability);
            }
            k.clone()
        }
        None => stabilizing_gain(a, b)?,
    };

    // Newton-Kleinman loop.
    let mut gain = k0;
    let mut x_prev: Option<Matrix<T>> = None;
    for _ in 0..MAX_NEWTON_ITERS {
        let a_cl = a - &(b * &gain);
        let rhs = (q + &(&(&gain.transpose() * r) * &gain)).symmetric_part();
        let x = match lyap_solve(&a_cl, &rhs) {
            Ok(x) => x,
            Err(NumericsError::Singular) => {
                return Err(NumericsError::Convergence {
                    context: "closed-loop Lyapunov step became singular".into(),
                })
            }
            Err(e) => return Err(e),
        };
        let increment = match &x_prev {
            Some(prev) => (&x - prev).frobenius_norm(),
            None => T::infinity(),
        };
        gain = lu::solve_many(r, &(&b.transpose() * &x))?;
        let done = increment <= machine_floor::<T>(1e-12) * (T::one() + x.frobenius_norm());
        x_prev = Some(x);
        if done {
            break;
        }
    }
    let x = x_prev.expect("at least one Newton step runs");

    // The residual bound is the contract; the iteration count is not.
    let residual = are_residual(a, b, q, r, &x)?;
    let bound = machine_floor::<T>(1e-9) * (T::one() + q.frobenius_norm());
    if residual > bound {
        return Err(NumericsError::Convergence {
            context: format!(
                "Riccati residual {:.3e} above bound {:.3e}",
                residual.as_f64(),
                bound.as_f64()
            ),
        });
    }
    let shift = Matrix::scaled_identity(n, machine_floor::<T>(1e-10) * (T::one() + x.frobenius_norm()));
    if !is_pd(&(&x + &shift), T::zero())? {
        return Err(NumericsError::Convergence {
            context: "Riccati solution is not positive semidefinite".into(),
        });
    }
    Ok(x)
}

/// Frobenius norm of AᵀX + XA − XBR⁻¹BᵀX + Q.
pub fn are_residual<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    q: &Matrix<T>,
    r: &Matrix<T>,
    x: &Matrix<T>,
) -> Result<T, NumericsError> {
    let bt_x = &b.transpose() * x;
    let r_inv_bt_x = lu::solve_many(r, &bt_x)?;
    let quadratic = &bt_x.transpose() * &r_inv_bt_x;
    let lin = &(&a.transpose() * x) + &(x * a);
    Ok((&(&lin - &quadratic) + q).frobenius_norm())
}

/// A gain K with A − BK Hurwitz, by the shifted-Lyapunov construction:
/// for β above the spectral abscissa of A, solve
/// (A + βI) Z + Z (A + βI)ᵀ = 2 B Bᵀ and take K = Bᵀ Z⁻¹.
///
/// β is escalated (pole pushing) and Z is Tikhonov-regularized when singular,
/// which covers stabilizable-but-not-controllable pairs; every candidate is
/// certified through [`is_hurwitz`] before use.
fn stabilizing_gain<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, NumericsError> {
    let n = a.rows();
    let m = b.cols();
    if is_hurwitz(a)? {
        return Ok(Matrix::zeros(m, n));
    }

    let base = T::one() + a.frobenius_norm();
    let bbt2 = (b * &b.transpose()).scale(T::lit(2.0));
    for shift_pow in 0..4 {
        let beta = base * T::lit(f64::powi(2.0, shift_pow));
        let shifted_t = (a + &Matrix::scaled_identity(n, beta)).transpose();
        let z = match lyap_solve(&shifted_t, &(-&bbt2)) {
            Ok(z) => z,
            Err(NumericsError::Singular) => continue,
            Err(e) => return Err(e),
        };
        for reg_pow in [0i32, -10, -6] {
            let z_reg = if reg_pow == 0 {
                z.clone()
            } else {
                let eps = machine_floor::<T>(f64::powi(10.0, reg_pow)) * (T::one() + z.frobenius_norm());
                &z + &Matrix::scaled_identity(n, eps)
            };
            let z_inv = match lu::inverse(&z_reg) {
                Ok(inv) => inv,
                Err(NumericsError::Singular) => continue,
                Err(e) => return Err(e),
            };
            let k = &b.transpose() * &z_inv;
            if k.is_finite() && is_hurwitz(&(a - &(b * &k)))? {
                return Ok(k);
            }
        }
    }
    Err(NumericsError::Stabilizability)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_are_with_stable_a() {
        // a=−1, b=1, q=1.25, r=1: −2x − x² + 1.25 = 0 at x = 0.5.
        let x = solve_are(
            &Matrix::<f64>::from_f64_rows(&[&[-1.0]]),
            &Matrix::from_f64_rows(&[&[1.0]]),
            &Matrix::from_f64_rows(&[&[1.25]]),
            &Matrix::from_f64_rows(&[&[1.0]]),
        )
        .unwrap();
        assert!((x[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn no_control_reduces_to_lyapunov() {
        // a=−1, b=0: −2x + q₀ = 0 so x = q₀/2.
        for q0 in [0.5, 1.0, 4.0] {
            let x = solve_are(
                &Matrix::<f64>::from_f64_rows(&[&[-1.0]]),
                &Matrix::from_f64_rows(&[&[0.0]]),
                &Matrix::from_f64_rows(&[&[q0]]),
                &Matrix::from_f64_rows(&[&[1.0]]),
            )
            .unwrap();
            assert!((x[(0, 0)] - q0 / 2.0).abs() < 1e-12, "q0={q0}");
        }
    }

    #[test]
    fn integrator_needs_the_stabilizing_init() {
        // a=0, b=1, q=1, r=1: −x² + 1 = 0, PSD root x = 1.
        let x = solve_are(
            &Matrix::<f64>::from_f64_rows(&[&[0.0]]),
            &Matrix::from_f64_rows(&[&[1.0]]),
            &Matrix::from_f64_rows(&[&[1.0]]),
            &Matrix::from_f64_rows(&[&[1.0]]),
        )
        .unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unstable_uncontrollable_pair_is_rejected() {
        let err = solve_are(
            &Matrix::<f64>::from_f64_rows(&[&[1.0]]),
            &Matrix::from_f64_rows(&[&[0.0]]),
            &Matrix::from_f64_rows(&[&[1.0]]),
            &Matrix::from_f64_rows(&[&[1.0]]),
        )
        .unwrap_err();
        assert_eq!(err, NumericsError::Stabilizability);
    }

    #[test]
    fn stabilizable_but_not_controllable() {
        // Unstable mode controllable, stable mode not.
        let a: Matrix<f64> = Matrix::from_f64_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
        let b: Matrix<f64> = Matrix::from_f64_rows(&[&[1.0], &[0.0]]);
        let q: Matrix<f64> = Matrix::identity(2);
        let r: Matrix<f64> = Matrix::identity(1);
        let x = solve_are(&a, &b, &q, &r).unwrap();
        let res = are_residual(&a, &b, &q, &r, &x).unwrap();
        assert!(res <= 1e-9 * (1.0 + q.frobenius_norm()), "residual {res}");
    }

    #[test]
    fn user_supplied_gain_must_stabilize() {
        let a: Matrix<f64> = Matrix::from_f64_rows(&[&[1.0]]);
        let b: Matrix<f64> = Matrix::from_f64_rows(&[&[1.0]]);
        let q: Matrix<f64> = Matrix::identity(1);
        let r: Matrix<f64> = Matrix::identity(1);
        let bad = Matrix::from_f64_rows(&[&[0.5]]);
        assert_eq!(
            solve_are_with_gain(&a, &b, &q, &r, Some(&bad)).unwrap_err(),
            NumericsError::Stabilizability
        );
        let good = Matrix::from_f64_rows(&[&[2.0]]);
        let x = solve_are_with_gain(&a, &b, &q, &r, Some(&good)).unwrap();
        // x solves 2x − x² + 1 = 0, stabilizing root x = 1 + √2.
        assert!((x[(0, 0)] - (1.0 + 2.0f64.sqrt())).abs() < 1e-10);
    }
}
