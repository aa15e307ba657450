//! Closed-form state-cost matrices for the linear family with V = ½xᵀPx.

use super::DesignError;
use crate::numerics::{inverse, is_pd, Matrix};
use crate::Scalar;

/// Disturbance data for the robust linear cost.
pub struct RobustLinearPenalty<'a, T> {
    pub bbar: &'a Matrix<T>,
    pub s: &'a Matrix<T>,
    pub xi: T,
}

/// The two closed forms of Q for q(x) = xᵀQx.
///
/// `derived` is the matrix that expands the designed cost symbolically:
/// Q = ¼PBR⁻¹BᵀP − ½(AᵀP + PA) [− (1/4ξ)PB̄S⁻¹B̄ᵀP]. With it the
/// Hamilton-Jacobi bracket vanishes identically and the Riccati oracle
/// returns P/2. `paper_literal` keeps the drift term unhalved
/// (−AᵀP − PA) and is exposed for side-by-side comparison; it misses the
/// identity by ½xᵀ(AᵀP + PA)x.
#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LinearQ<T: Scalar + serde::Serialize> {
    pub derived: Matrix<T>,
    pub paper_literal: Matrix<T>,
}

pub fn linear_q<T: Scalar + serde::Serialize>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    p: &Matrix<T>,
    r: &Matrix<T>,
    robust: Option<RobustLinearPenalty<'_, T>>,
) -> Result<LinearQ<T>, DesignError> {
    let n = a.rows();
    if !a.is_square() || p.rows() != n || p.cols() != n || b.rows() != n {
        return Err(DesignError::Dimension {
            context: format!(
                "linear_q: A {}x{}, B {}x{}, P {}x{}",
                a.rows(), a.cols(), b.rows(), b.cols(), p.rows(), p.cols()
            ),
        });
    }
    if r.rows() != b.cols() || r.cols() != b.cols() {
        return Err(DesignError::Dimension {
            context: format!("linear_q: R is {}x{}, expected {0}x{0}", r.rows(), b.cols()),
        });
    }
    for (m, what) in [(p, "P"), (r, "R")] {
        if !is_pd(m, T::zero())? {
            return Err(DesignError::NotPositiveDefinite { what: what.into() });
        }
    }

    let pb = p * b;
    let control_term = (&(&pb * &inverse(r)?) * &pb.transpose())
        .scale(T::lit(0.25))
        .symmetric_part();
    let drift = &(&a.transpose() * p) + &(p * a);

    let mut derived = &control_term - &drift.scale(T::lit(0.5));
    let mut paper_literal = &control_term - &drift;

    if let Some(RobustLinearPenalty { bbar, s, xi }) = robust {
        if bbar.rows() != n {
            return Err(DesignError::Dimension {
                context: format!("linear_q: Bbar must have {n} rows, found {}", bbar.rows()),
            });
        }
        if s.rows() != bbar.cols() || s.cols() != bbar.cols() {
            return Err(DesignError::Dimension {
                context: format!("linear_q: S is {}x{}, expected {0}x{0}", s.rows(), bbar.cols()),
            });
        }
        if !is_pd(s, T::zero())? {
            return Err(DesignError::NotPositiveDefinite { what: "S".into() });
        }
        if xi <= T::zero() {
            return Err(DesignError::XiNotPositive { value: xi.as_f64() });
        }
        let pbb = p * bbar;
        let disturbance_term = (&(&pbb * &inverse(s)?) * &pbb.transpose())
            .scale((T::lit(4.0) * xi).recip())
            .symmetric_part();
        derived = &derived - &disturbance_term;
        paper_literal = &paper_literal - &disturbance_term;
    }

    Ok(LinearQ {
        derived: derived.symmetric_part(),
        paper_literal: paper_literal.symmetric_part(),
    })
}
