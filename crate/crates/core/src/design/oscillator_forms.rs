//! Closed-form cost and controller for the oscillator network:
//!   q(δ, ω) = ¼‖sin δ − sin δˢ‖²_{ΞR⁻¹Ξ} + ‖ω‖²_W,  W = D or D − S⁻¹/(4ξ),
//!   u*(δ)   = −½ R⁻¹ Ξ (sin δ − sin δˢ).
//! These must agree with the generic designed cost and controller built from
//! the oscillator model and energy CLF; that agreement is tested, not assumed.

use super::DesignError;
use crate::model::{check_assumption1, OscillatorNetwork};
use crate::numerics::{inverse, is_pd, Matrix, Vector};
use crate::Scalar;

/// Evaluators for the oscillator closed forms, on the full state x = (δ, ω).
#[derive(Clone, Debug)]
pub struct OscillatorClosedForms<T> {
    edge_count: usize,
    node_count: usize,
    sin_s: Vector<T>,
    /// ¼ Ξ R⁻¹ Ξ.
    sin_weight: Matrix<T>,
    /// D in nominal mode, D − S⁻¹/(4ξ) in robust mode.
    omega_weight: Matrix<T>,
    /// −½ R⁻¹ Ξ.
    control_gain: Matrix<T>,
}

impl<T: Scalar> OscillatorClosedForms<T> {
    pub fn cost(&self, x: &Vector<T>) -> T {
        let sin_dev = &x.segment(0, self.edge_count).map(|v| v.sin()) - &self.sin_s;
        let omega = x.segment(self.edge_count, self.node_count);
        self.sin_weight.quadratic_form(&sin_dev) + self.omega_weight.quadratic_form(&omega)
    }

    pub fn control(&self, x: &Vector<T>) -> Vector<T> {
        let sin_dev = &x.segment(0, self.edge_count).map(|v| v.sin()) - &self.sin_s;
        self.control_gain.mul_vec(&sin_dev)
    }

    pub fn sin_weight(&self) -> &Matrix<T> {
        &self.sin_weight
    }

    pub fn omega_weight(&self) -> &Matrix<T> {
        &self.omega_weight
    }

    pub fn control_gain(&self) -> &Matrix<T> {
        &self.control_gain
    }
}

pub fn oscillator_closed_forms<T: Scalar>(
    net: &OscillatorNetwork<T>,
    r: &Matrix<T>,
    robust: Option<(&Matrix<T>, T)>,
) -> Result<OscillatorClosedForms<T>, DesignError> {
    if !check_assumption1(net) {
        return Err(DesignError::Assumption1Violated);
    }
    let m = net.edge_count();
    let n = net.node_count();
    if r.rows() != m || r.cols() != m {
        return Err(DesignError::Dimension {
            context: format!("R is {}x{}, expected {m}x{m}", r.rows(), r.cols()),
        });
    }
    if !is_pd(r, T::zero())? {
        return Err(DesignError::NotPositiveDefinite { what: "R".into() });
    }
    let r_inv = inverse(r)?;

    let omega_weight = match robust {
        None => net.damping().clone(),
        Some((s, xi)) => {
            if s.rows() != n || s.cols() != n {
                return Err(DesignError::Dimension {
                    context: format!("S is {}x{}, expected {n}x{n}", s.rows(), s.cols()),
                });
            }
            if !is_pd(s, T::zero())? {
                return Err(DesignError::NotPositiveDefinite { what: "S".into() });
            }
            if xi <= T::zero() {
                return Err(DesignError::XiNotPositive { value: xi.as_f64() });
            }
            let shrunk =
                net.damping() - &inverse(s)?.scale((T::lit(4.0) * xi).recip());
            if !is_pd(&shrunk, T::zero())? {
                return Err(DesignError::RobustDampingCondition);
            }
            shrunk
        }
    };

    let xi_mat = net.coupling();
    let sin_weight = (&(xi_mat * &r_inv) * xi_mat)
        .scale(T::lit(0.25))
        .symmetric_part();
    let control_gain = (&r_inv * xi_mat).scale(-T::lit(0.5));

    Ok(OscillatorClosedForms {
        edge_count: m,
        node_count: n,
        sin_s: net.delta_s().map(|v| v.sin()),
        sin_weight,
        omega_weight,
        control_gain,
    })
}
