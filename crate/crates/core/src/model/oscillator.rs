//! Coupled-oscillator network data: incidence, coupling, inertia, damping,
//! nominal and induced steady-state edge angles, plus the steady-state solver.

use super::ModelError;
use crate::numerics::{self, machine_floor, Matrix, Vector};
use crate::Scalar;

/// Network parameters for the oscillator model, already reduced to edge
/// coordinates δ = 𝓑ᵀθ.
#[derive(Clone, Debug)]
pub struct OscillatorNetwork<T> {
    incidence: Matrix<T>,
    coupling: Matrix<T>,
    inertia: Matrix<T>,
    damping: Matrix<T>,
    delta_star: Vector<T>,
    delta_s: Vector<T>,
    delta_s_image_residual: T,
}

/// Outcome of the two-route steady-state computation.
#[derive(Debug, Clone)]
pub struct SteadyState<T> {
    /// Newton-polished steady state (the value to use downstream).
    pub delta_s: Vector<T>,
    /// Limit reached by simulating the unforced dynamics.
    pub simulated: Vector<T>,
    /// Max-norm gap between the two routes.
    pub route_gap: T,
    /// Distance of the initial condition from Im(𝓑ᵀ); nonzero values flag a
    /// raw edge-coordinate seed that no node-angle vector can realize.
    pub initial_image_residual: T,
    /// Simulated time until the frequencies settled.
    pub settled_time: T,
}

impl<T: Scalar> OscillatorNetwork<T> {
    pub fn new(
        incidence: Matrix<T>,
        coupling: Matrix<T>,
        inertia: Matrix<T>,
        damping: Matrix<T>,
        delta_star: Vector<T>,
        delta_s: Vector<T>,
    ) -> Result<Self, ModelError> {
        let n = incidence.rows();
        let m = incidence.cols();
        validate_incidence(&incidence)?;
        validate_diagonal(&coupling, m, "coupling matrix Xi")?;
        validate_diagonal(&inertia, n, "inertia matrix M")?;
        validate_diagonal(&damping, n, "damping matrix D")?;
        for (v, what) in [(&delta_star, "delta_star"), (&delta_s, "delta_s")] {
            if v.len() != m {
                return Err(ModelError::Dimension {
                    context: format!("{what} has length {}, expected {m}", v.len()),
                });
            }
            if v.norm_inf() >= T::FRAC_PI_2() {
                return Err(ModelError::Dimension {
                    context: format!("{what} leaves the open box (-pi/2, pi/2)"),
                });
            }
        }

        // The coupling balance and the image membership of δˢ are recorded,
        // not enforced: [`check_assumption1`] reports them, and an unbalanced
        // δˢ is rejected later as a non-equilibrium when a model is built.
        let net = Self {
            incidence,
            coupling,
            inertia,
            damping,
            delta_star,
            delta_s,
            delta_s_image_residual: T::zero(),
        };
        let (_, image_residual) = net.project_onto_image(&net.delta_s);
        Ok(Self { delta_s_image_residual: image_residual, ..net })
    }

    /// Build the network by computing δˢ from an initial condition: node
    /// angles θ₀ map to δ₀ = 𝓑ᵀθ₀, raw edge coordinates pass through as-is.
    pub fn with_steady_state_from(
        incidence: Matrix<T>,
        coupling: Matrix<T>,
        inertia: Matrix<T>,
        damping: Matrix<T>,
        delta_star: Vector<T>,
        delta0: &Vector<T>,
    ) -> Result<(Self, SteadyState<T>), ModelError> {
        let probe = Self::new(
            incidence,
            coupling,
            inertia,
            damping,
            delta_star.clone(),
            delta_star,
        )?;
        let ss = steady_state_angles(&probe, delta0)?;
        let net = Self::new(
            probe.incidence,
            probe.coupling,
            probe.inertia,
            probe.damping,
            probe.delta_star,
            ss.delta_s.clone(),
        )?;
        Ok((net, ss))
    }

    pub fn node_count(&self) -> usize {
        self.incidence.rows()
    }

    pub fn edge_count(&self) -> usize {
        self.incidence.cols()
    }

    pub fn incidence(&self) -> &Matrix<T> {
        &self.incidence
    }

    pub fn coupling(&self) -> &Matrix<T> {
        &self.coupling
    }

    pub fn inertia(&self) -> &Matrix<T> {
        &self.inertia
    }

    pub fn damping(&self) -> &Matrix<T> {
        &self.damping
    }

    pub fn delta_star(&self) -> &Vector<T> {
        &self.delta_star
    }

    pub fn delta_s(&self) -> &Vector<T> {
        &self.delta_s
    }

    /// Distance of the stored δˢ from Im(𝓑ᵀ).
    pub fn delta_s_image_residual(&self) -> T {
        self.delta_s_image_residual
    }

    /// Edge coordinates δ = 𝓑ᵀθ of a node-angle vector.
    pub fn edge_coordinates(&self, theta: &Vector<T>) -> Vector<T> {
        self.incidence.transpose().mul_vec(theta)
    }

    /// ‖𝓑 Ξ (sin δ − sin δ*)‖∞, the balance that must vanish at a steady state.
    pub fn coupling_balance_residual(&self, delta: &Vector<T>) -> T {
        let flow = self
            .coupling
            .mul_vec(&(&delta.map(|v| v.sin()) - &self.delta_star.map(|v| v.sin())));
        self.incidence.mul_vec(&flow).norm_inf()
    }

    /// Orthogonal projection of δ onto Im(𝓑ᵀ) and the residual ‖δ − proj‖∞,
    /// computed in grounded node coordinates (last node fixed to zero).
    pub fn project_onto_image(&self, delta: &Vector<T>) -> (Vector<T>, T) {
        let c = self.grounded_basis();
        let normal = &c.transpose() * &c;
        let rhs = c.transpose().mul_vec(delta);
        let theta_hat = numerics::solve(&normal, &rhs).expect("reduced Laplacian is PD");
        let proj = c.mul_vec(&theta_hat);
        let residual = (delta - &proj).norm_inf();
        (proj, residual)
    }

    /// Columns of 𝓑ᵀ for all nodes but the last: a basis of Im(𝓑ᵀ).
    fn grounded_basis(&self) -> Matrix<T> {
        self.incidence.transpose().column_block(0, self.node_count() - 1)
    }
}

fn validate_incidence<T: Scalar>(b: &Matrix<T>) -> Result<(), ModelError> {
    for col in 0..b.cols() {
        let mut plus = 0usize;
        let mut minus = 0usize;
        for row in 0..b.rows() {
            let v = b[(row, col)];
            if v == T::one() {
                plus += 1;
            } else if v == -T::one() {
                minus += 1;
            } else if v != T::zero() {
                return Err(ModelError::BadIncidenceColumn { column: col });
            }
        }
        if plus != 1 || minus != 1 {
            return Err(ModelError::BadIncidenceColumn { column: col });
        }
    }
    Ok(())
}

fn validate_diagonal<T: Scalar>(m: &Matrix<T>, dim: usize, what: &str) -> Result<(), ModelError> {
    if m.rows() != dim || m.cols() != dim {
        return Err(ModelError::Dimension {
            context: format!("{what} must be {dim}x{dim}, found {}x{}", m.rows(), m.cols()),
        });
    }
    for i in 0..dim {
        for j in 0..dim {
            if i == j {
                if m[(i, i)] <= T::zero() {
                    return Err(ModelError::NotPositiveDiagonal { what: what.into() });
                }
            } else if m[(i, j)] != T::zero() {
                return Err(ModelError::Dimension {
                    context: format!("{what} must be diagonal"),
                });
            }
        }
    }
    Ok(())
}

/// Induced steady state of the unforced network from (δ₀, 0): simulate until
/// the frequencies die out, then polish with a damped Newton solve in reduced
/// (cycle-constrained) coordinates. The two routes must agree within 1e-8.
///
/// δ₀ off Im(𝓑ᵀ) is accepted: the unforced flow conserves the off-image
/// component, so the solve runs on the shifted manifold δ₀ + Im(𝓑ᵀ). The
/// returned record carries the off-image residual so callers can warn.
pub fn steady_state_angles<T: Scalar>(
    net: &OscillatorNetwork<T>,
    delta0: &Vector<T>,
) -> Result<SteadyState<T>, ModelError> {
    let m = net.edge_count();
    if delta0.len() != m {
        return Err(ModelError::Dimension {
            context: format!("delta0 has length {}, expected {m}", delta0.len()),
        });
    }
    let margin = T::FRAC_PI_2() - T::lit(0.01);
    if delta0.norm_inf() > margin {
        return Err(ModelError::SteadyStateDomainExit { time: 0.0 });
    }

    let (proj, initial_image_residual) = net.project_onto_image(delta0);
    let off_image = delta0 - &proj;

    let (simulated, settled_time) = simulate_unforced(net, delta0, margin)?;
    let newton = newton_polish(net, &off_image, &simulated)?;
    let route_gap = (&simulated - &newton).norm_inf();
    if route_gap > machine_floor::<T>(1e-8) {
        return Err(ModelError::SteadyStateConvergence {
            context: format!(
                "simulation and Newton routes disagree by {:.3e}",
                route_gap.as_f64()
            ),
        });
    }
    Ok(SteadyState {
        delta_s: newton,
        simulated,
        route_gap,
        initial_image_residual,
        settled_time,
    })
}

/// Fixed-step RK4 on the unforced dynamics until ‖ω‖∞ < 1e-10.
fn simulate_unforced<T: Scalar>(
    net: &OscillatorNetwork<T>,
    delta0: &Vector<T>,
    margin: T,
) -> Result<(Vector<T>, T), ModelError> {
    let n = net.node_count();
    let b_t = net.incidence().transpose();
    let m_inv = Vector::from_fn(n, |i| net.inertia()[(i, i)].recip());
    let d_diag = Vector::from_fn(n, |i| net.damping()[(i, i)]);
    let sin_star = net.delta_star().map(|v| v.sin());

    let rhs = |delta: &Vector<T>, omega: &Vector<T>| -> (Vector<T>, Vector<T>) {
        let flow = net
            .coupling()
            .mul_vec(&(&delta.map(|v| v.sin()) - &sin_star));
        let torque = net.incidence().mul_vec(&flow);
        let domega = Vector::from_fn(n, |i| -m_inv[i] * (d_diag[i] * omega[i] + torque[i]));
        (b_t.mul_vec(omega), domega)
    };

    let h = T::lit(1e-3);
    let half = h * T::lit(0.5);
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    let omega_floor = machine_floor::<T>(1e-10);
    let max_steps = 1_000_000usize;

    let mut delta = delta0.clone();
    let mut omega = Vector::zeros(n);
    for step in 0..max_steps {
        // Settled only when the frequencies AND their derivatives vanish;
        // ω alone is zero at t = 0 and at every turning point.
        let (d_probe, o_probe) = rhs(&delta, &omega);
        if omega.norm_inf() < omega_floor
            && o_probe.norm_inf() < omega_floor
            && d_probe.norm_inf() < omega_floor
        {
            let t = T::lit(step as f64) * h;
            return Ok((delta, t));
        }
        let (kd1, ko1) = (d_probe, o_probe);
        let (kd2, ko2) = rhs(&(&delta + &kd1.scale(half)), &(&omega + &ko1.scale(half)));
        let (kd3, ko3) = rhs(&(&delta + &kd2.scale(half)), &(&omega + &ko2.scale(half)));
        let (kd4, ko4) = rhs(&(&delta + &kd3.scale(h)), &(&omega + &ko3.scale(h)));
        delta = &delta + &(&(&(&kd1 + &kd4) + &kd2.scale(two)) + &kd3.scale(two)).scale(sixth);
        omega = &omega + &(&(&(&ko1 + &ko4) + &ko2.scale(two)) + &ko3.scale(two)).scale(sixth);
        if delta.norm_inf() > margin {
            return Err(ModelError::SteadyStateDomainExit {
                time: (step as f64 + 1.0) * 1e-3,
            });
        }
        if !delta.is_finite() || !omega.is_finite() {
            return Err(ModelError::SteadyStateConvergence {
                context: "unforced simulation became non-finite".into(),
            });
        }
    }
    Err(ModelError::SteadyStateConvergence {
        context: "frequencies did not settle within the time budget".into(),
    })
}

/// Damped Newton solve for 𝓑Ξ(sin(ρ + Cθ̂) − sin δ*) = 0 in grounded node
/// coordinates θ̂, with the off-image component ρ held fixed.
fn newton_polish<T: Scalar>(
    net: &OscillatorNetwork<T>,
    off_image: &Vector<T>,
    seed_delta: &Vector<T>,
) -> Result<Vector<T>, ModelError> {
    let n = net.node_count();
    let reduced = n - 1;
    let c = net
        .incidence()
        .transpose()
        .column_block(0, reduced);
    let sin_star = net.delta_star().map(|v| v.sin());

    let delta_of = |theta_hat: &Vector<T>| -> Vector<T> { &c.mul_vec(theta_hat) + off_image };
    let residual_of = |delta: &Vector<T>| -> Vector<T> {
        let flow = net.coupling().mul_vec(&(&delta.map(|v| v.sin()) - &sin_star));
        let full = net.incidence().mul_vec(&flow);
        full.segment(0, reduced)
    };

    // Seed from the simulated steady state, expressed in reduced coordinates.
    let normal = &c.transpose() * &c;
    let seed_rhs = c.transpose().mul_vec(&(seed_delta - off_image));
    let mut theta_hat = numerics::solve(&normal, &seed_rhs)?;

    let scale = T::one() + net.coupling().max_abs();
    let target = T::epsilon() * T::lit(64.0) * scale;
    let mut res = residual_of(&delta_of(&theta_hat));
    for _ in 0..100 {
        if res.norm_inf() <= target {
            break;
        }
        let delta = delta_of(&theta_hat);
        let weights = Vector::from_fn(net.edge_count(), |e| {
            net.coupling()[(e, e)] * delta[e].cos()
        });
        let jac = Matrix::from_fn(reduced, reduced, |i, j| {
            (0..net.edge_count())
                .map(|e| net.incidence()[(i, e)] * weights[e] * c[(e, j)])
                .sum()
        });
        let step = numerics::solve(&jac, &(-&res))?;

        let mut alpha = T::one();
        let mut improved = false;
        for _ in 0..30 {
            let candidate = &theta_hat + &step.scale(alpha);
            let cand_res = residual_of(&delta_of(&candidate));
            if cand_res.norm_inf() < res.norm_inf() {
                theta_hat = candidate;
                res = cand_res;
                improved = true;
                break;
            }
            alpha *= T::lit(0.5);
        }
        if !improved {
            break;
        }
    }
    if res.norm_inf() > machine_floor::<T>(1e-10) * scale {
        return Err(ModelError::SteadyStateConvergence {
            context: format!("Newton residual stalled at {:.3e}", res.norm_inf().as_f64()),
        });
    }
    Ok(delta_of(&theta_hat))
}

/// Assumption check for the stored steady state: the coupling balance holds
/// within 1e-8 and δˢ lies in Im(𝓑ᵀ) ∩ (−π/2, π/2)^m.
pub fn check_assumption1<T: Scalar>(net: &OscillatorNetwork<T>) -> bool {
    let tol = machine_floor::<T>(1e-8);
    net.coupling_balance_residual(net.delta_s()) <= tol
        && net.delta_s().norm_inf() < T::FRAC_PI_2()
        && net.delta_s_image_residual() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::incidence_matrix;

    fn single_edge_net(delta_star: f64, delta_s: f64) -> OscillatorNetwork<f64> {
        OscillatorNetwork::new(
            incidence_matrix(&[(1, 2)], 2).unwrap(),
            Matrix::identity(1),
            Matrix::identity(2),
            Matrix::identity(2),
            Vector::from_f64s(&[delta_star]),
            Vector::from_f64s(&[delta_s]),
        )
        .unwrap()
    }

    fn triangle_net() -> OscillatorNetwork<f64> {
        OscillatorNetwork::new(
            incidence_matrix(&[(1, 2), (2, 3), (1, 3)], 3).unwrap(),
            Matrix::identity(3),
            Matrix::scaled_identity(3, 0.01),
            Matrix::scaled_identity(3, 0.1),
            Vector::zeros(3),
            Vector::zeros(3),
        )
        .unwrap()
    }

    #[test]
    fn single_edge_steady_state_is_zero() {
        let net = single_edge_net(0.0, 0.0);
        let ss = steady_state_angles(&net, &Vector::from_f64s(&[0.3])).unwrap();
        assert!(ss.delta_s.norm_inf() < 1e-12, "{:?}", ss.delta_s);
        assert!(ss.route_gap <= 1e-8);
    }

    #[test]
    fn starting_at_delta_star_stays_there() {
        let net = single_edge_net(0.2, 0.2);
        let ss = steady_state_angles(&net, &Vector::from_f64s(&[0.2])).unwrap();
        assert!((ss.delta_s[0] - 0.2).abs() < 1e-12);
        assert_eq!(ss.settled_time, 0.0);
    }

    #[test]
    fn unbalanced_steady_state_fails_assumption1_and_model_construction() {
        // 𝓑Ξ sin(0.2) has norm sin(0.2) > 1e-8, so (0.2, 0) is not a steady
        // state: the assumption check says no and no model can be built.
        let net = OscillatorNetwork::new(
            incidence_matrix::<f64>(&[(1, 2)], 2).unwrap(),
            Matrix::identity(1),
            Matrix::identity(2),
            Matrix::identity(2),
            Vector::zeros(1),
            Vector::from_f64s(&[0.2]),
        )
        .unwrap();
        assert!(!check_assumption1(&net));
        assert!(matches!(
            crate::model::oscillator(&net),
            Err(ModelError::EquilibriumResidual { .. })
        ));
    }

    #[test]
    fn triangle_in_image_seed_settles_to_delta_star_manifold() {
        let net = triangle_net();
        // Node angles (0.02, 0.015, 0) mapped to edge coordinates.
        let delta0 = net.edge_coordinates(&Vector::from_f64s(&[0.02, 0.015, 0.0]));
        let ss = steady_state_angles(&net, &delta0).unwrap();
        assert!(ss.initial_image_residual <= 1e-12);
        assert!(ss.delta_s.norm_inf() < 1e-10, "{:?}", ss.delta_s);

        let rebuilt = OscillatorNetwork::new(
            net.incidence().clone(),
            net.coupling().clone(),
            net.inertia().clone(),
            net.damping().clone(),
            net.delta_star().clone(),
            ss.delta_s,
        )
        .unwrap();
        assert!(check_assumption1(&rebuilt));
    }

    #[test]
    fn triangle_raw_seed_conserves_the_cycle_component() {
        // Raw edge coordinates (0.02, 0.015, 0) are off Im(𝓑ᵀ); the flow
        // conserves the cycle component, so the limit is a(1, 1, −1) with
        // 3a = 0.02 + 0.015 − 0.
        let net = triangle_net();
        let delta0 = Vector::from_f64s(&[0.02, 0.015, 0.0]);
        let ss = steady_state_angles(&net, &delta0).unwrap();
        assert!(ss.initial_image_residual > 1e-8);
        let a = 0.035 / 3.0;
        for (got, want) in ss.delta_s.iter().zip([a, a, -a]) {
            assert!((got - want).abs() < 1e-9, "{:?}", ss.delta_s);
        }
        assert!(net.coupling_balance_residual(&ss.delta_s) < 1e-12);
    }

    #[test]
    fn assumption1_needs_image_membership() {
        // a(1,1,−1) balances the coupling exactly but is not in Im(𝓑ᵀ).
        let a = 0.035 / 3.0;
        let net = OscillatorNetwork::new(
            incidence_matrix(&[(1, 2), (2, 3), (1, 3)], 3).unwrap(),
            Matrix::identity(3),
            Matrix::scaled_identity(3, 0.01),
            Matrix::scaled_identity(3, 0.1),
            Vector::zeros(3),
            Vector::from_f64s(&[a, a, -a]),
        )
        .unwrap();
        assert!(net.delta_s_image_residual() > 1e-8);
        assert!(!check_assumption1(&net));
    }

    #[test]
    fn steady_state_output_always_passes_assumption1_when_in_image() {
        let net = triangle_net();
        for theta in [[0.02, 0.015, 0.0], [0.1, -0.05, 0.02], [0.0, 0.3, -0.1]] {
            let delta0 = net.edge_coordinates(&Vector::from_f64s(&theta));
            let ss = steady_state_angles(&net, &delta0).unwrap();
            let rebuilt = OscillatorNetwork::new(
                net.incidence().clone(),
                net.coupling().clone(),
                net.inertia().clone(),
                net.damping().clone(),
                net.delta_star().clone(),
                ss.delta_s,
            )
            .unwrap();
            assert!(check_assumption1(&rebuilt), "theta0 = {theta:?}");
        }
    }
}
