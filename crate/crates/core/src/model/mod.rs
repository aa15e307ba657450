//! Control-affine system representation ẋ = f(x) + Gᵀ(x)u + Ḡᵀ(x)w with the
//! built-in models (sine, linear, integrator, coupled oscillators), graph
//! utilities, and steady-state computation for the oscillator network.

mod graph;
mod oscillator;

pub use graph::incidence_matrix;
pub use oscillator::{check_assumption1, steady_state_angles, OscillatorNetwork, SteadyState};

use std::sync::Arc;

use thiserror::Error;

use crate::numerics::{machine_floor, Matrix, NumericsError, Vector};
use crate::Scalar;

#[derive(Debug, Clone, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {context}")]
    Dimension { context: String },
    #[error("node index {index} out of range 1..={n}")]
    NodeIndex { index: usize, n: usize },
    #[error("graph is not connected ({reachable} of {n} nodes reachable from node 1)")]
    Disconnected { reachable: usize, n: usize },
    #[error("{what} must have a strictly positive diagonal")]
    NotPositiveDiagonal { what: String },
    #[error("incidence column {column} is not a signed edge indicator")]
    BadIncidenceColumn { column: usize },
    #[error("equilibrium is not a steady state: |f(x*)|_inf = {residual:.3e}")]
    EquilibriumResidual { residual: f64 },
    #[error("steady-state computation did not converge: {context}")]
    SteadyStateConvergence { context: String },
    #[error("state left the model domain during steady-state simulation at t = {time:.3}")]
    SteadyStateDomainExit { time: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

type StateMap<T> = Arc<dyn Fn(&Vector<T>) -> Vector<T> + Send + Sync>;
type InputMap<T> = Arc<dyn Fn(&Vector<T>) -> Matrix<T> + Send + Sync>;
type ConstraintMap<T> = Arc<dyn Fn(&Vector<T>) -> bool + Send + Sync>;

/// Axis-aligned box in state space, optionally intersected with an extra
/// membership predicate. Unbounded axes carry ±∞.
#[derive(Clone)]
pub struct Domain<T> {
    lower: Vector<T>,
    upper: Vector<T>,
    constraint: Option<ConstraintMap<T>>,
}

impl<T: Scalar> Domain<T> {
    pub fn boxed(lower: Vector<T>, upper: Vector<T>) -> Self {
        assert_eq!(lower.len(), upper.len(), "domain bounds length mismatch");
        Self { lower, upper, constraint: None }
    }

    pub fn unbounded(dim: usize) -> Self {
        Self::boxed(
            Vector::from_fn(dim, |_| T::neg_infinity()),
            Vector::from_fn(dim, |_| T::infinity()),
        )
    }

    pub fn with_constraint(
        mut self,
        constraint: impl Fn(&Vector<T>) -> bool + Send + Sync + 'static,
    ) -> Self {
        self.constraint = Some(Arc::new(constraint));
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &Vector<T> {
        &self.lower
    }

    pub fn upper(&self) -> &Vector<T> {
        &self.upper
    }

    pub fn contains(&self, x: &Vector<T>) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        for i in 0..x.len() {
            if !(x[i] >= self.lower[i] && x[i] <= self.upper[i]) {
                return false;
            }
        }
        self.constraint.as_ref().is_none_or(|c| c(x))
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }

    /// Bounds for sampling and grids: unbounded axes are replaced by
    /// ±default_half_width.
    pub fn sampling_bounds(&self, default_half_width: T) -> (Vector<T>, Vector<T>) {
        let lo = Vector::from_fn(self.dim(), |i| {
            if self.lower[i].is_finite() { self.lower[i] } else { -default_half_width }
        });
        let hi = Vector::from_fn(self.dim(), |i| {
            if self.upper[i].is_finite() { self.upper[i] } else { default_half_width }
        });
        (lo, hi)
    }
}

/// The dynamics ẋ = f(x) + Gᵀ(x)u + Ḡᵀ(x)w with dimensions, an equilibrium,
/// and a validity domain. Evaluation maps are pure; the model is immutable
/// after construction and freely shareable across threads.
#[derive(Clone)]
pub struct ControlAffineModel<T> {
    n: usize,
    m: usize,
    n_w: usize,
    f: StateMap<T>,
    g: InputMap<T>,
    gbar: Option<InputMap<T>>,
    equilibrium: Vector<T>,
    domain: Domain<T>,
    name: String,
}

impl<T: Scalar> ControlAffineModel<T> {
    /// General constructor. Verifies that `f(equilibrium)` vanishes and that
    /// the maps return correctly-sized values on the equilibrium.
    pub fn new(
        name: impl Into<String>,
        f: StateMap<T>,
        g: InputMap<T>,
        gbar: Option<InputMap<T>>,
        equilibrium: Vector<T>,
        domain: Domain<T>,
    ) -> Result<Self, ModelError> {
        let n = equilibrium.len();
        if domain.dim() != n {
            return Err(ModelError::Dimension {
                context: format!("domain dim {} vs state dim {}", domain.dim(), n),
            });
        }
        let f_eq = f(&equilibrium);
        if f_eq.len() != n {
            return Err(ModelError::Dimension {
                context: format!("f returns length {}, state dim {}", f_eq.len(), n),
            });
        }
        let residual = f_eq.norm_inf();
        if residual > machine_floor::<T>(1e-12) {
            return Err(ModelError::EquilibriumResidual { residual: residual.as_f64() });
        }
        let g_eq = g(&equilibrium);
        if g_eq.cols() != n {
            return Err(ModelError::Dimension {
                context: format!("G(x) must have {n} columns, found {}", g_eq.cols()),
            });
        }
        let m = g_eq.rows();
        let n_w = match &gbar {
            Some(gb) => {
                let gb_eq = gb(&equilibrium);
                if gb_eq.cols() != n {
                    return Err(ModelError::Dimension {
                        context: format!("Gbar(x) must have {n} columns, found {}", gb_eq.cols()),
                    });
                }
                gb_eq.rows()
            }
            None => 0,
        };
        Ok(Self { n, m, n_w, f, g, gbar, equilibrium, domain, name: name.into() })
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn disturbance_dim(&self) -> usize {
        self.n_w
    }

    pub fn has_disturbance_channel(&self) -> bool {
        self.gbar.is_some()
    }

    pub fn f(&self, x: &Vector<T>) -> Vector<T> {
        (self.f)(x)
    }

    /// Input matrix G(x), shaped m×n.
    pub fn g(&self, x: &Vector<T>) -> Matrix<T> {
        (self.g)(x)
    }

    /// Disturbance input matrix Ḡ(x), shaped n_w×n.
    pub fn gbar(&self, x: &Vector<T>) -> Option<Matrix<T>> {
        self.gbar.as_ref().map(|gb| gb(x))
    }

    /// Full right-hand side f(x) + Gᵀ(x)u + Ḡᵀ(x)w.
    pub fn rhs(&self, x: &Vector<T>, u: &Vector<T>, w: Option<&Vector<T>>) -> Vector<T> {
        let mut dx = &self.f(x) + &self.g(x).transpose().mul_vec(u);
        if let (Some(gb), Some(w)) = (&self.gbar, w) {
            dx = &dx + &gb(x).transpose().mul_vec(w);
        }
        dx
    }

    pub fn equilibrium(&self) -> &Vector<T> {
        &self.equilibrium
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// ẋ = −sin(x) + u on the box where the cosine sum stays above
/// c = n·cos(0.99·π/2); every axis is an input channel.
pub fn sine<T: Scalar>(n: usize) -> ControlAffineModel<T> {
    let half_width = T::FRAC_PI_2() * T::lit(0.99);
    let c = T::lit(n as f64) * half_width.cos();
    let domain = Domain::boxed(
        Vector::from_fn(n, |_| -half_width),
        Vector::from_fn(n, |_| half_width),
    )
    .with_constraint(move |x: &Vector<T>| x.iter().map(|v| v.cos()).sum::<T>() >= c);
    ControlAffineModel::new(
        "sine",
        Arc::new(|x: &Vector<T>| x.map(|v| -v.sin())),
        Arc::new(move |_: &Vector<T>| Matrix::identity(n)),
        None,
        Vector::zeros(n),
        domain,
    )
    .expect("sine model is well-formed")
}

/// ẋ = u (no dynamics).
pub fn integrator<T: Scalar>(n: usize) -> ControlAffineModel<T> {
    ControlAffineModel::new(
        "integrator",
        Arc::new(move |_: &Vector<T>| Vector::zeros(n)),
        Arc::new(move |_: &Vector<T>| Matrix::identity(n)),
        None,
        Vector::zeros(n),
        Domain::unbounded(n),
    )
    .expect("integrator model is well-formed")
}

/// ẋ = Ax + Bu (+ B̄w) on an unbounded domain.
pub fn linear<T: Scalar>(
    a: Matrix<T>,
    b: Matrix<T>,
    bbar: Option<Matrix<T>>,
) -> Result<ControlAffineModel<T>, ModelError> {
    if !a.is_square() {
        return Err(ModelError::Dimension {
            context: format!("A must be square, found {}x{}", a.rows(), a.cols()),
        });
    }
    let n = a.rows();
    if b.rows() != n {
        return Err(ModelError::Dimension {
            context: format!("B must have {n} rows, found {}", b.rows()),
        });
    }
    if let Some(bb) = &bbar {
        if bb.rows() != n {
            return Err(ModelError::Dimension {
                context: format!("Bbar must have {n} rows, found {}", bb.rows()),
            });
        }
    }
    let a_arc = Arc::new(a);
    let g_t = b.transpose();
    let gbar_map: Option<InputMap<T>> = bbar.map(|bb| {
        let gb_t = bb.transpose();
        Arc::new(move |_: &Vector<T>| gb_t.clone()) as InputMap<T>
    });
    ControlAffineModel::new(
        "linear",
        Arc::new(move |x: &Vector<T>| a_arc.mul_vec(x)),
        Arc::new(move |_: &Vector<T>| g_t.clone()),
        gbar_map,
        Vector::zeros(n),
        Domain::unbounded(n),
    )
}

/// Coupled-oscillator network in edge coordinates: state x = (δ, ω) with
///   δ̇ = 𝓑ᵀω + u,
///   M ω̇ = −D ω − 𝓑 Ξ (sin δ − sin δ*) + w,
/// equilibrium (δˢ, 0), and |δ|∞ bounded 0.01 rad inside the ±π/2 box.
///
/// Fails with `EquilibriumResidual` when the network's stored δˢ does not
/// balance the coupling, since (δˢ, 0) is then not a steady state.
pub fn oscillator<T: Scalar>(net: &OscillatorNetwork<T>) -> Result<ControlAffineModel<T>, ModelError> {
    let n_nodes = net.node_count();
    let m_edges = net.edge_count();
    let dim = m_edges + n_nodes;

    let incidence = net.incidence().clone();
    let incidence_t = incidence.transpose();
    let coupling = net.coupling().clone();
    let sin_star = net.delta_star().map(|v| v.sin());
    let m_inv_diag = Vector::from_fn(n_nodes, |i| net.inertia()[(i, i)].recip());
    let d_diag = Vector::from_fn(n_nodes, |i| net.damping()[(i, i)]);
    let m_inv_diag_f = m_inv_diag.clone();

    let f_map: StateMap<T> = Arc::new(move |x: &Vector<T>| {
        let delta = x.segment(0, m_edges);
        let omega = x.segment(m_edges, n_nodes);
        let ddelta = incidence_t.mul_vec(&omega);
        let flow = coupling.mul_vec(&(&delta.map(|v| v.sin()) - &sin_star));
        let torque = incidence.mul_vec(&flow);
        let domega = Vector::from_fn(n_nodes, |i| {
            -m_inv_diag_f[i] * (d_diag[i] * omega[i] + torque[i])
        });
        ddelta.stack(&domega)
    });

    // u enters the δ equation; w enters the ω equation through M⁻¹.
    let g_map: InputMap<T> = Arc::new(move |_: &Vector<T>| {
        Matrix::from_fn(m_edges, dim, |i, j| if i == j { T::one() } else { T::zero() })
    });
    let gbar_map: InputMap<T> = Arc::new(move |_: &Vector<T>| {
        Matrix::from_fn(n_nodes, dim, |i, j| {
            if j == m_edges + i {
                m_inv_diag[i]
            } else {
                T::zero()
            }
        })
    });

    let margin = T::FRAC_PI_2() - T::lit(0.01);
    let lower = Vector::from_fn(dim, |i| if i < m_edges { -margin } else { T::neg_infinity() });
    let upper = Vector::from_fn(dim, |i| if i < m_edges { margin } else { T::infinity() });

    ControlAffineModel::new(
        "oscillator",
        f_map,
        g_map,
        Some(gbar_map),
        net.delta_s().stack(&Vector::zeros(n_nodes)),
        Domain::boxed(lower, upper),
    )
}

/// Deterministic uniform samples from the model's (sampling) domain,
/// respecting the extra domain constraint by rejection.
pub fn sample_domain<T: Scalar>(
    model: &ControlAffineModel<T>,
    count: usize,
    seed: u64,
) -> Vec<Vector<T>> {
    use rand::{Rng, SeedableRng};
    let (lo, hi) = model.domain().sampling_bounds(T::lit(5.0));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count && attempts < count.saturating_mul(64).max(1024) {
        attempts += 1;
        let x = Vector::from_fn(model.state_dim(), |i| {
            lo[i] + (hi[i] - lo[i]) * T::lit(rng.gen::<f64>())
        });
        if model.domain().contains(&x) {
            out.push(x);
        }
    }
    out
}

/// Deterministic probe states through the equilibrium: rays along every
/// coordinate axis, plus the corners of the sampling box spanned by the
/// unconstrained axes. These catch sign-definite structure that uniform
/// samples can miss (e.g. pure-frequency excitations of the oscillator).
pub fn axis_probes<T: Scalar>(model: &ControlAffineModel<T>) -> Vec<Vector<T>> {
    let (lo, hi) = model.domain().sampling_bounds(T::lit(5.0));
    let eq = model.equilibrium();
    let mut out = Vec::new();
    for i in 0..model.state_dim() {
        for scale in [0.01, 0.1, 0.5, 1.0] {
            for sign in [T::one(), -T::one()] {
                let room = if sign > T::zero() { hi[i] - eq[i] } else { eq[i] - lo[i] };
                let step = room * T::lit(scale);
                if step <= T::zero() {
                    continue;
                }
                let mut x = eq.clone();
                x[i] += sign * step;
                if model.domain().contains(&x) {
                    out.push(x);
                }
            }
        }
    }
    // Corners over the axes the domain leaves unbounded; the bounded axes
    // stay pinned at the equilibrium.
    let free: Vec<usize> = (0..model.state_dim())
        .filter(|&i| {
            !(model.domain().lower()[i].is_finite() && model.domain().upper()[i].is_finite())
        })
        .collect();
    if !free.is_empty() {
        for scale in [0.5, 1.0] {
            for sign in [T::one(), -T::one()] {
                let mut x = eq.clone();
                for &i in &free {
                    let room = if sign > T::zero() { hi[i] - eq[i] } else { eq[i] - lo[i] };
                    x[i] += sign * room * T::lit(scale);
                }
                if model.domain().contains(&x) {
                    out.push(x);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_f_matches_negative_sine() {
        let model: ControlAffineModel<f64> = sine(1);
        let x = Vector::from_f64s(&[std::f64::consts::FRAC_PI_4]);
        let fx = model.f(&x);
        assert!((fx[0] + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-7);
        assert_eq!(model.input_dim(), 1);
        assert!(!model.has_disturbance_channel());
    }

    #[test]
    fn integrator_f_is_zero_everywhere() {
        let model: ControlAffineModel<f64> = integrator(3);
        for x in sample_domain(&model, 32, 1) {
            assert_eq!(model.f(&x).norm_inf(), 0.0);
        }
    }

    #[test]
    fn linear_rhs_assembles_all_channels() {
        let a = Matrix::from_f64_rows(&[&[-1.0, 0.0], &[0.0, -2.0]]);
        let b = Matrix::from_f64_rows(&[&[1.0], &[0.0]]);
        let bbar = Matrix::from_f64_rows(&[&[0.0], &[1.0]]);
        let model: ControlAffineModel<f64> = linear(a, b, Some(bbar)).unwrap();
        let x = Vector::from_f64s(&[1.0, 2.0]);
        let u = Vector::from_f64s(&[3.0]);
        let w = Vector::from_f64s(&[5.0]);
        let dx = model.rhs(&x, &u, Some(&w));
        assert_eq!(dx.as_slice(), &[-1.0 + 3.0, -4.0 + 5.0]);
    }

    #[test]
    fn builtin_equilibria_are_steady() {
        let models: Vec<ControlAffineModel<f64>> = vec![
            sine(2),
            integrator(3),
            linear(
                Matrix::from_f64_rows(&[&[-1.0, 1.0], &[0.0, -1.0]]),
                Matrix::identity(2),
                None,
            )
            .unwrap(),
        ];
        for model in models {
            assert!(model.f(model.equilibrium()).norm_inf() <= 1e-12, "{}", model.name());
        }
    }

    #[test]
    fn sine_domain_enforces_cosine_sum() {
        let model: ControlAffineModel<f64> = sine(2);
        assert!(model.domain().contains(&Vector::from_f64s(&[0.5, -0.5])));
        assert!(!model.domain().contains(&Vector::from_f64s(&[1.6, 0.0])));
        for x in sample_domain(&model, 256, 42) {
            assert!(x.iter().map(|v| v.cos()).sum::<f64>() >= 2.0 * (0.99 * std::f64::consts::FRAC_PI_2).cos());
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let model: ControlAffineModel<f64> = sine(2);
        let a = sample_domain(&model, 64, 9);
        let b = sample_domain(&model, 64, 9);
        assert_eq!(a, b);
        let c = sample_domain(&model, 64, 10);
        assert_ne!(a, c);
    }

    #[test]
    fn oscillator_two_node_hand_evaluation() {
        // Single edge (1, 2), b = 1, M = D = I, delta_star = 0: at
        // (delta, omega) = (0.1, 0, 0) the source node accelerates and the
        // sink node brakes by sin(0.1).
        let net = OscillatorNetwork::new(
            incidence_matrix(&[(1, 2)], 2).unwrap(),
            Matrix::identity(1),
            Matrix::identity(2),
            Matrix::identity(2),
            Vector::zeros(1),
            Vector::zeros(1),
        )
        .unwrap();
        let model: ControlAffineModel<f64> = oscillator(&net).unwrap();
        let fx = model.f(&Vector::from_f64s(&[0.1, 0.0, 0.0]));
        let s = 0.1f64.sin();
        assert!((fx[0]).abs() < 1e-15);
        assert!((fx[1] - s).abs() < 1e-15, "{fx:?}");
        assert!((fx[2] + s).abs() < 1e-15, "{fx:?}");
    }

    #[test]
    fn oscillator_dynamics_are_rotation_invariant() {
        // Node angles theta and theta + alpha·1 reduce to the same edge
        // coordinates, so the reduced dynamics cannot see the rotation.
        let net = OscillatorNetwork::new(
            incidence_matrix(&[(1, 2), (2, 3), (1, 3)], 3).unwrap(),
            Matrix::identity(3),
            Matrix::scaled_identity(3, 0.01),
            Matrix::scaled_identity(3, 0.1),
            Vector::zeros(3),
            Vector::zeros(3),
        )
        .unwrap();
        let model: ControlAffineModel<f64> = oscillator(&net).unwrap();
        let theta = Vector::from_f64s(&[0.3, -0.2, 0.1]);
        let omega = Vector::from_f64s(&[0.5, 0.0, -0.4]);
        for alpha in [0.0, 1.0, -2.5] {
            let shifted = theta.map(|v| v + alpha);
            let delta = net.edge_coordinates(&theta);
            let delta_shifted = net.edge_coordinates(&shifted);
            // Exact in real arithmetic; the float gap is one rounding of the
            // shifted subtraction per edge.
            assert!((&delta - &delta_shifted).norm_inf() <= 1e-15 * (1.0 + alpha.abs()));
            let f_gap = (&model.f(&delta.stack(&omega)) - &model.f(&delta_shifted.stack(&omega)))
                .norm_inf();
            assert!(f_gap <= 1e-12, "alpha = {alpha}: f gap {f_gap:.3e}");
        }
    }
}
