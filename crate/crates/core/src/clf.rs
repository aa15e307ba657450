//! Control-Lyapunov-function catalog: quadratic ½xᵀPx, the cosine sum
//! n − 1ᵀcos(x), and the oscillator energy function, each with its analytic
//! gradient and a sampling-based validation report.

use std::sync::Arc;

use thiserror::Error;

use crate::model::{sample_domain, ControlAffineModel, OscillatorNetwork};
use crate::numerics::{finite_diff_gradient, is_pd, machine_floor, Matrix, NumericsError, Vector};
use crate::Scalar;

#[derive(Debug, Clone, Error)]
pub enum ClfError {
    #[error("P must be symmetric positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: {context}")]
    Dimension { context: String },
    #[error("V(equilibrium) = {value:.3e}, expected 0")]
    NonzeroAtEquilibrium { value: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

type ValueMap<T> = Arc<dyn Fn(&Vector<T>) -> T + Send + Sync>;
type GradientMap<T> = Arc<dyn Fn(&Vector<T>) -> Vector<T> + Send + Sync>;

/// A candidate value function V with analytic gradient. Immutable and pure;
/// evaluators may be called concurrently.
#[derive(Clone)]
pub struct Clf<T> {
    value: ValueMap<T>,
    gradient: GradientMap<T>,
    equilibrium: Vector<T>,
    name: String,
}

impl<T: Scalar> Clf<T> {
    pub fn new(
        name: impl Into<String>,
        value: ValueMap<T>,
        gradient: GradientMap<T>,
        equilibrium: Vector<T>,
    ) -> Result<Self, ClfError> {
        let at_eq = value(&equilibrium);
        if at_eq.abs() > machine_floor::<T>(1e-12) {
            return Err(ClfError::NonzeroAtEquilibrium { value: at_eq.as_f64() });
        }
        if gradient(&equilibrium).len() != equilibrium.len() {
            return Err(ClfError::Dimension {
                context: "gradient length differs from state dimension".into(),
            });
        }
        Ok(Self {
            value,
            gradient,
            equilibrium,
            name: name.into(),
        })
    }

    pub fn value(&self, x: &Vector<T>) -> T {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &Vector<T>) -> Vector<T> {
        (self.gradient)(x)
    }

    pub fn equilibrium(&self) -> &Vector<T> {
        &self.equilibrium
    }

    pub fn dim(&self) -> usize {
        self.equilibrium.len()
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// V = ½ xᵀPx for symmetric positive definite P.
pub fn quadratic<T: Scalar>(p: Matrix<T>) -> Result<Clf<T>, ClfError> {
    if !p.is_square() {
        return Err(ClfError::Dimension {
            context: format!("P must be square, found {}x{}", p.rows(), p.cols()),
        });
    }
    if !is_pd(&p, T::zero())? {
        return Err(ClfError::NotPositiveDefinite);
    }
    let n = p.rows();
    let p_val = Arc::new(p);
    let p_grad = Arc::clone(&p_val);
    Clf::new(
        "quadratic",
        Arc::new(move |x: &Vector<T>| p_val.quadratic_form(x) * T::lit(0.5)),
        Arc::new(move |x: &Vector<T>| p_grad.mul_vec(x)),
        Vector::zeros(n),
    )
}

/// V = n − Σᵢ cos xᵢ, strictly convex on the open box |x|∞ < π/2.
pub fn cosine<T: Scalar>(n: usize) -> Clf<T> {
    assert!(n >= 1, "cosine CLF needs n >= 1");
    Clf::new(
        "cosine",
        Arc::new(move |x: &Vector<T>| {
            T::lit(n as f64) - x.iter().map(|v| v.cos()).sum::<T>()
        }),
        Arc::new(|x: &Vector<T>| x.map(|v| v.sin())),
        Vector::zeros(n),
    )
    .expect("cosine CLF vanishes at the origin")
}

/// Oscillator energy: V(δ, ω) = ½‖ω‖²_M − Σₑ Ξₑₑ(cos δₑ − cos δˢₑ)
/// − (δ − δˢ)ᵀ Ξ sin δˢ, with ∇_δV = Ξ(sin δ − sin δˢ) and ∇_ωV = Mω.
pub fn oscillator<T: Scalar>(net: &OscillatorNetwork<T>) -> Clf<T> {
    let m_edges = net.edge_count();
    let n_nodes = net.node_count();
    let coupling = Vector::from_fn(m_edges, |e| net.coupling()[(e, e)]);
    let inertia = Vector::from_fn(n_nodes, |i| net.inertia()[(i, i)]);
    let delta_s = net.delta_s().clone();
    let cos_s = delta_s.map(|v| v.cos());
    let sin_s = delta_s.map(|v| v.sin());

    let (coupling_v, inertia_v) = (coupling.clone(), inertia.clone());
    let (delta_s_v, cos_s_v, sin_s_v) = (delta_s.clone(), cos_s, sin_s.clone());
    let value: ValueMap<T> = Arc::new(move |x: &Vector<T>| {
        let delta = x.segment(0, m_edges);
        let omega = x.segment(m_edges, n_nodes);
        let kinetic = (0..n_nodes)
            .map(|i| inertia_v[i] * omega[i] * omega[i])
            .sum::<T>()
            * T::lit(0.5);
        let potential = (0..m_edges)
            .map(|e| {
                -coupling_v[e] * (delta[e].cos() - cos_s_v[e])
                    - (delta[e] - delta_s_v[e]) * coupling_v[e] * sin_s_v[e]
            })
            .sum::<T>();
        kinetic + potential
    });

    let gradient: GradientMap<T> = Arc::new(move |x: &Vector<T>| {
        let delta = x.segment(0, m_edges);
        let omega = x.segment(m_edges, n_nodes);
        let grad_delta = Vector::from_fn(m_edges, |e| coupling[e] * (delta[e].sin() - sin_s[e]));
        let grad_omega = Vector::from_fn(n_nodes, |i| inertia[i] * omega[i]);
        grad_delta.stack(&grad_omega)
    });

    Clf::new(
        "oscillator-energy",
        value,
        gradient,
        net.delta_s().stack(&Vector::zeros(n_nodes)),
    )
    .expect("oscillator energy vanishes at (delta_s, 0)")
}

/// Sampling report for a CLF/model pair: worst analytic-vs-finite-difference
/// gradient deviation and the minimum of V away from the equilibrium ball.
#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ClfReport<T: Scalar + serde::Serialize> {
    pub samples: usize,
    pub max_gradient_deviation: T,
    pub worst_gradient_point: Option<Vector<T>>,
    pub min_value: T,
    pub argmin: Option<Vector<T>>,
    pub gradient_ok: bool,
    pub positivity_ok: bool,
}

impl<T: Scalar + serde::Serialize> ClfReport<T> {
    pub fn pass(&self) -> bool {
        self.gradient_ok && self.positivity_ok
    }
}

/// Check a CLF against its paired model on seeded domain samples: the
/// analytic gradient must match central differences (h = 1e-5) within 1e-6,
/// and V must stay positive outside a 1e-3 ball around the equilibrium.
/// Failures are reported, not raised.
pub fn check_clf<T: Scalar + serde::Serialize>(
    clf: &Clf<T>,
    model: &ControlAffineModel<T>,
    sample_count: usize,
    seed: u64,
) -> Result<ClfReport<T>, ClfError> {
    if clf.dim() != model.state_dim() {
        return Err(ClfError::Dimension {
            context: format!(
                "CLF dimension {} vs model dimension {}",
                clf.dim(),
                model.state_dim()
            ),
        });
    }
    let h = T::lit(1e-5);
    let ball = T::lit(1e-3);
    let mut max_dev = T::zero();
    let mut worst_point = None;
    let mut min_value = T::infinity();
    let mut argmin = None;

    for x in sample_domain(model, sample_count, seed) {
        let fd = finite_diff_gradient(|y| clf.value(y), &x, h);
        let dev = (&clf.gradient(&x) - &fd).norm_inf();
        if dev > max_dev {
            max_dev = dev;
            worst_point = Some(x.clone());
        }
        if (&x - clf.equilibrium()).norm() > ball {
            let v = clf.value(&x);
            if v < min_value {
                min_value = v;
                argmin = Some(x);
            }
        }
    }

    Ok(ClfReport {
        samples: sample_count,
        max_gradient_deviation: max_dev,
        worst_gradient_point: worst_point,
        min_value,
        argmin,
        gradient_ok: max_dev <= T::lit(1e-6),
        positivity_ok: min_value > T::zero(),
    })
}
