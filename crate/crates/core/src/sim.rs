//! Fixed-step RK4 closed-loop simulation with pluggable disturbance signals,
//! trajectory recording (states, inputs, disturbances, V, q, L, running-cost
//! integral), and trajectory-level metrics.
//!
//! The running-cost integral is carried as extra ODE state so the value
//! identity holds at RK4 accuracy; random disturbances are sample-and-hold
//! from a seeded stream, which keeps every run bit-reproducible.

use thiserror::Error;

use crate::design::DesignedProblem;
use crate::numerics::Vector;
use crate::Scalar;

#[derive(Debug, Clone, Error)]
pub enum SimError {
    #[error("invalid simulation setup: {context}")]
    Precondition { context: String },
    #[error("worst-case disturbance requires a robust-mode problem")]
    WorstCaseNeedsRobust,
    #[error("disturbance signal does not match the model: {context}")]
    DisturbanceMismatch { context: String },
    #[error("state became non-finite at t = {time:.6}")]
    Blowup { time: f64 },
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("component selector is empty")]
    EmptySelector,
    #[error("dissipation check requires a robust-mode problem")]
    NominalMode,
}

/// Exogenous disturbance played into the closed loop.
#[derive(Debug, Clone)]
pub enum DisturbanceSignal<T> {
    Zero,
    Constant(Vector<T>),
    /// Piecewise-constant uniform noise on [−amplitude, amplitude]^{n_w},
    /// redrawn every `hold` seconds from a seeded stream.
    SeededRandom { amplitude: T, seed: u64, hold: T },
    /// The maximizing feedback w*(x), evaluated along the trajectory.
    WorstCase,
}

/// Time-stamped closed-loop record. `running_cost` integrates L by the same
/// RK4 quadrature as the state; `supply_integral` (∫ q + uᵀRu) and
/// `disturbance_integral` (∫ ξ wᵀSw) split it for dissipation checks.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Vector<T>>,
    pub inputs: Vec<Vector<T>>,
    pub disturbances: Vec<Vector<T>>,
    pub v_values: Vec<T>,
    pub q_values: Vec<T>,
    pub l_values: Vec<T>,
    pub running_cost: Vec<T>,
    pub supply_integral: Vec<T>,
    pub disturbance_integral: Vec<T>,
}

impl<T: Scalar> Trajectory<T> {
    fn with_capacity(steps: usize) -> Self {
        let cap = steps + 1;
        Self {
            times: Vec::with_capacity(cap),
            states: Vec::with_capacity(cap),
            inputs: Vec::with_capacity(cap),
            disturbances: Vec::with_capacity(cap),
            v_values: Vec::with_capacity(cap),
            q_values: Vec::with_capacity(cap),
            l_values: Vec::with_capacity(cap),
            running_cost: Vec::with_capacity(cap),
            supply_integral: Vec::with_capacity(cap),
            disturbance_integral: Vec::with_capacity(cap),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// How a simulation ended.
#[derive(Debug, Clone)]
pub enum Termination<T> {
    Completed,
    /// The state left the model domain; the trajectory holds the samples up
    /// to the last in-domain state.
    DomainExit { time: T, state: Vector<T> },
}

#[derive(Debug, Clone)]
pub struct SimRun<T> {
    pub trajectory: Trajectory<T>,
    pub termination: Termination<T>,
}

impl<T: Scalar> SimRun<T> {
    pub fn completed(&self) -> bool {
        matches!(self.termination, Termination::Completed)
    }
}

struct HeldNoise<T> {
    values: Vec<Vector<T>>,
    hold: T,
}

impl<T: Scalar> HeldNoise<T> {
    fn generate(amplitude: T, seed: u64, hold: T, dim: usize, t_final: T) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let intervals = (t_final / hold).ceil().as_f64() as usize + 2;
        let values = (0..intervals)
            .map(|_| Vector::from_fn(dim, |_| amplitude * T::lit(rng.gen_range(-1.0..=1.0))))
            .collect();
        Self { values, hold }
    }

    fn at(&self, t: T) -> &Vector<T> {
        let idx = (t / self.hold).floor().as_f64() as usize;
        &self.values[idx.min(self.values.len() - 1)]
    }
}

/// Classical 4th-order Runge–Kutta on the closed loop ẋ = f + Gᵀu* + Ḡᵀw
/// with the cost integrals carried as augmented state. Aborts with a partial
/// trajectory when the state leaves the model domain.
pub fn simulate<T: Scalar + serde::Serialize>(
    problem: &DesignedProblem<T>,
    x0: &Vector<T>,
    t_final: T,
    h: T,
    signal: &DisturbanceSignal<T>,
) -> Result<SimRun<T>, SimError> {
    if h <= T::zero() {
        return Err(SimError::Precondition { context: "h must be positive".into() });
    }
    if t_final < h {
        return Err(SimError::Precondition { context: "T must be at least h".into() });
    }
    let model = problem.model();
    if x0.len() != model.state_dim() {
        return Err(SimError::Precondition {
            context: format!("x0 has length {}, expected {}", x0.len(), model.state_dim()),
        });
    }
    if !model.domain().contains(x0) {
        return Err(SimError::Precondition { context: "x0 is outside the model domain".into() });
    }
    let n_w = model.disturbance_dim();
    let noise = match signal {
        DisturbanceSignal::Zero => None,
        DisturbanceSignal::Constant(v) => {
            if v.len() != n_w {
                return Err(SimError::DisturbanceMismatch {
                    context: format!("constant vector has length {}, n_w = {n_w}", v.len()),
                });
            }
            None
        }
        DisturbanceSignal::SeededRandom { amplitude, seed, hold } => {
            if n_w == 0 {
                return Err(SimError::DisturbanceMismatch {
                    context: "model has no disturbance channel".into(),
                });
            }
            if *amplitude < T::zero() || *hold <= T::zero() {
                return Err(SimError::Precondition {
                    context: "amplitude must be >= 0 and hold > 0".into(),
                });
            }
            Some(HeldNoise::generate(*amplitude, *seed, *hold, n_w, t_final))
        }
        DisturbanceSignal::WorstCase => {
            if !problem.is_robust() {
                return Err(SimError::WorstCaseNeedsRobust);
            }
            None
        }
    };

    let disturbance_at = |t: T, x: &Vector<T>| -> Option<Vector<T>> {
        if n_w == 0 {
            return None;
        }
        Some(match signal {
            DisturbanceSignal::Zero => Vector::zeros(n_w),
            DisturbanceSignal::Constant(v) => v.clone(),
            DisturbanceSignal::SeededRandom { .. } => {
                noise.as_ref().expect("noise table exists").at(t).clone()
            }
            DisturbanceSignal::WorstCase => {
                problem.disturbance_raw(x).expect("robust mode checked above")
            }
        })
    };

    // Augmented derivative: (ẋ, d/dt ∫(q + uᵀRu), d/dt ∫ ξ wᵀSw).
    let penalties = problem.penalties();
    let derivative = |t: T, x: &Vector<T>| -> (Vector<T>, T, T) {
        let u = problem.control_raw(x);
        let w = disturbance_at(t, x);
        let dx = model.rhs(x, &u, w.as_ref());
        let supply = problem.cost_raw(x) + penalties.r().quadratic_form(&u);
        let dist = match (penalties.robust_part(), &w) {
            (Some((s, xi)), Some(w)) => xi * s.quadratic_form(w),
            _ => T::zero(),
        };
        (dx, supply, dist)
    };

    let steps = (t_final / h).round().as_f64() as usize;
    let steps = steps.max(1);
    let mut traj = Trajectory::with_capacity(steps);
    let mut x = x0.clone();
    let mut supply_acc = T::zero();
    let mut dist_acc = T::zero();
    let half = h * T::lit(0.5);
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);

    let record = |traj: &mut Trajectory<T>, t: T, x: &Vector<T>, supply: T, dist: T| {
        let u = problem.control_raw(x);
        let w = disturbance_at(t, x);
        let l = problem.running_cost_raw(x, &u, w.as_ref());
        traj.times.push(t);
        traj.states.push(x.clone());
        traj.inputs.push(u);
        traj.disturbances.push(w.unwrap_or_else(|| Vector::zeros(0)));
        traj.v_values.push(problem.clf().value(x));
        traj.q_values.push(problem.cost_raw(x));
        traj.l_values.push(l);
        traj.running_cost.push(supply - dist);
        traj.supply_integral.push(supply);
        traj.disturbance_integral.push(dist);
    };

    record(&mut traj, T::zero(), &x, supply_acc, dist_acc);
    for step in 0..steps {
        let t = T::lit(step as f64) * h;
        let (k1, s1, d1) = derivative(t, &x);
        let (k2, s2, d2) = derivative(t + half, &(&x + &k1.scale(half)));
        let (k3, s3, d3) = derivative(t + half, &(&x + &k2.scale(half)));
        let (k4, s4, d4) = derivative(t + h, &(&x + &k3.scale(h)));

        x = &x + &(&(&(&k1 + &k4) + &k2.scale(two)) + &k3.scale(two)).scale(sixth);
        supply_acc += sixth * (s1 + two * s2 + two * s3 + s4);
        dist_acc += sixth * (d1 + two * d2 + two * d3 + d4);
        let t_next = T::lit((step + 1) as f64) * h;

        if !x.is_finite() || !supply_acc.is_finite() || !dist_acc.is_finite() {
            return Err(SimError::Blowup { time: t_next.as_f64() });
        }
        if !model.domain().contains(&x) {
            return Ok(SimRun {
                trajectory: traj,
                termination: Termination::DomainExit { time: t_next, state: x },
            });
        }
        record(&mut traj, t_next, &x, supply_acc, dist_acc);
    }
    Ok(SimRun { trajectory: traj, termination: Termination::Completed })
}

/// Final value of the running-cost integral ∫ L ds.
pub fn accumulated_cost<T: Scalar>(traj: &Trajectory<T>) -> Result<T, SimError> {
    traj.running_cost.last().copied().ok_or(SimError::EmptyTrajectory)
}

/// Earliest recorded time t after which every selected component stays within
/// `threshold` in absolute value; `None` when the tail never settles.
pub fn settling_time<T: Scalar>(
    traj: &Trajectory<T>,
    selector: &[usize],
    threshold: T,
) -> Result<Option<T>, SimError> {
    if selector.is_empty() {
        return Err(SimError::EmptySelector);
    }
    if traj.is_empty() {
        return Err(SimError::EmptyTrajectory);
    }
    if threshold <= T::zero() {
        return Err(SimError::Precondition { context: "threshold must be positive".into() });
    }
    let violates = |x: &Vector<T>| selector.iter().any(|&i| x[i].abs() > threshold);
    let mut settle_index = None;
    for k in (0..traj.len()).rev() {
        if violates(&traj.states[k]) {
            break;
        }
        settle_index = Some(k);
    }
    Ok(settle_index.map(|k| traj.times[k]))
}

/// Two sides of the trajectory dissipation inequality
/// ∫(q + uᵀRu) ≤ V(x₀) + ξ∫wᵀSw + tol with tol = 1e-6 · (1 + V(x₀)).
#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DissipationReport<T> {
    pub supplied: T,
    pub stored_plus_disturbance: T,
    pub tolerance: T,
    pub margin: T,
    pub pass: bool,
}

pub fn dissipation_check<T: Scalar + serde::Serialize>(
    traj: &Trajectory<T>,
    problem: &DesignedProblem<T>,
) -> Result<DissipationReport<T>, SimError> {
    if !problem.is_robust() {
        return Err(SimError::NominalMode);
    }
    if traj.is_empty() {
        return Err(SimError::EmptyTrajectory);
    }
    let supplied = *traj.supply_integral.last().expect("nonempty");
    let v0 = traj.v_values[0];
    let rhs = v0 + *traj.disturbance_integral.last().expect("nonempty");
    let tolerance = T::lit(1e-6) * (T::one() + v0);
    let margin = rhs + tolerance - supplied;
    Ok(DissipationReport {
        supplied,
        stored_plus_disturbance: rhs,
        tolerance,
        margin,
        pass: margin >= T::zero(),
    })
}
