//! Aggregated certification of a [`DesignedProblem`]: residual scans over
//! grids or seeded samples, admissibility, retuning monotonicity, the
//! Riccati-oracle equivalence for the linear family, the value-function
//! identity along closed-loop runs, and the oscillator cross-checks.
//!
//! Every check produces a [`CheckEntry`] with the measured value, the
//! tolerance it was held to, and a witness state; failures are recorded, not
//! raised.

use thiserror::Error;

use crate::clf::{check_clf, ClfError};
use crate::design::{
    linear_q, oscillator_closed_forms, DesignError, DesignedProblem,
};
use crate::model::{axis_probes, check_assumption1, sample_domain, OscillatorNetwork};
use crate::numerics::{
    inverse, loewner_leq, machine_floor, solve_are, Matrix, NumericsError, Vector,
};
use crate::sim::{dissipation_check, simulate, DisturbanceSignal, SimError, Termination};
use crate::Scalar;

#[derive(Debug, Clone, Error)]
pub enum VerifyError {
    #[error("precondition violated: {context}")]
    Precondition { context: String },
    #[error("operation requires a nominal-mode problem")]
    NominalOnly,
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Clf(#[from] ClfError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// One named check with its outcome, worst-case witness, measured value, and
/// the tolerance it was compared against.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckEntry<T: Scalar + serde::Serialize> {
    pub name: String,
    pub pass: bool,
    pub measured: T,
    pub tolerance: T,
    pub witness: Option<Vector<T>>,
    pub note: Option<String>,
}

impl<T: Scalar + serde::Serialize> CheckEntry<T> {
    fn failed(name: &str, note: String) -> Self {
        Self {
            name: name.into(),
            pass: false,
            measured: T::nan(),
            tolerance: T::zero(),
            witness: None,
            note: Some(note),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationReport<T: Scalar + serde::Serialize> {
    pub checks: Vec<CheckEntry<T>>,
    pub overall_pass: bool,
}

impl<T: Scalar + serde::Serialize> VerificationReport<T> {
    pub fn from_checks(checks: Vec<CheckEntry<T>>) -> Self {
        let overall_pass = checks.iter().all(|c| c.pass);
        Self { checks, overall_pass }
    }
}

/// Tunables for a verification run; the defaults are the ones used by the
/// bundled scenarios.
#[derive(Clone)]
pub struct VerifyConfig<T> {
    pub points_per_axis: usize,
    pub sample_count: usize,
    pub seed: u64,
    /// Relative bound on |HJB residual| / (1 + |q|).
    pub residual_tol: T,
    /// Bound on the CLF gradient vs finite differences.
    pub gradient_tol: T,
    /// Bound on |∫L − (V(x0) − V(x(T)))|.
    pub value_tol: T,
    pub horizon: T,
    pub step: T,
    /// Initial state for trajectory-level checks.
    pub x0: Option<Vector<T>>,
    /// Disturbance used for the robust dissipation check.
    pub disturbance: DisturbanceSignal<T>,
    /// Retuning candidates (R', optional S').
    pub retune_candidates: Vec<(Matrix<T>, Option<Matrix<T>>)>,
}

impl<T: Scalar> Default for VerifyConfig<T> {
    fn default() -> Self {
        Self {
            points_per_axis: 21,
            sample_count: 4096,
            seed: 42,
            residual_tol: T::lit(1e-9),
            gradient_tol: T::lit(1e-6),
            value_tol: T::lit(1e-4),
            horizon: T::lit(20.0),
            step: T::lit(1e-3),
            x0: None,
            disturbance: DisturbanceSignal::Zero,
            retune_candidates: Vec::new(),
        }
    }
}

/// States to scan: a full grid for low state dimensions, seeded samples
/// otherwise, always augmented with the axis probes.
pub fn scan_states<T: Scalar + serde::Serialize>(
    problem: &DesignedProblem<T>,
    cfg: &VerifyConfig<T>,
) -> Vec<Vector<T>> {
    let model = problem.model();
    let dim = model.state_dim();
    let mut states = if dim <= 3 {
        let (lo, hi) = model.domain().sampling_bounds(T::lit(5.0));
        let axis_points: Vec<Vec<T>> = (0..dim)
            .map(|i| {
                (0..cfg.points_per_axis)
                    .map(|k| {
                        let frac = T::lit(k as f64) / T::lit((cfg.points_per_axis - 1).max(1) as f64);
                        lo[i] + (hi[i] - lo[i]) * frac
                    })
                    .collect()
            })
            .collect();
        let mut grid = Vec::with_capacity(cfg.points_per_axis.pow(dim as u32));
        let mut idx = vec![0usize; dim];
        loop {
            let x = Vector::from_fn(dim, |i| axis_points[i][idx[i]]);
            if model.domain().contains(&x) {
                grid.push(x);
            }
            let mut carry = 0;
            loop {
                idx[carry] += 1;
                if idx[carry] < cfg.points_per_axis {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
                if carry == dim {
                    break;
                }
            }
            if carry == dim {
                break;
            }
        }
        grid
    } else {
        sample_domain(model, cfg.sample_count, cfg.seed)
    };
    states.extend(axis_probes(model));
    states
}

/// Max relative Hamilton-Jacobi residual over the scan states.
pub fn verify_residual_grid<T: Scalar + serde::Serialize>(
    problem: &DesignedProblem<T>,
    cfg: &VerifyConfig<T>,
) -> CheckEntry<T> {
    residual_entry(problem, cfg, "hjb_residual_grid", None)
}

/// Same scan with the state cost replaced by x ↦ xᵀQx. Documents how a cost
/// matrix that misses the designed form breaks the identity.
pub fn verify_residual_grid_with_cost<T: Scalar + serde::Serialize>(
    problem: &DesignedProblem<T>,
    cost: &Matrix<T>,
    cfg: &VerifyConfig<T>,
) -> CheckEntry<T> {
    residual_entry(problem, cfg, "hjb_residual_grid[cost_override]", Some(cost))
}

fn residual_entry<T: Scalar + serde::Serialize>(
    problem: &DesignedProblem<T>,
    cfg: &VerifyConfig<T>,
    name: &str,
    cost_override: Option<&Matrix<T>>,
) -> CheckEntry<T> {
    let mut worst = T::zero();
    let mut witness = None;
    for x in scan_states(problem, cfg) {
        let residual = match cost_override {
            None => problem.hjb_residual(&x),
            Some(q) => problem.hjb_residual_with_cost(&x, q.quadratic_form(&x)),
        };
        let Ok(residual) = residual else { continue };
        let q = match problem.designed_cost(&x) {
            Ok(q) => q,
            Err(_) => continue,
        };
        let relative = residual.abs() / (T::one() + q.abs());
        if relative > worst {
            worst = relative;
            witness = Some(x);
        }
    }
    CheckEntry {
        name: name.into(),
        pass: worst <= cfg.residual_tol,
        measured: worst,
        tolerance: cfg.residual_tol,
        witness,
        note: None,
    }
}

/// Closed-loop value identity for nominal problems: running the loop from x0
/// must spend V(x0) − V(x(T)).
pub fn verify_value_identity<T: Scalar + serde::Serialize>(
    problem: &DesignedProblem<T>,
    x0: &Vector<T>,
    horizon: T,
    step: T,
    tol: T,
) -> Result<CheckEntry<T>, VerifyError> {
    if problem.is_robust() {
        return Err(VerifyError::NominalOnly);
    }
    let run = simulate(problem, x0, horizon, step, &DisturbanceSignal::Zero)?;
    if let Termination::DomainExit { time, state } = &run.termination {
        return Ok(CheckEntry {
            name: "value_identity".into(),
            pass: false,
            measured: T::nan(),
            tolerance: tol,
            witness: Some(state.clone()),
            note: Some(format!("trajectory left the domain at t = {:.4}", time.as_f64())),
        });
    }
    let total = *run.trajectory.running_cost.last().expect("completed run");
    let v0 = run.trajectory.v_values[0];
    let v_end = *run.trajectory.v_values.last().expect("completed run");
    let defect = (total - (v0 - v_end)).abs();
    Ok(CheckEntry {
        name: "value_identity".into(),
        pass: defect <= tol,
        measured: defect,
        tolerance: tol,
        witness: Some(x0.clone()),
        note: None,
    })
}

/// Retuning monotonicity: with R' ⪯ R (and S' ⪰ S) the designed cost may only
/// grow pointwise, and admissibility must be preserved.
pub fn verify_r_monotonicity<T: Scalar + serde::Serialize>(
    problem: &DesignedProblem<T>,
    r_prime: &Matrix<T>,
    s_prime: Option<&Matrix<T>>,
    sample_count: usize,
    seed: u64,
) -> Result<CheckEntry<T>, VerifyError> {
    let tol = machine_floor::<T>(1e-12);
    if !loewner_leq(r_prime, problem.penalties().r(), tol)? {
        return Err(VerifyError::Precondition {
            context: "R' must satisfy R' <= R in the Loewner order".into(),
        });
    }
    if let (Some(sp), Some((s, _))) = (s_prime, problem.penalties().robust_part()) {
        if !loewner_leq(s, sp, tol)? {
            return Err(VerifyError::Precondition {
                context: "S' must satisfy S' >= S in the Loewner order".into(),
            });
        }
    }
    let retuned = problem.retune(r_prime.clone(), s_prime.cloned())?;
    let mut min_gap = T::infinity();
    let mut witness = None;
    let states = sample_domain(problem.model(), sample_count, seed)
        .into_iter()
        .chain(axis_probes(problem.model()));
    for x in states {
        let gap = retuned.problem.designed_cost(&x).unwrap_or(T::nan())
            - problem.designed_cost(&x).unwrap_or(T::nan());
        if gap < min_gap {
            min_gap = gap;
            witness = Some(x);
        }
    }
    let admissible = retuned.admissibility.pass;
    Ok(CheckEntry {
        name: "retune_monotonicity".into(),
        pass: min_gap >= -tol && admissible,
        measured: min_gap,
        tolerance: tol,
        witness,
        note: (!admissible).then(|| "retuned problem failed admissibility".into()),
    })
}

/// Independent linear-family oracle: with Q derived from (A, B, P, R), the
/// Newton–Kleinman Riccati solution must come back as P/2.
pub fn verify_are_oracle<T: Scalar + serde::Serialize>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    p: &Matrix<T>,
    r: &Matrix<T>,
) -> Result<CheckEntry<T>, VerifyError> {
    let gain = &(&(b * &inverse(r)?) * &b.transpose()) * p;
    let a_closed = a - &gain.scale(T::lit(0.5));
    if !closed_loop_decays(&a_closed) {
        return Err(VerifyError::Precondition {
            context: "A - (1/2) B R^-1 B^T P is not Hurwitz (trajectory decay precheck)".into(),
        });
    }
    let q = linear_q(a, b, p, r, None)?;
    let x = solve_are(a, b, &q.derived, r)?;
    let gap = (&x - &p.scale(T::lit(0.5))).frobenius_norm();
    let tol = machine_floor::<T>(1e-7) * (T::one() + p.frobenius_norm());
    Ok(CheckEntry {
        name: "are_oracle".into(),
        pass: gap <= tol,
        measured: gap,
        tolerance: tol,
        witness: None,
        note: None,
    })
}

/// Dimension-agnostic Hurwitz precheck: RK4 trajectories from 8 seeded unit
/// initial conditions must decay by 1e3 over a horizon scaled to ‖A‖.
fn closed_loop_decays<T: Scalar>(a: &Matrix<T>) -> bool {
    use rand::{Rng, SeedableRng};
    let n = a.rows();
    let h = T::lit(0.5) / (T::one() + a.frobenius_norm());
    let steps = 6000usize;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xdeca);
    let half = h * T::lit(0.5);
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    for _ in 0..8 {
        let mut x = Vector::from_fn(n, |_| T::lit(rng.gen_range(-1.0..1.0)));
        let norm0 = x.norm() + T::epsilon();
        for _ in 0..steps {
            let k1 = a.mul_vec(&x);
            let k2 = a.mul_vec(&(&x + &k1.scale(half)));
            let k3 = a.mul_vec(&(&x + &k2.scale(half)));
            let k4 = a.mul_vec(&(&x + &k3.scale(h)));
            x = &x + &(&(&(&k1 + &k4) + &k2.scale(two)) + &k3.scale(two)).scale(sixth);
            if !x.is_finite() {
                return false;
            }
        }
        if x.norm() > norm0 * T::lit(1e-3) {
            return false;
        }
    }
    true
}

/// Everything applicable to one problem, aggregated in a deterministic order.
/// `network` enables the oscillator-specific cross-checks.
pub fn verify_problem<T: Scalar + serde::Serialize>(
    problem: &DesignedProblem<T>,
    network: Option<&OscillatorNetwork<T>>,
    cfg: &VerifyConfig<T>,
) -> VerificationReport<T> {
    let mut checks = Vec::new();

    match check_clf(problem.clf(), problem.model(), cfg.sample_count, cfg.seed) {
        Ok(report) => {
            checks.push(CheckEntry {
                name: "clf_gradient".into(),
                pass: report.max_gradient_deviation <= cfg.gradient_tol,
                measured: report.max_gradient_deviation,
                tolerance: cfg.gradient_tol,
                witness: report.worst_gradient_point,
                note: None,
            });
            checks.push(CheckEntry {
                name: "clf_positivity".into(),
                pass: report.min_value > T::zero(),
                measured: report.min_value,
                tolerance: T::zero(),
                witness: report.argmin,
                note: None,
            });
        }
        Err(e) => checks.push(CheckEntry::failed("clf_gradient", e.to_string())),
    }

    checks.push(verify_residual_grid(problem, cfg));

    let admissibility = problem.admissibility_check(cfg.sample_count, cfg.seed);
    checks.push(CheckEntry {
        name: "admissibility".into(),
        pass: admissibility.pass,
        measured: admissibility.min_cost,
        tolerance: T::zero(),
        witness: admissibility.argmin,
        note: None,
    });

    if let Some(net) = network {
        checks.push(CheckEntry {
            name: "assumption1".into(),
            pass: check_assumption1(net),
            measured: net.coupling_balance_residual(net.delta_s()),
            tolerance: machine_floor::<T>(1e-8),
            witness: Some(net.delta_s().stack(&Vector::zeros(net.node_count()))),
            note: (net.delta_s_image_residual() > machine_floor::<T>(1e-8))
                .then(|| "steady state is off Im(B^T)".into()),
        });
        checks.push(closed_form_agreement_entry(problem, net, cfg));
    }

    if !problem.is_robust() {
        if let Some(x0) = &cfg.x0 {
            match verify_value_identity(problem, x0, cfg.horizon, cfg.step, cfg.value_tol) {
                Ok(entry) => checks.push(entry),
                Err(e) => checks.push(CheckEntry::failed("value_identity", e.to_string())),
            }
        }
    } else if let Some(x0) = &cfg.x0 {
        checks.push(dissipation_entry(problem, x0, cfg));
    }

    for (i, (r_prime, s_prime)) in cfg.retune_candidates.iter().enumerate() {
        let name = format!("retune_monotonicity[{i}]");
        match verify_r_monotonicity(problem, r_prime, s_prime.as_ref(), cfg.sample_count, cfg.seed)
        {
            Ok(mut entry) => {
                entry.name = name;
                checks.push(entry);
            }
            Err(e) => checks.push(CheckEntry::failed(&name, e.to_string())),
        }
    }

    VerificationReport::from_checks(checks)
}

/// Closed-form q and u* must agree with the generic designed cost and
/// controller at every scanned state; this is what licenses using them
/// interchangeably.
fn closed_form_agreement_entry<T: Scalar + serde::Serialize>(
    problem: &DesignedProblem<T>,
    net: &OscillatorNetwork<T>,
    cfg: &VerifyConfig<T>,
) -> CheckEntry<T> {
    let robust = problem.penalties().robust_part();
    let forms = match oscillator_closed_forms(net, problem.penalties().r(), robust) {
        Ok(f) => f,
        Err(e) => return CheckEntry::failed("closed_form_agreement", e.to_string()),
    };
    let tol = machine_floor::<T>(1e-12);
    let mut worst = T::zero();
    let mut witness = None;
    for x in sample_domain(problem.model(), cfg.sample_count, cfg.seed) {
        let q_generic = match problem.designed_cost(&x) {
            Ok(q) => q,
            Err(_) => continue,
        };
        let q_gap = (q_generic - forms.cost(&x)).abs() / (T::one() + q_generic.abs());
        let u_gap = (&problem.control_raw(&x) - &forms.control(&x)).norm_inf();
        let gap = q_gap.max(u_gap);
        if gap > worst {
            worst = gap;
            witness = Some(x);
        }
    }
    CheckEntry {
        name: "closed_form_agreement".into(),
        pass: worst <= tol,
        measured: worst,
        tolerance: tol,
        witness,
        note: None,
    }
}

fn dissipation_entry<T: Scalar + serde::Serialize>(
    problem: &DesignedProblem<T>,
    x0: &Vector<T>,
    cfg: &VerifyConfig<T>,
) -> CheckEntry<T> {
    let run = match simulate(problem, x0, cfg.horizon, cfg.step, &cfg.disturbance) {
        Ok(run) => run,
        Err(e) => return CheckEntry::failed("dissipation", e.to_string()),
    };
    let note = match &run.termination {
        Termination::Completed => None,
        Termination::DomainExit { time, .. } => Some(format!(
            "domain exit at t = {:.4}; inequality checked on the partial trajectory",
            time.as_f64()
        )),
    };
    match dissipation_check(&run.trajectory, problem) {
        Ok(report) => CheckEntry {
            name: "dissipation".into(),
            pass: report.pass,
            measured: report.supplied - report.stored_plus_disturbance,
            tolerance: report.tolerance,
            witness: Some(x0.clone()),
            note,
        },
        Err(e) => CheckEntry::failed("dissipation", e.to_string()),
    }
}
