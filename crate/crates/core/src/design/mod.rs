//! Inverse-optimal design: bind a model, a CLF, and penalty matrices into a
//! [`DesignedProblem`] exposing the optimal controller u* = −½R⁻¹G∇V, the
//! worst-case disturbance w* = (1/2ξ)S⁻¹Ḡ∇V, the designed state cost q that
//! zeroes the stationary Hamilton-Jacobi bracket, the running cost L, and
//! penalty retuning.

mod linear;
mod oscillator_forms;

pub use linear::{linear_q, LinearQ, RobustLinearPenalty};
pub use oscillator_forms::{oscillator_closed_forms, OscillatorClosedForms};

use thiserror::Error;

use crate::clf::{Clf, ClfError};
use crate::model::{axis_probes, sample_domain, ControlAffineModel, ModelError};
use crate::numerics::{
    is_pd, loewner_leq, machine_floor, solve, Matrix, NumericsError, Vector,
};
use crate::Scalar;

/// Sampling defaults shared by admissibility checks and retuning re-checks.
pub const DEFAULT_SAMPLE_COUNT: usize = 4096;
pub const DEFAULT_SEED: u64 = 42;
/// States closer than this to the equilibrium are excluded from strict
/// positivity checks.
pub const EQUILIBRIUM_BALL: f64 = 1e-3;

#[derive(Debug, Clone, Error)]
pub enum DesignError {
    #[error("dimension mismatch: {context}")]
    Dimension { context: String },
    #[error("{what} must be symmetric positive definite")]
    NotPositiveDefinite { what: String },
    #[error("xi must be positive, found {value}")]
    XiNotPositive { value: f64 },
    #[error("operation requires a robust-mode problem")]
    NominalMode,
    #[error("robust mode requires a model with a disturbance channel")]
    NoDisturbanceChannel,
    #[error("state is outside the model domain")]
    DomainViolation,
    #[error("CLF equilibrium does not match the model equilibrium (gap {gap:.3e})")]
    EquilibriumMismatch { gap: f64 },
    #[error("construction spot check failed: |HJB residual| = {residual:.3e} at a sampled state")]
    ConstructionResidual { residual: f64 },
    #[error("steady state violates the coupling-balance assumption")]
    Assumption1Violated,
    #[error("robust cost requires D − S⁻¹/(4ξ) > 0, which fails here")]
    RobustDampingCondition,
    #[error(transparent)]
    Clf(#[from] ClfError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Penalty matrices of the running cost ‖u‖²_R − ξ‖w‖²_S. The nominal variant
/// has no disturbance penalty by construction.
#[derive(Clone)]
pub enum PenaltyConfig<T> {
    Nominal { r: Matrix<T> },
    Robust { r: Matrix<T>, s: Matrix<T>, xi: T },
}

impl<T: Scalar> PenaltyConfig<T> {
    pub fn nominal(r: Matrix<T>) -> Result<Self, DesignError> {
        require_spd(&r, "R")?;
        Ok(Self::Nominal { r })
    }

    pub fn robust(r: Matrix<T>, s: Matrix<T>, xi: T) -> Result<Self, DesignError> {
        require_spd(&r, "R")?;
        require_spd(&s, "S")?;
        if xi <= T::zero() {
            return Err(DesignError::XiNotPositive { value: xi.as_f64() });
        }
        Ok(Self::Robust { r, s, xi })
    }

    pub fn r(&self) -> &Matrix<T> {
        match self {
            Self::Nominal { r } | Self::Robust { r, .. } => r,
        }
    }

    pub fn robust_part(&self) -> Option<(&Matrix<T>, T)> {
        match self {
            Self::Nominal { .. } => None,
            Self::Robust { s, xi, .. } => Some((s, *xi)),
        }
    }

    pub fn is_robust(&self) -> bool {
        matches!(self, Self::Robust { .. })
    }
}

fn require_spd<T: Scalar>(m: &Matrix<T>, what: &str) -> Result<(), DesignError> {
    if !m.is_square() {
        return Err(DesignError::Dimension {
            context: format!("{what} must be square, found {}x{}", m.rows(), m.cols()),
        });
    }
    match is_pd(m, T::zero()) {
        Ok(true) => Ok(()),
        Ok(false) => Err(DesignError::NotPositiveDefinite { what: what.into() }),
        Err(NumericsError::NotSymmetric { .. }) => {
            Err(DesignError::NotPositiveDefinite { what: what.into() })
        }
        Err(e) => Err(e.into()),
    }
}

/// Report of the sampled admissibility check: q must stay positive away from
/// the equilibrium, which is exactly the strict Lyapunov-decrease inequality.
#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AdmissibilityReport<T: Scalar + serde::Serialize> {
    pub samples: usize,
    pub min_cost: T,
    pub argmin: Option<Vector<T>>,
    pub pass: bool,
}

/// Outcome of retuning; the Loewner preconditions are sufficient, not
/// necessary, so violations warn and the sampled admissibility re-check
/// arbitrates.
pub struct Retuned<T: Scalar + serde::Serialize> {
    pub problem: DesignedProblem<T>,
    pub loewner_r_ok: bool,
    pub loewner_s_ok: Option<bool>,
    pub warnings: Vec<String>,
    pub admissibility: AdmissibilityReport<T>,
}

/// A model, CLF, and penalties bound together. Immutable; all evaluators are
/// pure and safe to call concurrently.
#[derive(Clone)]
pub struct DesignedProblem<T> {
    model: ControlAffineModel<T>,
    clf: Clf<T>,
    penalties: PenaltyConfig<T>,
}

impl<T: Scalar + serde::Serialize> DesignedProblem<T> {
    pub fn new(
        model: ControlAffineModel<T>,
        clf: Clf<T>,
        penalties: PenaltyConfig<T>,
    ) -> Result<Self, DesignError> {
        if clf.dim() != model.state_dim() {
            return Err(DesignError::Dimension {
                context: format!(
                    "CLF dimension {} vs model dimension {}",
                    clf.dim(),
                    model.state_dim()
                ),
            });
        }
        let r = penalties.r();
        if r.rows() != model.input_dim() {
            return Err(DesignError::Dimension {
                context: format!(
                    "R is {}x{}, input dimension is {}",
                    r.rows(),
                    r.cols(),
                    model.input_dim()
                ),
            });
        }
        if let Some((s, _)) = penalties.robust_part() {
            if !model.has_disturbance_channel() {
                return Err(DesignError::NoDisturbanceChannel);
            }
            if s.rows() != model.disturbance_dim() {
                return Err(DesignError::Dimension {
                    context: format!(
                        "S is {}x{}, disturbance dimension is {}",
                        s.rows(),
                        s.cols(),
                        model.disturbance_dim()
                    ),
                });
            }
        }
        let eq_gap = (clf.equilibrium() - model.equilibrium()).norm_inf();
        if eq_gap > machine_floor::<T>(1e-9) {
            return Err(DesignError::EquilibriumMismatch { gap: eq_gap.as_f64() });
        }

        let problem = Self { model, clf, penalties };
        // Construction-time spot check: the designed cost must zero the
        // Hamilton-Jacobi bracket at sampled states.
        for x in sample_domain(&problem.model, 16, 0x5eed) {
            let q = problem.cost_raw(&x);
            let residual = problem.residual_raw(&x);
            if residual.abs() > machine_floor::<T>(1e-9) * (T::one() + q.abs()) {
                return Err(DesignError::ConstructionResidual {
                    residual: residual.abs().as_f64(),
                });
            }
        }
        Ok(problem)
    }

    pub fn model(&self) -> &ControlAffineModel<T> {
        &self.model
    }

    pub fn clf(&self) -> &Clf<T> {
        &self.clf
    }

    pub fn penalties(&self) -> &PenaltyConfig<T> {
        &self.penalties
    }

    pub fn is_robust(&self) -> bool {
        self.penalties.is_robust()
    }

    fn check_domain(&self, x: &Vector<T>) -> Result<(), DesignError> {
        if self.model.domain().contains(x) {
            Ok(())
        } else {
            Err(DesignError::DomainViolation)
        }
    }

    /// Optimal feedback u*(x) = −½ R⁻¹ G(x) ∇V(x).
    pub fn optimal_control(&self, x: &Vector<T>) -> Result<Vector<T>, DesignError> {
        self.check_domain(x)?;
        Ok(self.control_raw(x))
    }

    /// Worst-case disturbance w*(x) = (1/2ξ) S⁻¹ Ḡ(x) ∇V(x); robust mode only.
    pub fn worst_disturbance(&self, x: &Vector<T>) -> Result<Vector<T>, DesignError> {
        self.check_domain(x)?;
        self.disturbance_raw(x).ok_or(DesignError::NominalMode)
    }

    /// Designed state cost q(x), defined pointwise so that the
    /// Hamilton-Jacobi bracket vanishes with (u*, w*).
    pub fn designed_cost(&self, x: &Vector<T>) -> Result<T, DesignError> {
        self.check_domain(x)?;
        Ok(self.cost_raw(x))
    }

    /// Running cost L(x, u, w) = q(x) + uᵀRu − ξwᵀSw (disturbance term only
    /// in robust mode).
    pub fn running_cost(
        &self,
        x: &Vector<T>,
        u: &Vector<T>,
        w: Option<&Vector<T>>,
    ) -> Result<T, DesignError> {
        if u.len() != self.model.input_dim() {
            return Err(DesignError::Dimension {
                context: format!("u has length {}, expected {}", u.len(), self.model.input_dim()),
            });
        }
        if let Some(w) = w {
            if w.len() != self.model.disturbance_dim() {
                return Err(DesignError::Dimension {
                    context: format!(
                        "w has length {}, expected {}",
                        w.len(),
                        self.model.disturbance_dim()
                    ),
                });
            }
        }
        Ok(self.running_cost_raw(x, u, w))
    }

    /// Stationary Hamilton-Jacobi residual at the saddle pair (u*, w*); zero
    /// up to floating-point error by construction.
    pub fn hjb_residual(&self, x: &Vector<T>) -> Result<T, DesignError> {
        self.check_domain(x)?;
        Ok(self.residual_raw(x))
    }

    /// Hamilton-Jacobi bracket with the state cost replaced by `cost`; used
    /// to document how alternative cost matrices miss the identity.
    pub fn hjb_residual_with_cost(&self, x: &Vector<T>, cost: T) -> Result<T, DesignError> {
        self.check_domain(x)?;
        Ok(cost + self.bracket_without_cost(x))
    }

    /// Sampled admissibility: min q over domain samples and axis probes
    /// outside the equilibrium ball; positive min is the strict inequality.
    pub fn admissibility_check(&self, sample_count: usize, seed: u64) -> AdmissibilityReport<T> {
        let ball = T::lit(EQUILIBRIUM_BALL);
        let mut min_cost = T::infinity();
        let mut argmin = None;
        let mut used = 0usize;
        let samples = sample_domain(&self.model, sample_count, seed)
            .into_iter()
            .chain(axis_probes(&self.model));
        for x in samples {
            if (&x - self.model.equilibrium()).norm() <= ball {
                continue;
            }
            used += 1;
            let q = self.cost_raw(&x);
            if q < min_cost {
                min_cost = q;
                argmin = Some(x);
            }
        }
        AdmissibilityReport {
            samples: used,
            min_cost,
            argmin,
            pass: min_cost > T::zero(),
        }
    }

    /// Replace the penalties, keeping model and CLF. Retuning with R' ⪯ R
    /// (and S' ⪰ S) provably preserves admissibility; other choices warn and
    /// are re-verified by sampling.
    pub fn retune(
        &self,
        r_prime: Matrix<T>,
        s_prime: Option<Matrix<T>>,
    ) -> Result<Retuned<T>, DesignError> {
        let tol = machine_floor::<T>(1e-12);
        let mut warnings = Vec::new();

        let loewner_r_ok = loewner_leq(&r_prime, self.penalties.r(), tol)?;
        if !loewner_r_ok {
            warnings.push("R' exceeds R in the Loewner order; admissibility not guaranteed".into());
        }

        let penalties = match (&self.penalties, s_prime) {
            (PenaltyConfig::Nominal { .. }, None) => PenaltyConfig::nominal(r_prime)?,
            (PenaltyConfig::Nominal { .. }, Some(_)) => {
                return Err(DesignError::NominalMode);
            }
            (PenaltyConfig::Robust { s, xi, .. }, maybe_s) => {
                let s_new = maybe_s.unwrap_or_else(|| s.clone());
                PenaltyConfig::robust(r_prime, s_new, *xi)?
            }
        };

        let loewner_s_ok = match (&self.penalties, &penalties) {
            (PenaltyConfig::Robust { s, .. }, PenaltyConfig::Robust { s: s_new, .. }) => {
                let ok = loewner_leq(s, s_new, tol)?;
                if !ok {
                    warnings.push(
                        "S' is below S in the Loewner order; admissibility not guaranteed".into(),
                    );
                }
                Some(ok)
            }
            _ => None,
        };

        let problem = Self::new(self.model.clone(), self.clf.clone(), penalties)?;
        let admissibility = problem.admissibility_check(DEFAULT_SAMPLE_COUNT, DEFAULT_SEED);
        Ok(Retuned {
            problem,
            loewner_r_ok,
            loewner_s_ok,
            warnings,
            admissibility,
        })
    }

    // ----- raw evaluators (no domain checks), shared with sim/verify -----

    pub(crate) fn control_raw(&self, x: &Vector<T>) -> Vector<T> {
        let g_grad = self.model.g(x).mul_vec(&self.clf.gradient(x));
        solve(self.penalties.r(), &g_grad)
            .expect("R is positive definite")
            .scale(-T::lit(0.5))
    }

    pub(crate) fn disturbance_raw(&self, x: &Vector<T>) -> Option<Vector<T>> {
        let (s, xi) = self.penalties.robust_part()?;
        let gbar = self.model.gbar(x)?;
        let gb_grad = gbar.mul_vec(&self.clf.gradient(x));
        Some(
            solve(s, &gb_grad)
                .expect("S is positive definite")
                .scale((T::lit(2.0) * xi).recip()),
        )
    }

    pub(crate) fn cost_raw(&self, x: &Vector<T>) -> T {
        let grad = self.clf.gradient(x);
        let u = self.control_raw(x);
        let mut drift = &self.model.f(x) + &self.model.g(x).transpose().mul_vec(&u);
        let mut q = -self.penalties.r().quadratic_form(&u);
        if let Some((s, xi)) = self.penalties.robust_part() {
            let w = self.disturbance_raw(x).expect("robust problems have a channel");
            drift = &drift + &self.model.gbar(x).expect("channel").transpose().mul_vec(&w);
            q += xi * s.quadratic_form(&w);
        }
        q - grad.dot(&drift)
    }

    /// Algebraic cross-check route for q, quadratic in the gradient:
    /// −∇Vᵀf + ¼‖G∇V‖²_{R⁻¹} − (1/4ξ)‖Ḡ∇V‖²_{S⁻¹}.
    pub fn designed_cost_gradient_form(&self, x: &Vector<T>) -> T {
        let grad = self.clf.gradient(x);
        let g_grad = self.model.g(x).mul_vec(&grad);
        let r_inv_g = solve(self.penalties.r(), &g_grad).expect("R is positive definite");
        let mut q = -grad.dot(&self.model.f(x)) + g_grad.dot(&r_inv_g) * T::lit(0.25);
        if let Some((s, xi)) = self.penalties.robust_part() {
            let gb_grad = self
                .model
                .gbar(x)
                .expect("robust problems have a channel")
                .mul_vec(&grad);
            let s_inv_g = solve(s, &gb_grad).expect("S is positive definite");
            q -= gb_grad.dot(&s_inv_g) / (T::lit(4.0) * xi);
        }
        q
    }

    pub(crate) fn running_cost_raw(&self, x: &Vector<T>, u: &Vector<T>, w: Option<&Vector<T>>) -> T {
        let mut l = self.cost_raw(x) + self.penalties.r().quadratic_form(u);
        if let (Some((s, xi)), Some(w)) = (self.penalties.robust_part(), w) {
            l -= xi * s.quadratic_form(w);
        }
        l
    }

    /// ‖u*‖²_R − ξ‖w*‖²_S + ∇Vᵀ(f + Gᵀu* + Ḡᵀw*): the Hamilton-Jacobi
    /// bracket minus the state cost.
    fn bracket_without_cost(&self, x: &Vector<T>) -> T {
        let grad = self.clf.gradient(x);
        let u = self.control_raw(x);
        let mut drift = &self.model.f(x) + &self.model.g(x).transpose().mul_vec(&u);
        let mut penalty = self.penalties.r().quadratic_form(&u);
        if let Some((s, xi)) = self.penalties.robust_part() {
            let w = self.disturbance_raw(x).expect("robust problems have a channel");
            drift = &drift + &self.model.gbar(x).expect("channel").transpose().mul_vec(&w);
            penalty -= xi * s.quadratic_form(&w);
        }
        penalty + grad.dot(&drift)
    }

    pub(crate) fn residual_raw(&self, x: &Vector<T>) -> T {
        self.cost_raw(x) + self.bracket_without_cost(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{incidence_matrix, OscillatorNetwork};
    use crate::{clf, model};
    use std::f64::consts::FRAC_PI_4;

    fn sine_problem(n: usize, r: Matrix<f64>) -> DesignedProblem<f64> {
        DesignedProblem::new(
            model::sine(n),
            clf::cosine(n),
            PenaltyConfig::nominal(r).unwrap(),
        )
        .unwrap()
    }

    fn robust_scalar_problem() -> DesignedProblem<f64> {
        // A = −1, B = B̄ = 1, P = 1, R = S = 1, ξ = 1.
        let model = model::linear(
            Matrix::from_f64_rows(&[&[-1.0]]),
            Matrix::from_f64_rows(&[&[1.0]]),
            Some(Matrix::from_f64_rows(&[&[1.0]])),
        )
        .unwrap();
        DesignedProblem::new(
            model,
            clf::quadratic(Matrix::identity(1)).unwrap(),
            PenaltyConfig::robust(Matrix::identity(1), Matrix::identity(1), 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn sine_optimal_control_matches_closed_form() {
        let p = sine_problem(1, Matrix::identity(1));
        let x = Vector::from_f64s(&[FRAC_PI_4]);
        let u = p.optimal_control(&x).unwrap();
        assert!((u[0] - (-0.3535534)).abs() < 1e-7);
    }

    #[test]
    fn control_vanishes_at_equilibrium() {
        let p = sine_problem(2, Matrix::identity(2));
        let u = p.optimal_control(&Vector::zeros(2)).unwrap();
        assert_eq!(u.norm_inf(), 0.0);
    }

    #[test]
    fn linear_scalar_control() {
        // A=−1, B=1, P=1, R=1 at x=2: u = −½·1·1·2 = −1.
        let model = model::linear(
            Matrix::<f64>::from_f64_rows(&[&[-1.0]]),
            Matrix::from_f64_rows(&[&[1.0]]),
            None,
        )
        .unwrap();
        let p = DesignedProblem::new(
            model,
            clf::quadratic(Matrix::identity(1)).unwrap(),
            PenaltyConfig::nominal(Matrix::identity(1)).unwrap(),
        )
        .unwrap();
        let u = p.optimal_control(&Vector::from_f64s(&[2.0])).unwrap();
        assert!((u[0] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn sine_designed_cost_example() {
        // q(π/4) = 1.25 sin²(π/4) = 0.625 for R = 1.
        let p = sine_problem(1, Matrix::identity(1));
        let q = p.designed_cost(&Vector::from_f64s(&[FRAC_PI_4])).unwrap();
        assert!((q - 0.625).abs() < 1e-14);
    }

    #[test]
    fn cost_and_disturbance_vanish_at_equilibrium() {
        let p = robust_scalar_problem();
        assert_eq!(p.designed_cost(&Vector::zeros(1)).unwrap(), 0.0);
        assert_eq!(p.worst_disturbance(&Vector::zeros(1)).unwrap().norm_inf(), 0.0);
    }

    #[test]
    fn robust_scalar_cost_and_disturbance() {
        let p = robust_scalar_problem();
        let x = Vector::from_f64s(&[1.0]);
        let w = p.worst_disturbance(&x).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-14);
        let q = p.designed_cost(&x).unwrap();
        assert!((q - 1.0).abs() < 1e-14);
        // L(x, u=0, w=1) = q − ξ·1 = 0.
        let l = p
            .running_cost(&x, &Vector::zeros(1), Some(&Vector::from_f64s(&[1.0])))
            .unwrap();
        assert!(l.abs() < 1e-14);
    }

    #[test]
    fn oscillator_worst_disturbance_is_scaled_frequency() {
        // Ḡ∇V = M⁻¹·(Mω) = ω, so w* = ω/(2ξ) for S = I.
        let net = OscillatorNetwork::new(
            incidence_matrix::<f64>(&[(1, 2), (2, 3), (1, 3)], 3).unwrap(),
            Matrix::identity(3),
            Matrix::scaled_identity(3, 0.01),
            Matrix::scaled_identity(3, 0.1),
            Vector::zeros(3),
            Vector::zeros(3),
        )
        .unwrap();
        let p = DesignedProblem::new(
            model::oscillator(&net).unwrap(),
            crate::clf::oscillator(&net),
            PenaltyConfig::robust(Matrix::scaled_identity(3, 0.01), Matrix::identity(3), 2.8)
                .unwrap(),
        )
        .unwrap();
        let x = Vector::from_f64s(&[0.0, 0.0, 0.0, 0.1, 0.0, 0.0]);
        let w = p.worst_disturbance(&x).unwrap();
        assert!((w[0] - 0.0178571).abs() < 1e-7, "{w:?}");
        assert!((w[0] - 0.1 / 5.6).abs() < 1e-15);
        assert_eq!(w[1], 0.0);
        assert_eq!(w[2], 0.0);
    }

    #[test]
    fn nominal_problem_has_no_worst_disturbance() {
        let p = sine_problem(1, Matrix::identity(1));
        assert!(matches!(
            p.worst_disturbance(&Vector::zeros(1)),
            Err(DesignError::NominalMode)
        ));
    }

    #[test]
    fn running_cost_at_saddle_point() {
        // L(x, u*) = q + ‖u*‖² = 0.625 + 0.125 = 0.75 at π/4.
        let p = sine_problem(1, Matrix::identity(1));
        let x = Vector::from_f64s(&[FRAC_PI_4]);
        let u = p.optimal_control(&x).unwrap();
        let l = p.running_cost(&x, &u, None).unwrap();
        assert!((l - 0.75).abs() < 1e-14);
    }

    #[test]
    fn hjb_residual_vanishes() {
        let p = sine_problem(1, Matrix::identity(1));
        let r = p.hjb_residual(&Vector::from_f64s(&[FRAC_PI_4])).unwrap();
        assert!(r.abs() < 1e-12, "residual {r}");
        assert_eq!(p.hjb_residual(&Vector::zeros(1)).unwrap(), 0.0);
    }

    #[test]
    fn oscillator_residual_near_perturbed_equilibrium() {
        let (net, _) = OscillatorNetwork::with_steady_state_from(
            incidence_matrix::<f64>(&[(1, 2), (2, 3), (1, 3)], 3).unwrap(),
            Matrix::identity(3),
            Matrix::scaled_identity(3, 0.01),
            Matrix::scaled_identity(3, 0.1),
            Vector::zeros(3),
            &Vector::from_f64s(&[0.02, -0.005, 0.015]),
        )
        .unwrap();
        let p = DesignedProblem::new(
            model::oscillator(&net).unwrap(),
            clf::oscillator(&net),
            PenaltyConfig::nominal(Matrix::scaled_identity(3, 0.1)).unwrap(),
        )
        .unwrap();
        let x = &(net.delta_s().stack(&Vector::zeros(3)))
            + &Vector::from_f64s(&[0.05, 0.05, 0.05, 0.1, 0.1, 0.1]);
        let res = p.hjb_residual(&x).unwrap();
        assert!(res.abs() < 1e-10, "residual {res}");
    }

    #[test]
    fn domain_violation_is_reported() {
        let p = sine_problem(1, Matrix::identity(1));
        assert!(matches!(
            p.optimal_control(&Vector::from_f64s(&[2.0])),
            Err(DesignError::DomainViolation)
        ));
    }

    #[test]
    fn cost_forms_agree() {
        let p = robust_scalar_problem();
        for x in model::sample_domain(p.model(), 128, 3) {
            let defining = p.cost_raw(&x);
            let quadratic = p.designed_cost_gradient_form(&x);
            assert!(
                (defining - quadratic).abs() <= 1e-11 * (1.0 + defining.abs()),
                "x = {x:?}"
            );
        }
    }

    #[test]
    fn sine_admissibility_passes_for_any_pd_r() {
        for r in [0.25, 1.0, 4.0] {
            let p = sine_problem(2, Matrix::scaled_identity(2, r));
            let report = p.admissibility_check(1024, 42);
            assert!(report.pass, "R = {r}: min q = {}", report.min_cost);
        }
    }

    #[test]
    fn retune_shrinking_r_grows_cost_pointwise() {
        let p = sine_problem(1, Matrix::identity(1));
        let retuned = p.retune(Matrix::scaled_identity(1, 0.5), None).unwrap();
        assert!(retuned.loewner_r_ok);
        assert!(retuned.warnings.is_empty());
        assert!(retuned.admissibility.pass);
        for x in model::sample_domain(p.model(), 256, 5) {
            let before = p.cost_raw(&x);
            let after = retuned.problem.cost_raw(&x);
            assert!(after >= before - 1e-12);
            // u* gain doubles when R halves.
            let u_before = p.control_raw(&x);
            let u_after = retuned.problem.control_raw(&x);
            assert!((u_after[0] - 2.0 * u_before[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn retune_identity_keeps_problem() {
        let p = sine_problem(1, Matrix::identity(1));
        let retuned = p.retune(Matrix::identity(1), None).unwrap();
        assert!(retuned.loewner_r_ok);
        for x in model::sample_domain(p.model(), 64, 6) {
            assert_eq!(p.cost_raw(&x), retuned.problem.cost_raw(&x));
        }
    }

    #[test]
    fn retune_growing_r_warns_but_sine_stays_admissible() {
        let p = sine_problem(1, Matrix::identity(1));
        let retuned = p.retune(Matrix::scaled_identity(1, 2.0), None).unwrap();
        assert!(!retuned.loewner_r_ok);
        assert_eq!(retuned.warnings.len(), 1);
        assert!(retuned.admissibility.pass);
    }

    #[test]
    fn retune_rejects_indefinite_r() {
        let p = sine_problem(2, Matrix::identity(2));
        assert!(matches!(
            p.retune(Matrix::from_f64_rows(&[&[1.0, 2.0], &[2.0, 1.0]]), None),
            Err(DesignError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn saddle_point_structure_on_samples() {
        use rand::{Rng, SeedableRng};
        let p = robust_scalar_problem();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for x in model::sample_domain(p.model(), 64, 23) {
            let u_star = p.control_raw(&x);
            let w_star = p.disturbance_raw(&x).unwrap();
            let bracket = |u: &Vector<f64>, w: &Vector<f64>| {
                p.running_cost_raw(&x, u, Some(w))
                    + p.clf.gradient(&x).dot(&p.model.rhs(&x, u, Some(w)))
            };
            let at_saddle = bracket(&u_star, &w_star);
            for _ in 0..8 {
                let u = Vector::from_f64s(&[rng.gen_range(-2.0..2.0)]);
                let w = Vector::from_f64s(&[rng.gen_range(-2.0..2.0)]);
                assert!(bracket(&u, &w_star) >= at_saddle - 1e-12);
                assert!(bracket(&u_star, &w) <= at_saddle + 1e-12);
            }
        }
    }
}
