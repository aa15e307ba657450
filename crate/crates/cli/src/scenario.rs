//! Scenario files: JSON schema, defaulting, matrix shorthand, and assembly
//! of the core objects (model, CLF, penalties, verification config).

use std::path::{Path, PathBuf};

use serde::Deserialize;

use invopt_core::clf;
use invopt_core::design::{DesignedProblem, PenaltyConfig};
use invopt_core::model::{self, incidence_matrix, OscillatorNetwork};
use invopt_core::numerics::{Matrix, Vector};
use invopt_core::sim::DisturbanceSignal;
use invopt_core::verify::VerifyConfig;
use invopt_core::{Matrix64, Problem64, Vector64};

#[derive(Debug)]
pub enum ScenarioError {
    Io(String),
    Parse(String),
    Config(String),
}

impl std::fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Io(msg) => write!(f, "cannot read scenario: {msg}"),
            Self::Parse(msg) => write!(f, "malformed scenario: {msg}"),
            Self::Config(msg) => write!(f, "invalid scenario: {msg}"),
        }
    }
}

fn config(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Config(msg.into())
}

/// A matrix entry: nested rows, a bare scalar (1x1), or the scaled-identity
/// shorthand "0.1*I(3)" / "I(3)".
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Shorthand(String),
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

impl MatrixSpec {
    pub fn resolve(&self, expected_dim: Option<usize>, what: &str) -> Result<Matrix64, ScenarioError> {
        let m = match self {
            MatrixSpec::Scalar(v) => Matrix::from_rows(&[vec![*v]])
                .map_err(|e| config(format!("{what}: {e}")))?,
            MatrixSpec::Rows(rows) => Matrix::from_rows(rows)
                .map_err(|e| config(format!("{what}: {e}")))?,
            MatrixSpec::Shorthand(text) => {
                let (scale, dim) = parse_scaled_identity(text)
                    .ok_or_else(|| config(format!("{what}: cannot parse shorthand {text:?}")))?;
                let dim = match (dim, expected_dim) {
                    (Some(d), Some(e)) if d != e => {
                        return Err(config(format!("{what}: shorthand is {d}-dimensional, expected {e}")))
                    }
                    (Some(d), _) => d,
                    (None, Some(e)) => e,
                    (None, None) => {
                        return Err(config(format!("{what}: shorthand {text:?} needs an explicit dimension")))
                    }
                };
                Matrix::scaled_identity(dim, scale)
            }
        };
        if let Some(e) = expected_dim {
            if m.rows() != e || m.cols() != e {
                return Err(config(format!(
                    "{what}: matrix is {}x{}, expected {e}x{e}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        Ok(m)
    }
}

/// "0.1*I(3)", "I(3)", "2 * I(2)"; the dimension may be omitted ("0.5*I")
/// when the context fixes it.
fn parse_scaled_identity(text: &str) -> Option<(f64, Option<usize>)> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let (scale_part, ident_part) = match compact.split_once('*') {
        Some((s, i)) => (Some(s), i),
        None => (None, compact.as_str()),
    };
    let scale = match scale_part {
        Some(s) => s.parse::<f64>().ok()?,
        None => 1.0,
    };
    let rest = ident_part.strip_prefix('I')?;
    if rest.is_empty() {
        return Some((scale, None));
    }
    let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
    let dim = inner.parse::<usize>().ok()?;
    Some((scale, Some(dim)))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ModelSection {
    kind: String,
    n: Option<usize>,
    #[serde(rename = "A")]
    a: Option<MatrixSpec>,
    #[serde(rename = "B")]
    b: Option<MatrixSpec>,
    #[serde(rename = "Bbar")]
    bbar: Option<MatrixSpec>,
    edges: Option<Vec<(usize, usize)>>,
    coupling: Option<MatrixSpec>,
    inertia: Option<MatrixSpec>,
    damping: Option<MatrixSpec>,
    theta_star: Option<Vec<f64>>,
    theta0: Option<Vec<f64>>,
    delta0: Option<Vec<f64>>,
    omega0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ClfSection {
    kind: Option<String>,
    #[serde(rename = "P")]
    p: Option<MatrixSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct PenaltySection {
    mode: Option<String>,
    #[serde(rename = "R")]
    r: MatrixSpec,
    #[serde(rename = "S")]
    s: Option<MatrixSpec>,
    xi: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct DisturbanceSpec {
    kind: Option<String>,
    value: Option<Vec<f64>>,
    amplitude: Option<f64>,
    seed: Option<u64>,
    hold: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct SettlingSpec {
    components: Option<serde_json::Value>,
    threshold: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct SimulationSection {
    #[serde(rename = "T")]
    t: Option<f64>,
    h: Option<f64>,
    x0: Option<Vec<f64>>,
    disturbance: Option<DisturbanceSpec>,
    settling: Option<SettlingSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RetuneSpec {
    #[serde(rename = "R")]
    r: MatrixSpec,
    #[serde(rename = "S")]
    s: Option<MatrixSpec>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct VerificationSection {
    residual_tol: Option<f64>,
    gradient_tol: Option<f64>,
    value_tol: Option<f64>,
    sample_count: Option<usize>,
    points_per_axis: Option<usize>,
    seed: Option<u64>,
    retune: Option<Vec<RetuneSpec>>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct OutputSection {
    directory: Option<String>,
    formats: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ScenarioFile {
    model: ModelSection,
    #[serde(default)]
    clf: ClfSection,
    penalties: PenaltySection,
    #[serde(default)]
    simulation: SimulationSection,
    #[serde(default)]
    verification: VerificationSection,
    #[serde(default)]
    output: OutputSection,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
}

/// Fully resolved scenario with core objects built and defaults applied.
pub struct Scenario {
    pub name: String,
    pub problem: Problem64,
    pub network: Option<OscillatorNetwork<f64>>,
    /// For linear models: (A, B, Bbar).
    pub linear_parts: Option<(Matrix64, Matrix64, Option<Matrix64>)>,
    /// For quadratic CLFs: P.
    pub quadratic_p: Option<Matrix64>,
    pub x0: Vector64,
    pub horizon: f64,
    pub step: f64,
    pub signal: DisturbanceSignal<f64>,
    pub verify_cfg: VerifyConfig<f64>,
    pub settling_selector: Vec<usize>,
    pub settling_threshold: f64,
    pub out_dir: PathBuf,
    pub formats: Vec<String>,
    pub warnings: Vec<String>,
    /// The scenario with every default filled in, echoed to the output dir.
    pub effective: serde_json::Value,
}

impl Scenario {
    /// Whether the output section asks for this format ("csv" or "json").
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
    let file: ScenarioFile =
        serde_json::from_str(&text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    build(name, file, overrides)
}

fn build(name: String, file: ScenarioFile, overrides: &Overrides) -> Result<Scenario, ScenarioError> {
    let mut warnings = Vec::new();

    // --- model ---
    let mut network = None;
    let mut linear_parts = None;
    let mut oscillator_x0 = None;
    let (model, default_clf_kind): (_, &str) = match file.model.kind.as_str() {
        "sine" => {
            let n = file.model.n.ok_or_else(|| config("sine model requires n"))?;
            (model::sine(n), "cosine")
        }
        "integrator" => {
            let n = file.model.n.ok_or_else(|| config("integrator model requires n"))?;
            (model::integrator(n), "quadratic")
        }
        "linear" => {
            let a = file
                .model
                .a
                .as_ref()
                .ok_or_else(|| config("linear model requires A"))?
                .resolve(None, "model.A")?;
            let n = a.rows();
            let b_spec = file.model.b.as_ref().ok_or_else(|| config("linear model requires B"))?;
            let b = match b_spec {
                MatrixSpec::Rows(rows) => Matrix::from_rows(rows)
                    .map_err(|e| config(format!("model.B: {e}")))?,
                _ => b_spec.resolve(Some(n), "model.B")?,
            };
            let bbar = match &file.model.bbar {
                None => None,
                Some(MatrixSpec::Rows(rows)) => Some(
                    Matrix::from_rows(rows).map_err(|e| config(format!("model.Bbar: {e}")))?,
                ),
                Some(spec) => Some(spec.resolve(Some(n), "model.Bbar")?),
            };
            let m = model::linear(a.clone(), b.clone(), bbar.clone())
                .map_err(|e| config(e.to_string()))?;
            linear_parts = Some((a, b, bbar));
            (m, "quadratic")
        }
        "oscillator" => {
            let edges = file
                .model
                .edges
                .as_ref()
                .ok_or_else(|| config("oscillator model requires edges"))?;
            let n_nodes = edges
                .iter()
                .flat_map(|&(a, b)| [a, b])
                .max()
                .ok_or_else(|| config("oscillator model requires at least one edge"))?;
            let m_edges = edges.len();
            let incidence = incidence_matrix(edges, n_nodes).map_err(|e| config(e.to_string()))?;
            let coupling = file
                .model
                .coupling
                .as_ref()
                .map(|s| s.resolve(Some(m_edges), "model.coupling"))
                .transpose()?
                .unwrap_or_else(|| Matrix::identity(m_edges));
            let inertia = file
                .model
                .inertia
                .as_ref()
                .map(|s| s.resolve(Some(n_nodes), "model.inertia"))
                .transpose()?
                .unwrap_or_else(|| Matrix::identity(n_nodes));
            let damping = file
                .model
                .damping
                .as_ref()
                .map(|s| s.resolve(Some(n_nodes), "model.damping"))
                .transpose()?
                .unwrap_or_else(|| Matrix::identity(n_nodes));
            let theta_star = file.model.theta_star.clone().unwrap_or_else(|| vec![0.0; n_nodes]);
            if theta_star.len() != n_nodes {
                return Err(config(format!(
                    "thetaStar has length {}, expected {n_nodes}",
                    theta_star.len()
                )));
            }
            let delta_star = incidence.transpose().mul_vec(&Vector::from_f64s(&theta_star));

            let delta0 = match (&file.model.theta0, &file.model.delta0) {
                (Some(theta0), None) => {
                    if theta0.len() != n_nodes {
                        return Err(config(format!(
                            "theta0 has length {}, expected {n_nodes}",
                            theta0.len()
                        )));
                    }
                    incidence.transpose().mul_vec(&Vector::from_f64s(theta0))
                }
                (None, Some(delta0)) => {
                    if delta0.len() != m_edges {
                        return Err(config(format!(
                            "delta0 has length {}, expected {m_edges}",
                            delta0.len()
                        )));
                    }
                    Vector::from_f64s(delta0)
                }
                (Some(_), Some(_)) => {
                    return Err(config("specify either theta0 or delta0, not both"))
                }
                (None, None) => delta_star.clone(),
            };

            let (net, steady) = OscillatorNetwork::with_steady_state_from(
                incidence, coupling, inertia, damping, delta_star, &delta0,
            )
            .map_err(|e| config(e.to_string()))?;
            if steady.initial_image_residual > 1e-8 {
                warnings.push(format!(
                    "delta0 is {:.3e} away from Im(B^T); no node-angle vector realizes it. \
                     The conserved off-image component is kept, not projected out.",
                    steady.initial_image_residual
                ));
            }
            let omega0 = file.model.omega0.clone().unwrap_or_else(|| vec![0.0; n_nodes]);
            if omega0.len() != n_nodes {
                return Err(config(format!(
                    "omega0 has length {}, expected {n_nodes}",
                    omega0.len()
                )));
            }
            oscillator_x0 = Some(delta0.stack(&Vector::from_f64s(&omega0)));
            let m = model::oscillator(&net).map_err(|e| config(e.to_string()))?;
            network = Some(net);
            (m, "oscillator")
        }
        other => return Err(config(format!("unknown model kind {other:?}"))),
    };

    // --- CLF ---
    let clf_kind = file.clf.kind.clone().unwrap_or_else(|| default_clf_kind.to_string());
    let mut quadratic_p = None;
    let clf = match clf_kind.as_str() {
        "cosine" => clf::cosine(model.state_dim()),
        "quadratic" => {
            let p = file
                .clf
                .p
                .as_ref()
                .map(|s| s.resolve(Some(model.state_dim()), "clf.P"))
                .transpose()?
                .unwrap_or_else(|| Matrix::identity(model.state_dim()));
            quadratic_p = Some(p.clone());
            clf::quadratic(p).map_err(|e| config(e.to_string()))?
        }
        "oscillator" => {
            let net = network
                .as_ref()
                .ok_or_else(|| config("oscillator CLF requires an oscillator model"))?;
            clf::oscillator(net)
        }
        other => return Err(config(format!("unknown CLF kind {other:?}"))),
    };

    // --- penalties ---
    let m_dim = model.input_dim();
    let r = file.penalties.r.resolve(Some(m_dim), "penalties.R")?;
    let robust_requested = match file.penalties.mode.as_deref() {
        Some("robust") => true,
        Some("nominal") => false,
        Some(other) => return Err(config(format!("unknown penalties.mode {other:?}"))),
        None => file.penalties.s.is_some() || file.penalties.xi.is_some(),
    };
    let penalties = if robust_requested {
        let s = file
            .penalties
            .s
            .as_ref()
            .ok_or_else(|| config("robust mode requires penalties.S"))?
            .resolve(Some(model.disturbance_dim()), "penalties.S")?;
        let xi = file.penalties.xi.ok_or_else(|| config("robust mode requires penalties.xi"))?;
        PenaltyConfig::robust(r.clone(), s, xi).map_err(|e| config(e.to_string()))?
    } else {
        if file.penalties.s.is_some() || file.penalties.xi.is_some() {
            return Err(config("nominal mode must not carry S or xi"));
        }
        PenaltyConfig::nominal(r.clone()).map_err(|e| config(e.to_string()))?
    };

    let problem =
        DesignedProblem::new(model, clf, penalties).map_err(|e| config(e.to_string()))?;

    // --- simulation ---
    let horizon = overrides.horizon.or(file.simulation.t).unwrap_or(20.0);
    let step = overrides.step.or(file.simulation.h).unwrap_or(1e-3);
    if step <= 0.0 || horizon < step {
        return Err(config("simulation requires h > 0 and T >= h"));
    }
    let x0 = match oscillator_x0 {
        Some(x0) => {
            if file.simulation.x0.is_some() {
                return Err(config("oscillator scenarios set theta0/delta0/omega0, not simulation.x0"));
            }
            x0
        }
        None => match &file.simulation.x0 {
            Some(values) => {
                if values.len() != problem.model().state_dim() {
                    return Err(config(format!(
                        "x0 has length {}, expected {}",
                        values.len(),
                        problem.model().state_dim()
                    )));
                }
                Vector::from_f64s(values)
            }
            None => problem.model().equilibrium().clone(),
        },
    };
    if !problem.model().domain().contains(&x0) {
        return Err(config("x0 is outside the model domain"));
    }

    let disturbance = file.simulation.disturbance.clone().unwrap_or_default();
    let signal = match disturbance.kind.as_deref().unwrap_or("zero") {
        "zero" => DisturbanceSignal::Zero,
        "constant" => {
            let value = disturbance
                .value
                .as_ref()
                .ok_or_else(|| config("constant disturbance requires value"))?;
            if value.len() != problem.model().disturbance_dim() {
                return Err(config(format!(
                    "disturbance value has length {}, expected {}",
                    value.len(),
                    problem.model().disturbance_dim()
                )));
            }
            DisturbanceSignal::Constant(Vector::from_f64s(value))
        }
        "seededRandom" => DisturbanceSignal::SeededRandom {
            amplitude: disturbance.amplitude.unwrap_or(0.05),
            seed: disturbance.seed.unwrap_or(7),
            hold: disturbance.hold.unwrap_or(0.1),
        },
        "worstCase" => {
            if !problem.is_robust() {
                return Err(config("worstCase disturbance requires robust mode"));
            }
            DisturbanceSignal::WorstCase
        }
        other => return Err(config(format!("unknown disturbance kind {other:?}"))),
    };

    // --- settling ---
    let settling = file.simulation.settling.clone().unwrap_or_default();
    let settling_threshold = settling.threshold.unwrap_or(1e-3);
    let settling_selector = match &settling.components {
        None => (0..problem.model().state_dim()).collect(),
        Some(serde_json::Value::String(s)) if s == "all" => {
            (0..problem.model().state_dim()).collect()
        }
        Some(serde_json::Value::String(s)) if s == "omega" => {
            let net = network
                .as_ref()
                .ok_or_else(|| config("settling.components = \"omega\" needs an oscillator model"))?;
            (net.edge_count()..net.edge_count() + net.node_count()).collect()
        }
        Some(serde_json::Value::Array(indices)) => indices
            .iter()
            .map(|v| {
                v.as_u64()
                    .map(|u| u as usize)
                    .filter(|&i| i < problem.model().state_dim())
                    .ok_or_else(|| config("settling.components indices out of range"))
            })
            .collect::<Result<Vec<_>, _>>()?,
        Some(other) => {
            return Err(config(format!("settling.components must be \"all\", \"omega\", or indices, found {other}")))
        }
    };

    // --- verification ---
    let seed = overrides.seed.or(file.verification.seed).unwrap_or(42);
    let mut retune_candidates = Vec::new();
    for (i, spec) in file.verification.retune.iter().flatten().enumerate() {
        let r_prime = spec.r.resolve(Some(m_dim), &format!("verification.retune[{i}].R"))?;
        let s_prime = spec
            .s
            .as_ref()
            .map(|s| {
                s.resolve(
                    Some(problem.model().disturbance_dim()),
                    &format!("verification.retune[{i}].S"),
                )
            })
            .transpose()?;
        retune_candidates.push((r_prime, s_prime));
    }
    let verify_cfg = VerifyConfig {
        points_per_axis: file.verification.points_per_axis.unwrap_or(21),
        sample_count: file.verification.sample_count.unwrap_or(4096),
        seed,
        residual_tol: file.verification.residual_tol.unwrap_or(1e-9),
        gradient_tol: file.verification.gradient_tol.unwrap_or(1e-6),
        value_tol: file.verification.value_tol.unwrap_or(1e-4),
        horizon,
        step,
        x0: Some(x0.clone()),
        disturbance: signal.clone(),
        retune_candidates,
    };

    // --- output ---
    let out_dir = overrides
        .out_dir
        .clone()
        .or_else(|| file.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&name));
    let formats = file
        .output
        .formats
        .clone()
        .unwrap_or_else(|| vec!["csv".into(), "json".into()]);

    let effective = effective_json(&name, &file, &problem, horizon, step, seed, &x0, &out_dir);

    Ok(Scenario {
        name,
        problem,
        network,
        linear_parts,
        quadratic_p,
        x0,
        horizon,
        step,
        signal,
        verify_cfg,
        settling_selector,
        settling_threshold,
        out_dir,
        formats,
        warnings,
        effective,
    })
}

#[allow(clippy::too_many_arguments)]
fn effective_json(
    name: &str,
    file: &ScenarioFile,
    problem: &Problem64,
    horizon: f64,
    step: f64,
    seed: u64,
    x0: &Vector64,
    out_dir: &Path,
) -> serde_json::Value {
    let disturbance = file.simulation.disturbance.clone().unwrap_or_default();
    serde_json::json!({
        "name": name,
        "model": {
            "kind": file.model.kind,
            "stateDim": problem.model().state_dim(),
            "inputDim": problem.model().input_dim(),
            "disturbanceDim": problem.model().disturbance_dim(),
            "equilibrium": problem.model().equilibrium(),
        },
        "clf": { "kind": problem.clf().name() },
        "penalties": {
            "mode": if problem.is_robust() { "robust" } else { "nominal" },
            "R": problem.penalties().r(),
            "S": problem.penalties().robust_part().map(|(s, _)| s.clone()),
            "xi": problem.penalties().robust_part().map(|(_, xi)| xi),
        },
        "simulation": {
            "T": horizon,
            "h": step,
            "x0": x0,
            "disturbance": {
                "kind": disturbance.kind.as_deref().unwrap_or("zero"),
                "value": disturbance.value,
                "amplitude": disturbance.amplitude,
                "seed": disturbance.seed,
                "hold": disturbance.hold,
            },
        },
        "verification": {
            "seed": seed,
            "sampleCount": file.verification.sample_count.unwrap_or(4096),
            "pointsPerAxis": file.verification.points_per_axis.unwrap_or(21),
            "residualTol": file.verification.residual_tol.unwrap_or(1e-9),
            "gradientTol": file.verification.gradient_tol.unwrap_or(1e-6),
            "valueTol": file.verification.value_tol.unwrap_or(1e-4),
            "retuneCandidates": file.verification.retune.as_ref().map_or(0, Vec::len),
        },
        "output": {
            "directory": out_dir.display().to_string(),
            "formats": file.output.formats.clone().unwrap_or_else(|| vec!["csv".into(), "json".into()]),
        },
    })
}
