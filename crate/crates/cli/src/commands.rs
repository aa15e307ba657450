//! The four subcommands. Exit codes: 0 success (and verification pass),
//! 1 verification failure, 2 configuration error, 3 runtime/numerical error.

use std::path::Path;
use std::sync::Mutex;

use invopt_core::design::linear_q;
use invopt_core::design::RobustLinearPenalty;
use invopt_core::numerics::Matrix;
use invopt_core::sim::{accumulated_cost, settling_time, simulate, Termination};
use invopt_core::verify::{
    scan_states, verify_problem, verify_residual_grid_with_cost, VerificationReport, VerifyConfig,
};

use crate::output::{self, SweepRow};
use crate::scenario::{self, Overrides, Scenario, ScenarioError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub enum Command {
    Design,
    Verify { paper_literal: bool },
    Simulate,
    Sweep,
}

pub fn run(command: Command, scenario_path: &Path, overrides: Overrides) -> i32 {
    let scenario = match scenario::load(scenario_path, &overrides) {
        Ok(s) => s,
        Err(e @ (ScenarioError::Parse(_) | ScenarioError::Config(_) | ScenarioError::Io(_))) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    for warning in &scenario.warnings {
        eprintln!("warning: {warning}");
    }
    let echo = serde_json::to_string_pretty(&scenario.effective).expect("effective scenario");
    if let Err(e) = output::write_file(&scenario.out_dir, "effective_scenario.json", &echo) {
        eprintln!("error: cannot write outputs: {e}");
        return EXIT_RUNTIME;
    }

    match command {
        Command::Design => design(&scenario),
        Command::Verify { paper_literal } => verify(&scenario, paper_literal),
        Command::Simulate => simulate_cmd(&scenario),
        Command::Sweep => sweep(&scenario),
    }
}

fn design(scenario: &Scenario) -> i32 {
    let problem = &scenario.problem;
    let robust = problem.penalties().robust_part();

    let linear_q_value = match (&scenario.linear_parts, &scenario.quadratic_p) {
        (Some((a, b, bbar)), Some(p)) => {
            let robust_part = match (bbar, robust) {
                (Some(bbar), Some((s, xi))) => Some(RobustLinearPenalty { bbar, s, xi }),
                _ => None,
            };
            match linear_q(a, b, p, problem.penalties().r(), robust_part) {
                Ok(q) => Some(serde_json::json!({
                    "derived": q.derived,
                    "paperLiteral": q.paper_literal,
                })),
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_RUNTIME;
                }
            }
        }
        _ => None,
    };

    let closed_forms = scenario.network.as_ref().map(|net| {
        invopt_core::design::oscillator_closed_forms(net, problem.penalties().r(), robust).map(
            |forms| {
                serde_json::json!({
                    "sinWeight": forms.sin_weight(),
                    "omegaWeight": forms.omega_weight(),
                    "controlGain": forms.control_gain(),
                    "deltaS": net.delta_s(),
                })
            },
        )
    });
    let closed_forms = match closed_forms {
        None => None,
        Some(Ok(v)) => Some(v),
        Some(Err(e)) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };

    // Coarse deterministic scan of q, u*, w* over the domain.
    let sample_cfg = VerifyConfig {
        points_per_axis: 5,
        sample_count: 64,
        ..scenario.verify_cfg.clone()
    };
    let samples: Vec<serde_json::Value> = scan_states(problem, &sample_cfg)
        .into_iter()
        .take(64)
        .map(|x| {
            let u = problem.optimal_control(&x).ok();
            let w = problem.worst_disturbance(&x).ok();
            let q = problem.designed_cost(&x).ok();
            let v = problem.clf().value(&x);
            serde_json::json!({ "x": x, "u": u, "w": w, "q": q, "V": v })
        })
        .collect();

    let doc = serde_json::json!({
        "scenario": scenario.effective,
        "mode": if problem.is_robust() { "robust" } else { "nominal" },
        "linearQ": linear_q_value,
        "oscillatorClosedForms": closed_forms,
        "samples": samples,
    });
    let text = serde_json::to_string_pretty(&doc).expect("design document");
    if let Err(e) = output::write_file(&scenario.out_dir, "design.json", &text) {
        eprintln!("error: cannot write design.json: {e}");
        return EXIT_RUNTIME;
    }
    println!("design written to {}", scenario.out_dir.join("design.json").display());
    EXIT_OK
}

fn verify(scenario: &Scenario, paper_literal: bool) -> i32 {
    let mut report = verify_problem(
        &scenario.problem,
        scenario.network.as_ref(),
        &scenario.verify_cfg,
    );

    if paper_literal {
        let (Some((a, b, bbar)), Some(p)) = (&scenario.linear_parts, &scenario.quadratic_p)
        else {
            eprintln!("error: --paper-literal applies to linear models with a quadratic CLF");
            return EXIT_CONFIG;
        };
        let robust_part = match (bbar, scenario.problem.penalties().robust_part()) {
            (Some(bbar), Some((s, xi))) => Some(RobustLinearPenalty { bbar, s, xi }),
            _ => None,
        };
        let q = match linear_q(a, b, p, scenario.problem.penalties().r(), robust_part) {
            Ok(q) => q,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_RUNTIME;
            }
        };
        let mut entry =
            verify_residual_grid_with_cost(&scenario.problem, &q.paper_literal, &scenario.verify_cfg);
        entry.name = "hjb_residual_grid[paper_literal_Q]".into();
        entry.note = Some(
            "state cost taken as the printed matrix with the unhalved drift term \
             -(A^T P + P A); the residual gap below is the documented discrepancy"
                .into(),
        );
        report = VerificationReport::from_checks(
            report.checks.into_iter().chain([entry]).collect(),
        );
    }

    let text = render_report(scenario, &report);
    print!("{text}");
    let mut write_result = output::write_file(&scenario.out_dir, "report.txt", &text);
    if scenario.wants("json") {
        let json = serde_json::to_string_pretty(&report).expect("report");
        write_result =
            write_result.and_then(|()| output::write_file(&scenario.out_dir, "report.json", &json));
    }
    if let Err(e) = write_result {
        eprintln!("error: cannot write report: {e}");
        return EXIT_RUNTIME;
    }
    if report.overall_pass {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    }
}

fn render_report(scenario: &Scenario, report: &VerificationReport<f64>) -> String {
    let mut out = format!(
        "scenario: {}\noverall: {}\n",
        scenario.name,
        if report.overall_pass { "PASS" } else { "FAIL" }
    );
    for check in &report.checks {
        let mut line = format!(
            "[{}] {:<40} measured {: >12.5e}  tolerance {: >12.5e}",
            if check.pass { "PASS" } else { "FAIL" },
            check.name,
            check.measured,
            check.tolerance
        );
        if let Some(witness) = &check.witness {
            if !check.pass {
                line.push_str(&format!("  witness {:?}", witness.to_f64s()));
            }
        }
        if let Some(note) = &check.note {
            line.push_str(&format!("  ({note})"));
        }
        line.push('\n');
        out.push_str(&line);
    }
    out
}

fn simulate_cmd(scenario: &Scenario) -> i32 {
    let run = match simulate(
        &scenario.problem,
        &scenario.x0,
        scenario.horizon,
        scenario.step,
        &scenario.signal,
    ) {
        Ok(run) => run,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    match &run.termination {
        Termination::Completed => {}
        Termination::DomainExit { time, .. } => {
            eprintln!(
                "warning: trajectory left the model domain at t = {time:.4}; \
                 writing the partial trajectory"
            );
        }
    }
    if scenario.wants("csv") {
        let csv = output::trajectory_csv(scenario, &run.trajectory);
        if let Err(e) = output::write_file(&scenario.out_dir, "trajectory.csv", &csv) {
            eprintln!("error: cannot write trajectory.csv: {e}");
            return EXIT_RUNTIME;
        }
        println!("trajectory written to {}", scenario.out_dir.join("trajectory.csv").display());
    }
    let final_state = run.trajectory.states.last().expect("nonempty trajectory");
    println!(
        "simulated {} steps; final |x - x*|_inf = {:.3e}, accumulated cost = {:.6e}",
        run.trajectory.len() - 1,
        (final_state - scenario.problem.model().equilibrium()).norm_inf(),
        run.trajectory.running_cost.last().expect("nonempty"),
    );
    EXIT_OK
}

fn sweep(scenario: &Scenario) -> i32 {
    // Members: the scenario's own R, then every retuning candidate.
    let mut members: Vec<(String, Matrix<f64>, Option<Matrix<f64>>)> = vec![(
        "base".into(),
        scenario.problem.penalties().r().clone(),
        scenario.problem.penalties().robust_part().map(|(s, _)| s.clone()),
    )];
    for (i, (r, s)) in scenario.verify_cfg.retune_candidates.iter().enumerate() {
        members.push((format!("retune{i}"), r.clone(), s.clone()));
    }

    let workers = std::env::var("INVOPT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
        .min(members.len());

    type MemberOutcome = Result<(SweepRow, String), String>;
    let results: Mutex<Vec<Option<MemberOutcome>>> = Mutex::new(vec![None; members.len()]);
    std::thread::scope(|scope| {
        for worker in 0..workers {
            let members = &members;
            let results = &results;
            scope.spawn(move || {
                for index in (worker..members.len()).step_by(workers) {
                    let outcome = run_sweep_member(scenario, &members[index]);
                    results.lock().expect("sweep results lock")[index] = Some(outcome);
                }
            });
        }
    });

    let mut rows = Vec::with_capacity(members.len());
    for (index, slot) in results.into_inner().expect("sweep results").into_iter().enumerate() {
        match slot.expect("every member ran") {
            Ok((row, csv)) => {
                let file = format!("trajectory_{}.csv", members[index].0);
                if let Err(e) = output::write_file(&scenario.out_dir, &file, &csv) {
                    eprintln!("error: cannot write {file}: {e}");
                    return EXIT_RUNTIME;
                }
                rows.push(row);
            }
            Err(msg) => {
                eprintln!("error: sweep member {}: {msg}", members[index].0);
                return EXIT_RUNTIME;
            }
        }
    }

    let csv = output::sweep_csv(&rows);
    print!("{csv}");
    if let Err(e) = output::write_file(&scenario.out_dir, "sweep.csv", &csv) {
        eprintln!("error: cannot write sweep.csv: {e}");
        return EXIT_RUNTIME;
    }
    EXIT_OK
}

fn run_sweep_member(
    scenario: &Scenario,
    (label, r, s): &(String, Matrix<f64>, Option<Matrix<f64>>),
) -> Result<(SweepRow, String), String> {
    let retuned;
    let problem = if label == "base" {
        &scenario.problem
    } else {
        retuned = scenario
            .problem
            .retune(r.clone(), s.clone())
            .map_err(|e| e.to_string())?;
        &retuned.problem
    };
    let run = simulate(problem, &scenario.x0, scenario.horizon, scenario.step, &scenario.signal)
        .map_err(|e| e.to_string())?;
    let settle = settling_time(
        &run.trajectory,
        &scenario.settling_selector,
        scenario.settling_threshold,
    )
    .map_err(|e| e.to_string())?;
    let cost = accumulated_cost(&run.trajectory).map_err(|e| e.to_string())?;
    // Retuning keeps dimensions and mode, so the original scenario's column
    // labels apply to every member.
    let csv = output::trajectory_csv(scenario, &run.trajectory);
    Ok((
        SweepRow {
            label: label.clone(),
            settling_time: settle,
            accumulated_cost: cost,
            completed: run.completed(),
        },
        csv,
    ))
}
