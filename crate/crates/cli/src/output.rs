//! CSV and JSON writers. CSV floats carry 17 significant digits so that
//! re-runs of the same scenario and seed are byte-identical.

use std::path::Path;

use invopt_core::sim::Trajectory;
use invopt_core::Problem64;

use crate::scenario::Scenario;

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Column labels: the oscillator exposes delta/omega names, everything else
/// plain x_i; disturbance columns appear only in robust mode.
pub fn trajectory_header(scenario: &Scenario) -> Vec<String> {
    let problem: &Problem64 = &scenario.problem;
    let mut cols = vec!["t".to_string()];
    match &scenario.network {
        Some(net) => {
            for e in 1..=net.edge_count() {
                cols.push(format!("delta_{e}"));
            }
            for i in 1..=net.node_count() {
                cols.push(format!("omega_{i}"));
            }
        }
        None => {
            for i in 1..=problem.model().state_dim() {
                cols.push(format!("x_{i}"));
            }
        }
    }
    for i in 1..=problem.model().input_dim() {
        cols.push(format!("u_{i}"));
    }
    if problem.is_robust() {
        for i in 1..=problem.model().disturbance_dim() {
            cols.push(format!("w_{i}"));
        }
    }
    cols.extend(["V", "q", "L", "J_running"].map(String::from));
    cols
}

pub fn trajectory_csv(scenario: &Scenario, traj: &Trajectory<f64>) -> String {
    let robust = scenario.problem.is_robust();
    let mut out = trajectory_header(scenario).join(",");
    out.push('\n');
    for k in 0..traj.len() {
        let mut fields = vec![fmt_float(traj.times[k])];
        fields.extend(traj.states[k].iter().map(|&v| fmt_float(v)));
        fields.extend(traj.inputs[k].iter().map(|&v| fmt_float(v)));
        if robust {
            fields.extend(traj.disturbances[k].iter().map(|&v| fmt_float(v)));
        }
        fields.push(fmt_float(traj.v_values[k]));
        fields.push(fmt_float(traj.q_values[k]));
        fields.push(fmt_float(traj.l_values[k]));
        fields.push(fmt_float(traj.running_cost[k]));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Sweep summary: one row per penalty candidate.
#[derive(Clone)]
pub struct SweepRow {
    pub label: String,
    pub settling_time: Option<f64>,
    pub accumulated_cost: f64,
    pub completed: bool,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("label,settling_time,accumulated_cost,completed\n");
    for row in rows {
        let settle = row
            .settling_time
            .map_or_else(|| "never".to_string(), fmt_float);
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.label,
            settle,
            fmt_float(row.accumulated_cost),
            row.completed
        ));
    }
    out
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)
}
