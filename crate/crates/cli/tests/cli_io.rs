//! End-to-end checks of the binary: exit codes, output files, and
//! byte-reproducibility of the CSV artifacts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

fn out_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("invopt-cli-io").join(tag);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn invopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invopt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, extra_env: &[(&str, &str)], args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_invopt"));
    cmd.args(args).arg("--out").arg(dir);
    for (k, v) in extra_env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

#[test]
fn verify_passes_on_bundled_scenarios() {
    for name in ["example1_sine", "three_inverter_robust"] {
        let dir = out_dir(&format!("verify_{name}"));
        let out = run_in(&dir, &[], &["verify", scenario_path(name).to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{name}: {out:?}");
        assert!(dir.join("report.json").exists());
        assert!(dir.join("report.txt").exists());
        assert!(dir.join("effective_scenario.json").exists());
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains("overall: PASS"));
    }
}

#[test]
fn verify_exit_code_matches_overall_pass() {
    // ξ = 2.0 < 1/(4·0.1) breaks admissibility and the closed-form
    // precondition; the report must say FAIL and the exit code must be 1.
    let original = std::fs::read_to_string(scenario_path("three_inverter_robust")).unwrap();
    let weakened = original.replace("\"xi\": 2.8", "\"xi\": 2.0");
    assert_ne!(original, weakened);
    let dir = out_dir("verify_weak_xi");
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("weak_xi.json");
    std::fs::write(&file, weakened).unwrap();

    let out = run_in(&dir, &[], &["verify", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["overallPass"], serde_json::Value::Bool(false));
    let failing: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == serde_json::Value::Bool(false))
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(failing.contains(&"admissibility"), "failing: {failing:?}");
}

#[test]
fn config_errors_exit_2() {
    // Malformed JSON.
    let dir = out_dir("bad_json");
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("broken.json");
    std::fs::write(&file, "{ not json").unwrap();
    let out = invopt(&["verify", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Indefinite R: named in the error message.
    let file = dir.join("bad_r.json");
    std::fs::write(
        &file,
        r#"{
            "model": { "kind": "sine", "n": 2 },
            "penalties": { "R": [[1.0, 2.0], [2.0, 1.0]] }
        }"#,
    )
    .unwrap();
    let out = invopt(&["verify", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains('R'), "stderr: {err}");

    // Missing file.
    let out = invopt(&["verify", "/nonexistent/path.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn paper_literal_flag_documents_the_discrepancy() {
    let dir = out_dir("paper_literal");
    let out = run_in(
        &dir,
        &[],
        &["verify", scenario_path("example2_linear").to_str().unwrap(), "--paper-literal"],
    );
    // The literal form misses the identity, so verification fails overall.
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    let entry = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "hjb_residual_grid[paper_literal_Q]")
        .expect("literal entry present");
    assert_eq!(entry["pass"], serde_json::Value::Bool(false));
    assert!(entry["witness"].is_array());

    // On a non-linear scenario the flag is a configuration error.
    let dir = out_dir("paper_literal_misuse");
    let out = run_in(
        &dir,
        &[],
        &["verify", scenario_path("example1_sine").to_str().unwrap(), "--paper-literal"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_byte_identical_csv() {
    let dir_a = out_dir("sim_a");
    let dir_b = out_dir("sim_b");
    for dir in [&dir_a, &dir_b] {
        let out = run_in(dir, &[], &["simulate", scenario_path("three_inverter_robust").to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{out:?}");
    }
    let a = std::fs::read(dir_a.join("trajectory.csv")).unwrap();
    let b = std::fs::read(dir_b.join("trajectory.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "same scenario and seed must reproduce byte-identical CSV");
}

#[test]
fn trajectory_csv_has_the_documented_columns() {
    let dir = out_dir("sim_columns");
    let out = run_in(&dir, &[], &["simulate", scenario_path("three_inverter_robust").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "t,delta_1,delta_2,delta_3,omega_1,omega_2,omega_3,u_1,u_2,u_3,w_1,w_2,w_3,V,q,L,J_running"
    );
    // 17 significant digits everywhere.
    let row = csv.lines().nth(1).unwrap();
    for field in row.split(',') {
        assert!(field.contains('e'), "field {field} not in scientific form");
    }

    // Nominal scenarios have no w columns.
    let dir = out_dir("sim_columns_nominal");
    let out = run_in(&dir, &[], &["simulate", scenario_path("example1_sine").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,x_1,u_1,V,q,L,J_running");
}

#[test]
fn sweep_is_reproducible_across_thread_counts() {
    let dir_a = out_dir("sweep_1thread");
    let dir_b = out_dir("sweep_4threads");
    let scenario = scenario_path("three_inverter_nominal_R1");
    let out = run_in(&dir_a, &[("INVOPT_THREADS", "1")], &["sweep", scenario.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let out = run_in(&dir_b, &[("INVOPT_THREADS", "4")], &["sweep", scenario.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let a = std::fs::read(dir_a.join("sweep.csv")).unwrap();
    let b = std::fs::read(dir_b.join("sweep.csv")).unwrap();
    assert_eq!(a, b);

    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("label,settling_time,accumulated_cost,completed"));
    assert_eq!(text.lines().count(), 3, "base + one retune candidate");
}

#[test]
fn design_emits_both_q_forms_for_linear_scenarios() {
    let dir = out_dir("design_linear");
    let out = run_in(&dir, &[], &["design", scenario_path("example2_linear").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("design.json")).unwrap()).unwrap();
    // A = diag(−1, −2), B = P = R = I: derived = ¼I + diag(1, 2).
    assert_eq!(doc["linearQ"]["derived"][0][0], 1.25);
    assert_eq!(doc["linearQ"]["derived"][1][1], 2.25);
    assert_eq!(doc["linearQ"]["paperLiteral"][0][0], 2.25);
    assert_eq!(doc["linearQ"]["paperLiteral"][1][1], 4.25);
    assert!(doc["samples"].as_array().map_or(0, Vec::len) > 0);

    let dir = out_dir("design_oscillator");
    let out = run_in(&dir, &[], &["design", scenario_path("three_inverter_robust").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("design.json")).unwrap()).unwrap();
    // Closed forms: ¼ΞR⁻¹Ξ with R = 0.01 gives 25 on the diagonal, and the
    // ω-weight is D − S⁻¹/(4ξ) = 0.1 − 1/11.2.
    assert_eq!(doc["oscillatorClosedForms"]["sinWeight"][0][0], 25.0);
    let w = doc["oscillatorClosedForms"]["omegaWeight"][0][0].as_f64().unwrap();
    assert!((w - (0.1 - 1.0 / 11.2)).abs() < 1e-15);
}

#[test]
fn horizon_and_step_overrides_apply() {
    let dir = out_dir("overrides");
    let out = run_in(
        &dir,
        &[],
        &["simulate", scenario_path("example1_sine").to_str().unwrap(), "--T", "2", "--h", "0.01"],
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let csv = std::fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    // Header plus 201 samples (2 s at 0.01 s steps).
    assert_eq!(csv.lines().count(), 202);
}

#[test]
fn seed_override_changes_sampled_checks_deterministically() {
    let dir_a = out_dir("seed_a");
    let dir_b = out_dir("seed_b");
    let scenario = scenario_path("example1_sine");
    for (dir, seed) in [(&dir_a, "42"), (&dir_b, "43")] {
        let out = run_in(dir, &[], &["verify", scenario.to_str().unwrap(), "--seed", seed]);
        assert_eq!(out.status.code(), Some(0));
    }
    let a = std::fs::read_to_string(dir_a.join("report.json")).unwrap();
    let b = std::fs::read_to_string(dir_b.join("report.json")).unwrap();
    assert_ne!(a, b, "different seeds explore different samples");

    let dir_c = out_dir("seed_c");
    let out = run_in(&dir_c, &[], &["verify", scenario.to_str().unwrap(), "--seed", "42"]);
    assert_eq!(out.status.code(), Some(0));
    let c = std::fs::read_to_string(dir_c.join("report.json")).unwrap();
    assert_eq!(a, c, "same seed reproduces the report");
}

#[test]
fn minimal_scenario_fills_and_echoes_defaults() {
    let dir = out_dir("minimal_defaults");
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("minimal.json");
    std::fs::write(
        &file,
        r#"{ "model": { "kind": "sine", "n": 1 }, "penalties": { "R": [[1.0]] } }"#,
    )
    .unwrap();
    let out = run_in(&dir, &[], &["design", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let echo: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("effective_scenario.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(echo["simulation"]["T"], 20.0);
    assert_eq!(echo["simulation"]["h"], 1e-3);
    assert_eq!(echo["verification"]["seed"], 42);
    assert_eq!(echo["simulation"]["disturbance"]["kind"], "zero");
    assert_eq!(echo["penalties"]["mode"], "nominal");
}
