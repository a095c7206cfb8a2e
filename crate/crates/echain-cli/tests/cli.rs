//! End-to-end tests of the batch front end: exit codes, output formats, and
//! byte-level reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn echain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_echain"))
        .args(args)
        .env_remove("ECHAIN_TOL")
        .output()
        .expect("binary runs")
}

fn write(path: &Path, content: &str) {
    fs::write(path, content).unwrap();
}

fn bell_initial() -> &'static str {
    r#""initial": {"kind": "pure", "dims": [2, 2],
        "re": [0.7071067811865476, 0, 0, 0.7071067811865476],
        "im": [0, 0, 0, 0]}"#
}

#[test]
fn choi_reports_known_concurrence() {
    let out = echain(&["choi", "--channel", "depolarizing", "--d", "2", "--p", "0.4"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let measures = v["measures"].as_array().unwrap();
    let c = measures
        .iter()
        .find(|m| m["name"] == "concurrence")
        .unwrap()["value"]
        .as_f64()
        .unwrap();
    assert!((c - 0.4).abs() < 1e-10);
}

#[test]
fn choi_identity_qutrit_negativity() {
    let out = echain(&["choi", "--channel", "identity", "--d", "3"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let neg = v["measures"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["name"] == "negativity")
        .unwrap()["value"]
        .as_f64()
        .unwrap();
    // negativity of φ₃⁺ is (d−1)/2 = 1
    assert!((neg - 1.0).abs() < 1e-9);
}

#[test]
fn malformed_channel_parameter_exits_2() {
    let out = echain(&["choi", "--channel", "depolarizing", "--d", "2", "--p", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["kind"], "config");
}

#[test]
fn chain_csv_has_expected_shape_and_monotone_bound() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("chain.json");
    write(
        &config,
        &format!(
            r#"{{"channel": {{"channel": "amplitude_damping", "gamma": 0.2}},
                "n": 5, {}}}"#,
            bell_initial()
        ),
    );
    let out_path = dir.path().join("result.csv");
    let out = echain(&[
        "chain",
        "--config",
        config.to_str().unwrap(),
        "--format",
        "csv",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = text.trim_end().split('\n').collect();
    assert_eq!(
        lines[0],
        "step,concurrence,eof,negativity,sep_lower,choi_decay_bound,separability_bound"
    );
    assert_eq!(lines.len(), 7, "header plus n+1 rows");
    // decay-bound column monotone nonincreasing
    let bounds: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(5).unwrap().parse().unwrap())
        .collect();
    for w in bounds.windows(2) {
        assert!(w[1] <= w[0] + 1e-15);
    }
}

#[test]
fn chain_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("chain.json");
    write(
        &config,
        &format!(
            r#"{{"channel": {{"channel": "depolarizing", "d": 2, "p": 0.3}},
                "n": 4, "seed": 9, {}}}"#,
            bell_initial()
        ),
    );
    let a = echain(&["chain", "--config", config.to_str().unwrap()]);
    let b = echain(&["chain", "--config", config.to_str().unwrap()]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn chain_rejects_unknown_config_fields() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("chain.json");
    write(
        &config,
        &format!(
            r#"{{"channel": {{"channel": "identity", "d": 2}}, "n": 2,
                "surprise": 1, {}}}"#,
            bell_initial()
        ),
    );
    let out = echain(&["chain", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mc_is_reproducible_and_within_bound() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("mc.json");
    write(
        &config,
        &format!(
            r#"{{"channel": {{"channel": "amplitude_damping", "gamma": 0.3}},
                "n": 3,
                "filters": {{"repeat": {{"kind": "slocc",
                  "pairs": [
                    {{"m": {{"dims": [2,2], "re": [0.6,0,0,1], "im": [0,0,0,0]}},
                      "n": {{"dims": [2,2], "re": [1,0,0,1], "im": [0,0,0,0]}}}},
                    {{"m": {{"dims": [2,2], "re": [0.8,0,0,0], "im": [0,0,0,0]}},
                      "n": {{"dims": [2,2], "re": [1,0,0,1], "im": [0,0,0,0]}}}}
                  ],
                  "accept": [0]}}}},
                "threshold_c": 0.5, "trajectories": 2000, "seed": 42, {}}}"#,
            bell_initial()
        ),
    );
    let a = echain(&["mc", "--config", config.to_str().unwrap()]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = echain(&["mc", "--config", config.to_str().unwrap()]);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    let emp = v["empirical_prob"].as_f64().unwrap();
    let bound = v["bound"].as_f64().unwrap();
    let sigma = v["binomial_sigma"].as_f64().unwrap();
    assert!(emp <= bound + 3.0 * sigma);
    // seed override changes the sample
    let c = echain(&["mc", "--config", config.to_str().unwrap(), "--seed", "43"]);
    let vc: serde_json::Value = serde_json::from_slice(&c.stdout).unwrap();
    assert_eq!(vc["seed"].as_u64(), Some(43));
}

#[test]
fn scaling_csv_bound_column_is_affine_in_log_n() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scaling.json");
    write(
        &config,
        r#"{"p": 0.1, "n_values": [4, 16, 64, 256],
            "m_values": [1, 2], "strategy": "distill_swap"}"#,
    );
    let out = echain(&[
        "scaling",
        "--config",
        config.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.trim_end().split('\n').collect();
    assert_eq!(lines[0], "n,m,p,endpoint_fidelity,survives,bound_value");
    assert_eq!(lines.len(), 1 + 4 * 2);
    // bound_value affine in ln n with slope 1/γ = 1/ln 10
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for l in &lines[1..] {
        let cols: Vec<&str> = l.split(',').collect();
        if cols[1] == "1" {
            rows.push((cols[0].parse().unwrap(), cols[5].parse().unwrap()));
        }
    }
    let gamma = 10f64.ln().recip();
    for w in rows.windows(2) {
        let slope = (w[1].1 - w[0].1) / ((w[1].0).ln() - (w[0].0).ln());
        assert!((slope - gamma).abs() < 1e-12);
    }
}

#[test]
fn detect_not_found_for_depolarizing() {
    let out = echain(&[
        "detect",
        "--channel",
        "depolarizing",
        "--d",
        "2",
        "--p",
        "0.3",
        "--restarts",
        "10",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "not_found");
    assert!(v["best_residual"].as_f64().unwrap() > 0.01);
    assert!(v["fixed_point_gap"].as_f64().unwrap() > 0.01);
}

#[test]
fn kappa_table_for_depolarizing() {
    let out = echain(&[
        "kappa",
        "--channel",
        "depolarizing",
        "--d",
        "2",
        "--p",
        "0.4",
        "--n-max",
        "3",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.trim_end().split('\n').collect();
    assert_eq!(lines[0], "n,separability_bound");
    assert_eq!(lines.len(), 5);
    let b0: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!((b0 - 4.0 * (2f64.sqrt() - 1.0)).abs() < 1e-12);
}

#[test]
fn measure_runs_and_respects_env_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("measure.json");
    // slightly denormalized amplitudes: rejected at default tolerance,
    // accepted when ECHAIN_TOL is loosened
    write(
        &config,
        r#"{"state": {"kind": "pure", "dims": [2, 2],
            "re": [0.70710, 0, 0, 0.70710], "im": [0, 0, 0, 0]},
           "measures": ["concurrence", "negativity"]}"#,
    );
    let strict = echain(&["measure", "--config", config.to_str().unwrap()]);
    assert_eq!(strict.status.code(), Some(2));
    let loose = Command::new(env!("CARGO_BIN_EXE_echain"))
        .args(["measure", "--config", config.to_str().unwrap()])
        .env("ECHAIN_TOL", "1e-4")
        .output()
        .unwrap();
    assert!(
        loose.status.success(),
        "{}",
        String::from_utf8_lossy(&loose.stderr)
    );
}

#[test]
fn measure_unknown_name_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("measure.json");
    write(
        &config,
        r#"{"state": {"kind": "pure", "dims": [2, 2],
            "re": [1, 0, 0, 0], "im": [0, 0, 0, 0]},
           "measures": ["entropy_of_fun"]}"#,
    );
    let out = echain(&["measure", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_exits_2() {
    let out = echain(&["chain", "--config", "/nonexistent/nope.json"]);
    assert_eq!(out.status.code(), Some(2));
}
