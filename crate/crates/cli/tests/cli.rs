//! End-to-end tests of the `be-stability-lab` binary: exit codes, config
//! layering, report formats, and atomic output.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_be-stability-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn poincare_gaussian_prints_unit_constant_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = run(&[
        "poincare",
        "--family",
        "gaussian",
        "--grid-points",
        "2001",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("C_P = 1.000"), "stdout: {text}");
    assert!(text.contains("lambda_1 = 1.000"), "stdout: {text}");
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let cp = doc["c_p"].as_f64().unwrap();
    assert!((cp - 1.0).abs() < 2e-3);
    assert_eq!(doc["uniform"], serde_json::Value::Bool(true));
    assert_eq!(doc["config"]["grid-points"], "2001");
}

#[test]
fn unknown_flag_is_a_config_error() {
    let o = run(&["poincare", "--family", "gaussian", "--bogus"]);
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn missing_family_is_a_config_error() {
    let o = run(&["poincare"]);
    assert_eq!(o.status.code(), Some(64));
    assert!(stderr(&o).contains("family"), "stderr: {}", stderr(&o));
}

#[test]
fn unknown_config_key_is_rejected_by_name_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lab.cfg");
    std::fs::write(&cfg, "family = gaussian\nbad-key = 3\n").unwrap();
    let o = run(&["poincare", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(64));
    let err = stderr(&o);
    assert!(err.contains("bad-key"), "stderr: {err}");
    assert!(err.contains(":2"), "stderr: {err}");
}

#[test]
fn malformed_config_line_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lab.cfg");
    std::fs::write(&cfg, "family gaussian\n").unwrap();
    let o = run(&["poincare", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(64));
    assert!(stderr(&o).contains("key = value"), "stderr: {}", stderr(&o));
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lab.cfg");
    // comments and whitespace are part of the format
    std::fs::write(&cfg, "family = gaussian\ngrid-points = 801  # overridden below\n").unwrap();
    let out = dir.path().join("report.json");
    let o = run(&[
        "poincare",
        "--config",
        cfg.to_str().unwrap(),
        "--grid-points",
        "1201",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["config"]["grid-points"], "1201");
}

#[test]
fn coordinate_sweep_writes_schema_tagged_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let json_path = dir.path().join("sweep.json");
    let csv_path = dir.path().join("sweep.csv");
    let o = run(&[
        "sweep",
        "--experiment",
        "coordinate",
        "--family",
        "gaussian-scaled",
        "--deltas",
        "0.05,0.1",
        "--out",
        json_path.to_str().unwrap(),
        "--out-csv",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(&o));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("# be-stability-lab v1\n"), "csv: {csv}");
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 2);
    assert_eq!(doc["pass"], serde_json::Value::Bool(true));
    // atomic write leaves no stray temp files next to the outputs
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 2, "unexpected files: {names:?}");
}

#[test]
fn identical_config_and_seed_give_byte_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let run_once = |name: &str| {
        let path = dir.path().join(name);
        let o = run(&[
            "sweep",
            "--experiment",
            "lsi",
            "--family",
            "gaussian-scaled",
            "--deltas",
            "0.05,0.1",
            "--tilt-p",
            "0.5,1",
            "--seed",
            "3",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(&o));
        std::fs::read(path).unwrap()
    };
    assert_eq!(run_once("a.json"), run_once("b.json"));
}

#[test]
fn check_flag_turns_certificate_failure_into_exit_3() {
    // the LSI ratio scales linearly with the tilt exponent, so a 30x spread
    // in p forces the bounded-ratio certificate to fail
    let args = [
        "sweep",
        "--experiment",
        "lsi",
        "--family",
        "gaussian-scaled",
        "--deltas",
        "0.1",
        "--tilt-p",
        "0.2,6",
    ];
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "no --check: stderr {}", stderr(&o));
    let mut checked = args.to_vec();
    checked.push("--check");
    let o = run(&checked);
    assert_eq!(o.status.code(), Some(3), "stderr: {}", stderr(&o));
    assert!(stderr(&o).contains("certificate failure"), "stderr: {}", stderr(&o));
}

#[test]
fn violated_precondition_exits_2() {
    let o = run(&["poincare", "--family", "gaussian", "--eigs", "0"]);
    assert_eq!(o.status.code(), Some(2), "stderr: {}", stderr(&o));
}

#[test]
fn bimodal_rescaled_rejects_domain_halfwidth() {
    let o = run(&[
        "sweep",
        "--experiment",
        "coordinate",
        "--family",
        "bimodal-rescaled",
        "--deltas",
        "1.2",
        "--s",
        "0.8",
        "--domain-halfwidth",
        "6",
    ]);
    assert_eq!(o.status.code(), Some(64), "stderr: {}", stderr(&o));
    assert!(stderr(&o).contains("domain-halfwidth"), "stderr: {}", stderr(&o));
}

#[test]
fn measure_export_is_schema_tagged_csv() {
    let o = run(&["measure-export", "--family", "quartic", "--delta", "0.05"]);
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# be-stability-lab v1"));
    assert_eq!(lines.next(), Some("x,potential,weight"));
}

#[test]
fn herbst_sweep_reports_zero_eps_for_linear_f() {
    let o = run(&[
        "sweep",
        "--experiment",
        "herbst",
        "--family",
        "gaussian",
        "--F",
        "linear",
        "--grid-points",
        "2001",
    ]);
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(&o));
    assert!(stdout(&o).contains("eps = 0.000000"), "stdout: {}", stdout(&o));
}

#[test]
fn geometric_delta_grid_spans_the_requested_range() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let o = run(&[
        "sweep",
        "--experiment",
        "coordinate",
        "--family",
        "gaussian-scaled",
        "--deltas",
        "0.01:0.1:3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let params: Vec<f64> = doc["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["param"].as_f64().unwrap())
        .collect();
    assert_eq!(params.len(), 3);
    assert!((params[0] - 0.01).abs() < 1e-12);
    assert!((params[2] - 0.1).abs() < 1e-12);
    // geometric spacing: middle point is the geometric mean
    assert!((params[1] - (0.01_f64 * 0.1).sqrt()).abs() < 1e-12);
}

#[test]
fn out_is_not_written_when_the_run_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("never.json");
    let o = run(&[
        "poincare",
        "--family",
        "quartic", // quartic needs --delta: config error before any output
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(64), "stderr: {}", stderr(&o));
    assert!(!Path::new(&path).exists());
}
