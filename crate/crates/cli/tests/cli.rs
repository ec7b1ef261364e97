use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn regimes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regimes")).args(args).output().unwrap()
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_scenario_is_a_usage_error() {
    let o = regimes(&["analyze"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--scenario"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(regimes(&["analyze", "--bogus"]).status.code(), Some(2));
}

#[test]
fn zero_threads_is_a_usage_error() {
    assert_eq!(regimes(&["paper-example", "--threads", "0"]).status.code(), Some(2));
}

#[test]
fn invalid_scenario_exits_3_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"dimension\": 2,\n  \"regimez\": []\n}\n").unwrap();
    let o = regimes(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("bad.json:3"), "{err}");
    assert!(err.contains("regimes"), "{err}");
}

#[test]
fn bad_expression_points_at_the_component() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("expr.json");
    std::fs::write(
        &path,
        r#"{"dimension": 1, "regimes": [{"label": "a", "operator": {"expression": ["x0 * (2 +"]}}]}"#,
    )
    .unwrap();
    let o = regimes(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(
        stderr(&o).contains("regimes[0].operator.expression[0]"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn missing_file_exits_3() {
    let o = regimes(&["validate", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn validate_summarizes_bundled_scenarios() {
    for name in ["collateral.json", "collateral_expression.json", "stable_affine.json"] {
        let o = regimes(&["validate", "--scenario", bundled(name).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        assert!(String::from_utf8_lossy(&o.stdout).contains("valid (2 regimes, dimension 2"));
    }
}

#[test]
fn jsr_subcommand_prints_only_the_jsr_block() {
    let o = regimes(&[
        "jsr",
        "--scenario",
        bundled("collateral.json").to_str().unwrap(),
        "--no-timings",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["jsr"]["ok"]["verdict"]["status"], "UnstableCertified");
    assert!(report.get("simulation").map_or(true, |v| v.is_null()));
    assert!(report.get("timings").map_or(true, |v| v.is_null()));
}

#[test]
fn simulate_writes_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = regimes(&[
        "simulate",
        "--scenario",
        bundled("collateral.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,regime,x0,x1\n0,,"));
    assert!(out.join("deviations.csv").exists());
}

#[test]
fn seed_override_changes_a_stochastic_path() {
    let path = bundled("stable_affine.json");
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str| {
        let out = dir.path().join(seed);
        let o = regimes(&[
            "simulate",
            "--scenario",
            path.to_str().unwrap(),
            "--no-timings",
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
        v["simulation"]["ok"]["trajectory"]["regimes"].clone()
    };
    assert_eq!(run("5"), run("5"));
    assert_ne!(run("5"), run("6"));
}

#[test]
fn unwritable_output_directory_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let o = regimes(&["paper-example", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cannot write"));
}
