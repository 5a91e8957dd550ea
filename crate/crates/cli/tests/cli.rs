use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn uhspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uhspec")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn config_line(csv: &str) -> Value {
    let first = csv.lines().next().unwrap();
    serde_json::from_str(first.strip_prefix("# ").unwrap()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn free_scan_finds_one_band() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("free.csv");
    let o = uhspec(&["scan", "--model", "constant", "--E-range", "-3,3", "--step", "0.01", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("1 band(s)"), "{}", stdout(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let cfg = config_line(&csv);
    assert_eq!(cfg["settings"]["depth"], 64);
    assert_eq!(cfg["e_range"], serde_json::json!([-3.0, 3.0]));
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "E,label,lambda,gap,witness_log_norm,decay_rate,depth,reason");
    assert!(rows.len() > 601);
}

#[test]
fn scan_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("am.csv");
    let args = ["scan", "--model", "almost_mathieu", "--E-range", "-3,3", "--step", "0.1", "--out", path_str(&out)];
    assert!(uhspec(&args).status.success());
    let first = std::fs::read(&out).unwrap();
    assert!(uhspec(&args).status.success());
    assert_eq!(first, std::fs::read(&out).unwrap());
    // Other parallelism: same numbers, only the echoed setting differs.
    let par = dir.path().join("par.csv");
    let o = uhspec(&[
        "scan", "--model", "almost_mathieu", "--E-range", "-3,3", "--step", "0.1", "--parallelism", "3", "--out",
        path_str(&par),
    ]);
    assert!(o.status.success());
    let body = |b: &[u8]| String::from_utf8_lossy(b).lines().skip(2).map(String::from).collect::<Vec<_>>();
    assert_eq!(body(&first), body(&std::fs::read(&par).unwrap()));
}

#[test]
fn failed_certificate_is_a_successful_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cert.json");
    let o = uhspec(&["certify", "--model", "constant", "--E", "1", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("FAILED: growth"), "{}", stdout(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["result"]["certified"], false);
    assert_eq!(v["result"]["failure"]["reason"], "growth");
    assert_eq!(v["config"]["energy"], 1.0);
}

#[test]
fn certificate_at_hyperbolic_energy() {
    let o = uhspec(&["certify", "--model", "constant", "--E", "-3"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("CERTIFIED: lambda 2.618034"), "{}", stdout(&o));
}

#[test]
fn nonpositive_grid_step_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"model": {"family": "constant"}, "grid_step": -0.5}"#).unwrap();
    let o = uhspec(&["scan", "--config", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("grid_step"), "{}", stderr(&o));
    let o = uhspec(&["scan", "--model", "constant", "--step", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(uhspec(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(uhspec(&["scan"]).status.code(), Some(1));
    assert_eq!(uhspec(&["scan", "--model", "nonsense"]).status.code(), Some(1));
    let o = uhspec(&["scan", "--model", "constant", "--depth", "4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("depth"));
    assert_eq!(uhspec(&["--help"]).status.code(), Some(0));
}

#[test]
fn io_errors_exit_three() {
    let o = uhspec(&["scan", "--config", "/definitely/not/here.json"]);
    assert_eq!(o.status.code(), Some(3));
    let o = uhspec(&["eig", "--model", "constant", "--out", "/definitely/not/here/eig.csv"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"model": {"family": "random_iid", "params": {"bound": 0.5, "seed": 1}},
            "settings": {"depth": 32, "window": 64}, "section_size": 32}"#,
    )
    .unwrap();
    let out = dir.path().join("eig.csv");
    let o = uhspec(&["eig", "--config", path_str(&cfg), "--depth", "48", "--seed", "9", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let echoed = config_line(&csv);
    assert_eq!(echoed["settings"]["depth"], 48);
    assert_eq!(echoed["settings"]["window"], 64);
    assert_eq!(echoed["model"]["params"]["seed"], 9);
    assert_eq!(echoed["model"]["params"]["bound"], 0.5);
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 33);
}

#[test]
fn green_kernel_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.csv");
    let o = uhspec(&["green", "--model", "constant", "--E", "3", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("G(0,0) = -0.4472135955"), "{}", stdout(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let diag: f64 = csv
        .lines()
        .find_map(|l| l.strip_prefix("0,0,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!((diag + 1.0 / 5f64.sqrt()).abs() < 1e-10);
    // At a spectral energy there is nothing to build.
    let o = uhspec(&["green", "--model", "constant", "--E", "0.5"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("FAILED"));
}

#[test]
fn witness_and_scan_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.json");
    let o = uhspec(&["witness", "--model", "constant", "--E", "1", "--depth", "100", "--window", "120", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["result"]["witness"]["max_log_norm"].as_f64().unwrap() <= 2f64.ln());
    let out = dir.path().join("s.json");
    let o = uhspec(&["scan", "--model", "periodic", "--step", "0.05", "--out", path_str(&out)]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["result"]["bands"].as_array().unwrap().len(), 2);
    assert_eq!(v["config"]["e_range"], serde_json::json!([-3.0, 3.0]));
}

#[test]
fn compare_listed_phases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"model": {"family": "periodic", "params": {"pattern": [1, 0]}, "phases": [0, 1, 5]},
            "grid_step": 0.05}"#,
    )
    .unwrap();
    let out = dir.path().join("cmp.json");
    let o = uhspec(&["compare", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("holds for all 6 ordered pairs"), "{}", stdout(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["result"]["pairs"].as_array().unwrap().len(), 6);
}
