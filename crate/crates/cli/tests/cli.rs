use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sphere-ot")).args(args).output().expect("binary runs")
}

fn json_report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn entry<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["entries"].as_array().unwrap().iter().find(|e| e["name"] == name).unwrap_or_else(|| panic!("no entry {name}"))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn geometry_report_is_schema_stable() {
    let out = run(&["geometry-check", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json_report(&out);
    assert_eq!(r["command"], "geometry-check");
    assert_eq!(r["pass"], true);
    for e in r["entries"].as_array().unwrap() {
        for key in ["name", "value", "tolerance", "equation_tag", "pass"] {
            assert!(e.get(key).is_some(), "entry lacks {key}");
        }
    }
    assert!(entry(&r, "exp_log_roundtrip")["value"].as_f64().unwrap() < 1e-10);
}

#[test]
fn csv_projection() {
    let out = run(&["jacobi-check", "--dim", "3", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("name,value,tolerance,equation_tag,pass"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn same_seed_same_bytes() {
    let a = run(&["jacobi-check", "--seed", "11"]);
    let b = run(&["jacobi-check", "--seed", "11"]);
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["jacobi-check", "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn zero_potential_has_zero_talagrand_slack() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"command": "talagrand", "psi_amplitude": 0, "grid": {"kind": "gauss_legendre_colatitude", "n_colat": 16, "n_lon": 32}}"#);
    let out = run(&["--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json_report(&out);
    assert!(entry(&r, "slack[eps=1]")["value"].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(entry(&r, "w2_squared[eps=1]")["value"], 0.0);
}

#[test]
fn failed_check_exits_one_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"samples": 100, "tolerances": {"geometry": 1e-300}}"#);
    let report = dir.path().join("report.json");
    let out = run(&["geometry-check", "--config", &cfg, "--output", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["pass"], false);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let negative = write(dir.path(), "neg.json", r#"{"tolerances": {"entropy": -1}}"#);
    assert_eq!(run(&["entropy-verify", "--config", &negative]).status.code(), Some(2));
    let unknown = write(dir.path(), "unknown.json", r#"{"colour": "blue"}"#);
    assert_eq!(run(&["talagrand", "--config", &unknown]).status.code(), Some(2));
    let missing = write(dir.path(), "missing.json", r#"{"mu_path": "nowhere.json", "nu_path": "nowhere.json"}"#);
    assert_eq!(run(&["w1-green", "--config", &missing]).status.code(), Some(2));
    assert_eq!(run(&["--config", dir.path().join("absent.json").to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["geometry-check", "--dim", "7"]).status.code(), Some(2));
    assert_eq!(run(&["w1-green", "--dim", "3"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
}

#[test]
fn w1_green_from_measure_files() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "mu.json", r#"{"dim": 2, "points": [[0, 0, 1], [1, 0, 0]], "weights": [0.5, 0.5]}"#);
    write(dir.path(), "nu.json", r#"{"dim": 2, "points": [[0, 1, 0]], "weights": [1]}"#);
    let cfg = write(dir.path(), "cfg.json", r#"{"command": "w1-green", "mu_path": "mu.json", "nu_path": "nu.json"}"#);
    let out = run(&["--config", &cfg, "--grid-colat", "32", "--grid-lon", "64"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json_report(&out);
    // both atoms of μ are a quarter turn from ν's atom; mollifying moves
    // each measure by at most the cap radius
    let w1 = entry(&r, "w1")["value"].as_f64().unwrap();
    let slack = entry(&r, "discretization")["value"].as_f64().unwrap() + 2.0 * entry(&r, "cap_radius")["value"].as_f64().unwrap();
    assert!((w1 - std::f64::consts::FRAC_PI_2).abs() <= slack, "{w1} vs pi/2 within {slack}");
    assert_eq!(entry(&r, "margin")["pass"], true);
    assert_eq!(entry(&r, "duality_residual")["pass"], true);
}

#[test]
fn w1_green_default_density_pair() {
    let out = run(&["w1-green", "--grid-colat", "32", "--grid-lon", "64"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json_report(&out);
    let w1 = entry(&r, "w1")["value"].as_f64().unwrap();
    assert!(w1 > 0.0 && w1 <= entry(&r, "green_rhs")["value"].as_f64().unwrap());
}

#[test]
fn entropy_verify_on_a_small_grid() {
    let out = run(&["entropy-verify", "--grid-colat", "48", "--grid-lon", "96", "--eps", "0.05,0.025", "--tol-entropy", "1e-2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json_report(&out);
    assert!(entry(&r, "relative_gap[eps=0.05]")["value"].as_f64().unwrap() < 1e-2);
    assert_eq!(entry(&r, "relative_gap[eps=0.025]")["tolerance"], 1e-2);
}

#[test]
fn lichnerowicz_sweep_is_quadratic() {
    let out = run(&["lichnerowicz", "--grid-colat", "48", "--grid-lon", "96", "--tau", "0.1,0.05,0.025"]);
    let r = json_report(&out);
    assert_eq!(out.status.code(), Some(if r["pass"] == true { 0 } else { 1 }));
    assert_eq!(entry(&r, "entropy_slope_minus_two")["pass"], true);
    for tau in ["0.1", "0.05", "0.025"] {
        assert_eq!(entry(&r, &format!("relative_gap[tau={tau}]"))["pass"], true);
    }
    assert_eq!(entry(&r, "sum_rule_minus_half")["pass"], true);
    // the gap order is reported whether or not this potential reaches 1
    assert_eq!(entry(&r, "gap_order")["tolerance"], 1.0);
}
