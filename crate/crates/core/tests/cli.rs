use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .display()
        .to_string()
}

fn hamflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamflow"))
        .args(args)
        .env_remove("HAMFLOW_SEED")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stderr));
    })
}

fn check<'a>(r: &'a Value, name: &str) -> &'a Value {
    r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no check {name}"))
}

#[test]
fn analyze_rotation_is_global_candidate() {
    let out = hamflow(&["analyze", &fixture("rotation.json"), "--samples", "50", "--tol", "1e-8"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["verdict"], "GLOBAL_CANDIDATE");
    assert_eq!(r["schema"], 1);
    assert_eq!(check(&r, "frame_orthonormality")["status"], "pass");
}

#[test]
fn analyze_halphen_is_local_only() {
    let out = hamflow(&["analyze", &fixture("halphen.json"), "--samples", "50"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["verdict"], "LOCAL_ONLY");
}

#[test]
fn missing_spec_is_an_input_error() {
    assert_eq!(hamflow(&["analyze", "missing.json"]).status.code(), Some(2));
}

#[test]
fn malformed_spec_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"name": "bad", "components": ["x", "y"]}"#).unwrap();
    let out = hamflow(&["analyze", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/components"));
}

#[test]
fn bundled_fixtures_load() {
    let halphen = hamflow::cli::load_field_spec(fixture("halphen.json")).unwrap().0;
    let v = hamflow::halphen::fixtures().v;
    for i in 0..3 {
        assert_eq!(halphen.field.components[i].to_string(), v.components[i].to_string());
    }
    let top = hamflow::cli::load_field_spec(fixture("euler_top.json")).unwrap().0;
    assert_eq!(top.hamiltonians.len(), 2);
}

#[test]
fn euler_top_hamiltonian_pairs() {
    let out = hamflow(&["check-hamiltonian", &fixture("euler_top.json"), "--tol", "1e-12"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(&out);
    assert_eq!(check(&r, "hamiltonian_1")["status"], "pass");
}

#[test]
fn reports_are_deterministic_except_timestamp() {
    let run = |seed: &str| {
        let mut r = report(&hamflow(&["analyze", &fixture("halphen.json"), "--samples", "20", "--seed", seed]));
        r.as_object_mut().unwrap().remove("timestamp");
        serde_json::to_string(&r).unwrap()
    };
    assert_eq!(run("5"), run("5"));
    assert_ne!(run("5"), run("6"));
}

#[test]
fn seed_falls_back_to_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_hamflow"))
        .args(["analyze", &fixture("rotation.json"), "--samples", "5"])
        .env("HAMFLOW_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(report(&out)["seed"], 42);
}

#[test]
fn reconstruct_rotation_and_obstruction() {
    let out = hamflow(&["reconstruct", &fixture("rotation.json")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let out = hamflow(&["reconstruct", &fixture("halphen.json"), "--samples", "20"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["verdict"], "OBSTRUCTION_GODBILLON_VEY");
}

#[test]
fn trajectory_csv_and_drift() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let out_path = dir.path().join("report.json");
    let out = hamflow(&[
        "traj",
        &fixture("euler_top.json"),
        "--x0",
        "1,0.8,0.6",
        "--t1",
        "1",
        "--csv",
        csv.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(r["artifacts"][0], csv.to_str().unwrap());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("t,x,y,z,s\n"));
    assert_eq!(text.lines().count(), 1002);
}

#[test]
fn trajectory_blowup_is_a_numerical_failure() {
    let out = hamflow(&["traj", &fixture("euler_top.json"), "--x0", "1,0.8,0.6", "--t1", "5"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn riccati_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("mu.csv");
    let out = hamflow(&[
        "riccati",
        &fixture("rotation.json"),
        "--start",
        "1,0,0.5",
        "--mu0",
        "1",
        "--length",
        "1",
        "--step",
        "1e-2",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("s,x,y,z,p,q,mu\n"));
    let out = hamflow(&["riccati", &fixture("rotation.json"), "--start", "0,0,1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn homotopy_subcommand() {
    let out = hamflow(&["homotopy", "y", "x", "0", "--at", "2,3,0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = report(&out)["details"]["values"][0]["value"].as_f64().unwrap();
    assert!((v - 6.0).abs() < 1e-9);
}

#[test]
fn halphen_suite_reports_alpha_check() {
    let out = hamflow(&["halphen", "--points", "100", "--seed", "7"]);
    let r = report(&out);
    let alpha = check(&r, "alpha_wedge_dalpha");
    assert_eq!(alpha["status"], "fail");
    assert!(alpha["max_residual"].as_f64().unwrap() > 0.99);
    assert_eq!(check(&r, "alpha_wedge_dalpha_vs_rho")["status"], "pass");
    assert_eq!(out.status.code(), Some(1));
}
