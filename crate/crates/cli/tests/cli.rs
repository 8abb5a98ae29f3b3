use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fblab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fblab"))
        .args(args)
        .arg("--json-only")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON report")
}

fn path_arg(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn norm_reports_exact_value_and_writes_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("cert.json");
    let out = fblab(&["norm", "--expr", "d(a) v d(b)", "--space", "l1", "--cert-out", path_arg(&cert)]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["schema"], 1);
    assert_eq!(r["subcommand"], "norm");
    assert_eq!(r["results"]["bracket"]["upper"], 2.0);

    let out = fblab(&["replay-cert", path_arg(&cert)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["results"]["bit_identical"], true);

    // a doubled configuration is no longer admissible
    let mut c: Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    let pts = c["points"].as_array().unwrap().clone();
    c["points"] = Value::Array(pts.iter().chain(pts.iter()).cloned().collect());
    std::fs::write(&cert, c.to_string()).unwrap();
    let out = fblab(&["replay-cert", path_arg(&cert)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["results"]["admissible"], false);
}

#[test]
fn exact_mode_certificates_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("exact.json");
    let out = fblab(&["--exact", "norm", "--expr", "0.5*d(a) - 0.25*d(b)", "--cert-out", path_arg(&cert)]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["arithmetic"], "rational");
    assert_eq!(r["results"]["bracket"]["diagnostics"]["exact_value"], "3/4");
    let out = fblab(&["replay-cert", path_arg(&cert)]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn phi_demo_table() {
    let out = fblab(&["phi-demo", "--n", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["results"]["chi_points"], serde_json::json!([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(fblab(&["bogus"]).status.code(), Some(2));
    assert_eq!(fblab(&["norm", "--expr", "d(a"]).status.code(), Some(2));
    assert_eq!(
        fblab(&["extract-l1", "--instance", "disjoint", "--eps", "0"]).status.code(),
        Some(2)
    );
    assert_eq!(fblab(&["ck-section", "--k", "twopoints", "--h", "0.5:1"]).status.code(), Some(2));
    assert_eq!(fblab(&["replay-cert", "/nonexistent/cert.json"]).status.code(), Some(2));
}

#[test]
fn runs_are_deterministic() {
    let args = ["oracle", "--expr", "(d(a) ^ d(b)) + 0.5*d(c)", "--budget", "3000", "--seed", "7"];
    let a = report(&fblab(&args));
    let b = report(&fblab(&args));
    assert_eq!(a["results"], b["results"]);
    assert_eq!(a["config"], b["config"]);
    assert_eq!(a["seed"], 7);
}

#[test]
fn extraction_and_section_pass() {
    let out = fblab(&["extract-l1", "--instance", "disjoint", "--n", "8", "--eps", "0.1", "--len", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["results"]["extraction"]["selected"].as_array().unwrap().len(), 8);

    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("section.json");
    let out = fblab(&["ck-section", "--k", "interval", "--h", "0:0,1:1", "--cert-out", path_arg(&cert)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["results"]["section"]["max_residual"], 0.0);
    assert_eq!(fblab(&["replay-cert", path_arg(&cert)]).status.code(), Some(0));

    let out = fblab(&["lemma34-check", "--expr", "d(b) - d(c)", "--gen", "a", "--budget", "3000"]);
    assert_eq!(out.status.code(), Some(0));
}
