use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use tiltcheck::cli::report::ReportFile;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tiltcheck"));
    c.env_remove("TILTCHECK_SEED");
    c
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SDP: &str = r#"{"n": 2, "theta": "sdp_cone",
  "phi": {"kind": "quadratic", "C": [[1, 0], [0, -1]]},
  "xbar": [[1, 0], [0, 0]]}"#;

// 𝒜 on svec(H) = (H₁₁, √2 H₁₂, H₂₂) with the H₁₁ direction removed.
const SDP_FLAT: &str = r#"{"n": 2, "theta": "sdp_cone",
  "phi": {"kind": "quadratic", "C": [[1, 0], [0, -1]], "A": [[0, 0, 0], [0, 1, 0], [0, 0, 1]]},
  "xbar": [[1, 0], [0, 0]]}"#;

#[test]
fn analyze_exit_codes() {
    let dir = TempDir::new().unwrap();
    let ok = write(dir.path(), "sdp.json", SDP);
    let out = run(&["analyze", s(&ok)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("tilt-stable"));

    let flat = write(dir.path(), "flat.json", SDP_FLAT);
    let out = run(&["analyze", s(&flat), "--json"]);
    assert_eq!(out.status.code(), Some(1));
    let rep: ReportFile = serde_json::from_slice(&out.stdout).unwrap();
    assert!(rep.tilt.marginal);
    assert_eq!(rep.tilt.oracle_agrees, Some(true), "{:?}", rep.tilt.oracle);

    let asym = write(dir.path(), "asym.json", &SDP.replace("[[1, 0], [0, 0]]", "[[1, 0.5], [0, 0]]"));
    let out = run(&["analyze", s(&asym)]);
    assert_eq!(out.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/xbar"));

    let moved = write(dir.path(), "moved.json", &SDP.replace("[[1, 0], [0, 0]]", "[[1, 0], [0, 0.5]]"));
    let out = run(&["analyze", s(&moved)]);
    assert_eq!(out.status.code(), Some(65));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not stationary"));

    assert_eq!(run(&["analyze", "/nonexistent/problem.json"]).status.code(), Some(66));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(64));
}

#[test]
fn json_report_is_deterministic_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "sdp.json", SDP);
    let a = run(&["analyze", s(&p), "--json", "--oracle", "--seed", "7"]);
    let b = run(&["analyze", s(&p), "--json", "--oracle", "--seed", "7"]);
    assert_eq!(a.stdout, b.stdout);
    let rep: ReportFile = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(rep.seed, 7);
    assert_eq!(rep.tilt.oracle.as_ref().unwrap().seed, 7);
    assert_eq!(rep.to_json().as_bytes(), &a.stdout[..]);

    let env = bin().args(["analyze", s(&p), "--json", "--oracle", "--seed", "7"]).env("TILTCHECK_SEED", "11").output().unwrap();
    let rep: ReportFile = serde_json::from_slice(&env.stdout).unwrap();
    assert_eq!(rep.seed, 11);
}

#[test]
fn cone_command() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "sdp.json", SDP);
    let cases = [("[[0.3, 0.2], [0.2, 0]]", true), ("[[0, 0], [0, 0.1]]", false), ("[[0, 0], [0, 0]]", true)];
    for (h, aff) in cases {
        let hp = write(dir.path(), "h.json", h);
        let out = run(&["cone", s(&p), "--H", s(&hp), "--json"]);
        assert_eq!(out.status.code(), Some(0));
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["affine_hull"], aff, "{h}");
        assert_eq!(v["critical_cone"], v["critical_cone_eigen_route"]);
        if !aff {
            assert_eq!(v["minimal_bundle"], "inf");
        }
    }
}

#[test]
fn probe_command() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "sdp.json", SDP);
    let h = write(dir.path(), "h.json", "[[1, 0.3], [0.3, 0]]");
    let out = run(&["probe", s(&p), "--H", s(&h), "--json", "--ks", "10,1000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // Υ(H) = 2 · (1/1) · 0.3².
    let want = 0.18;
    assert!((v["minimal_bundle"].as_f64().unwrap() - want).abs() < 1e-12);
    for e in v["epi"].as_array().unwrap() {
        assert!((e.as_f64().unwrap() - want).abs() < 1e-9);
    }
    let d = write(dir.path(), "d.json", "[0, 1]");
    let out = run(&["probe", s(&p), "--H", s(&h), "--d", s(&d)]);
    assert_eq!(out.status.code(), Some(64), "a direction outside K is rejected");
}

#[test]
fn preset_templates() {
    let out = run(&["preset", "sdp_cone", "--n", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["theta"]["constraints"][0][0], serde_json::json!([-1.0, 0.0, 0.0]));

    let out = run(&["preset", "lambda_max", "--n", "4"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["theta"]["pieces"][2][0], serde_json::json!([0.0, 0.0, 1.0, 0.0]));

    let out = run(&["preset", "kyfan2_sdp", "--n", "4"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["theta"]["pieces"].as_array().unwrap().len(), 6);
    assert_eq!(v["theta"]["pieces"][0][0], serde_json::json!([1.0, 1.0, 0.0, 0.0]));

    // Every template analyzes as tilt-stable.
    let dir = TempDir::new().unwrap();
    for name in ["lambda_max", "sdp_cone", "kyfan2_sdp", "free"] {
        let out = run(&["preset", name, "--n", "3"]);
        let p = write(dir.path(), "t.json", &String::from_utf8(out.stdout).unwrap());
        assert_eq!(run(&["analyze", s(&p)]).status.code(), Some(0), "{name}");
    }
    assert_eq!(run(&["preset", "nope"]).status.code(), Some(64));
}

#[test]
fn schema_document_parses() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/problem-schema.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["n", "theta", "phi", "xbar", "options"] {
        assert!(v["properties"].get(key).is_some(), "{key}");
    }
}
