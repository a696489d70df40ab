use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn narravine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_narravine"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn replay_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let session = dir.path().join("s1");
    let out = narravine(&["replay", path(&fixture("happy3.scene")), "--out", path(&session)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["trials"].as_array().unwrap().len(), 3);

    let out = narravine(&[
        "analyze",
        path(&session),
        "--sus",
        path(&fixture("sus_sample.csv")),
        "--ueq",
        path(&fixture("ueq_reference_pattern.csv")),
        "--votes",
        path(&fixture("age_votes.csv")),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["metrics"]["success_rate"], 1.0);
    assert_eq!(report["meta"]["trials_total"], 3);
    assert!(report["questionnaires"]["sus"]["mean"].is_number());
    assert_eq!(report["questionnaires"]["ueq"].as_array().unwrap().len(), 6);
    assert!(report["questionnaires"]["votes"]["goodness_of_fit"]["p"].is_number());
}

#[test]
fn command_line_overrides_the_scene() {
    let out = narravine(&["replay", path(&fixture("happy3.scene")), "--trials", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["trials"].as_array().unwrap().len(), 1);
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.json");
    for args in [
        vec!["--config", "/no/such/config.toml", "validate-config"],
        vec!["--manifest", path(&missing), "validate-config"],
        vec!["--trials", "0", "replay", path(&fixture("happy3.scene"))],
        vec!["replay", "/no/such.scene"],
    ] {
        let out = narravine(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "trials_total = \"three\"\n").unwrap();
    assert_eq!(narravine(&["--config", path(&bad), "validate-config"]).status.code(), Some(2));
}

#[test]
fn validate_config_prints_resolved_paths() {
    let out = narravine(&["--config", path(&fixture("session.toml")), "validate-config"]);
    assert_eq!(out.status.code(), Some(0));
    let cfg: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg["participant_id"], "P01");
    assert!(cfg["scene"].as_str().unwrap().ends_with("happy3.scene"));
    assert!(Path::new(cfg["genai"]["fixture"].as_str().unwrap()).is_file());
}

#[test]
fn occupied_ports_exit_3() {
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let out = narravine(&["--port-base", &port, "run", "--listen", "127.0.0.1:0"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let gateway = format!("127.0.0.1:{port}");
    let out = narravine(&["run", "--listen", &gateway]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn run_finishes_a_scripted_session() {
    let out = narravine(&[
        "--config",
        path(&fixture("session.toml")),
        "run",
        "--listen",
        "127.0.0.1:0",
        "--time-scale",
        "0.0005",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["success_rate"], 1.0);
    assert_eq!(summary["aborted"], false);
}
