use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_synergy");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn small_world(dir: &Path) -> String {
    let out = run(&[
        "synth",
        "--scenario",
        "small",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    dir.join("config.json").to_str().unwrap().to_string()
}

#[test]
fn pipeline_succeeds_and_keeps_stdout_empty() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_world(dir.path());
    let out = run(&["pipeline", "-c", &cfg, "--seed", "5", "--timings"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("regress"));
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("artifacts/manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["config"]["seed"], 5);
    assert!(
        manifest["inputs"]["trade"]["sha256"]
            .as_str()
            .unwrap()
            .len()
            == 64
    );
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_world(dir.path());
    let out = run(&["cluster", "-c", &cfg, "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cluster.k"));

    let out = run(&[
        "ingest",
        "-c",
        dir.path().join("none.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    // second run without --force
    assert!(run(&["ingest", "-c", &cfg]).status.success());
    assert_eq!(run(&["ingest", "-c", &cfg]).status.code(), Some(2));
    assert!(run(&["ingest", "-c", &cfg, "--force"]).status.success());
}

#[test]
fn unavailable_backend_exits_2() {
    let out = run(&["genepy", "--anything", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not implemented"));
}

#[test]
fn stage_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_world(dir.path());
    // network before synergy has run
    let out = run(&["network", "-c", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(dir.path().join("artifacts/network/PARTIAL").is_file());
}
