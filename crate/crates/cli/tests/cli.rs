use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bml")).args(args).output().unwrap()
}

fn record(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("record.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn simulate_runs_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"dims":[30,30],"p":0.8,"steps":2000,"runs":2,"png":true}"#);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let out = bml(&["simulate", "--config", &cfg, "--seed", "7", "--out-dir", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (ra, rb) = (record(&a), record(&b));
    assert_eq!(ra["statistics"], rb["statistics"]);
    assert_eq!(ra["manifest"], rb["manifest"]);
    assert_eq!(ra["statistics"]["runs"][0]["seed"], 7);
    for entry in ra["manifest"].as_array().unwrap() {
        let name = entry["path"].as_str().unwrap();
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
    }
    assert!(a.join("final_seed8.png").exists());
}

#[test]
fn json_format_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bml(&["skew-cycle", "--out-dir", tmp.path().to_str().unwrap(), "--format", "json"]);
    assert!(out.status.success());
    let rows: Value = serde_json::from_slice(&fs::read(tmp.path().join("cycles.json")).unwrap()).unwrap();
    assert_eq!(rows[0]["r"], 1);
    assert_eq!(record(tmp.path())["statistics"]["tori"][0]["vertex_count"], 18);
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let cfg = write_config(tmp.path(), r#"{"p": 2.0, "steps": 0}"#);
    let out = bml(&["simulate", "--config", &cfg, "--out-dir", dir]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("p:") && err.contains("steps:"), "{err}");

    let cfg = write_config(tmp.path(), r#"{"kind": "wchain"}"#);
    assert_eq!(bml(&["simulate", "--config", &cfg]).status.code(), Some(2));
    let cfg = write_config(tmp.path(), r#"{"colour": "red"}"#);
    assert_eq!(bml(&["render", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(bml(&["render", "--config", "/nonexistent/x.json"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"snapshot": "/nonexistent/grid.bml"}"#);
    let out = bml(&["render", "--config", &cfg, "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}
