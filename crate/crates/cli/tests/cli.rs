//! End-to-end runs of the `coarselab` binary: exit codes, outputs and
//! flag handling.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn coarselab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coarselab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn tree_delta_prints_report() {
    let out = coarselab(&["delta", "--graph", "tree:3,4"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["status"], "pass");
    assert_eq!(v["value"]["delta_four_point"], 0);
}

#[test]
fn flow_bound_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("flow");
    let out = coarselab(&[
        "flow-bound",
        "--bundle",
        "horoball(path:17, 4)",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("table.csv")).unwrap();
    assert!(csv.lines().count() >= 6, "{csv}");
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["op"], "flow");
}

#[test]
fn product_shadow_is_a_violation() {
    let out = coarselab(&[
        "shadow",
        "--bundle",
        "product(path:17, 4)",
        "-p",
        "m=0",
        "-p",
        "min_start=5",
    ]);
    assert_eq!(code(&out), 2);
    let v = stdout_json(&out);
    assert_eq!(v["status"], "violation");
    assert_eq!(v["error"]["kind"], "NoWitness");
}

#[test]
fn bad_input_is_an_error() {
    assert_eq!(code(&coarselab(&["delta"])), 1);
    assert_eq!(code(&coarselab(&["delta", "--graph", "tree:x"])), 1);
    assert_eq!(
        code(&coarselab(&["delta", "--graph", "path:5", "-p", "bogus=1"])),
        1
    );
    assert_eq!(code(&coarselab(&["run", "/nonexistent/config.json"])), 1);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("growth.json");
    fs::write(
        &cfg,
        r#"{"op": "growth", "seed": 3, "graph": {"kind": "regular_tree", "valence": 3, "depth": 6}, "params": {"n_max": 5}}"#,
    )
    .unwrap();
    let run = coarselab(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(stdout_json(&run)["seed"], 3);
    let seeded = coarselab(&[
        "--seed",
        "9",
        "growth",
        "--config",
        cfg.to_str().unwrap(),
        "-p",
        "n_max=4",
    ]);
    assert_eq!(code(&seeded), 0);
    let v = stdout_json(&seeded);
    assert_eq!(v["seed"], 9);
    // a config for another op is rejected
    assert_eq!(
        code(&coarselab(&["delta", "--config", cfg.to_str().unwrap()])),
        1
    );
}

fn write_matrix(dir: &Path) -> std::path::PathBuf {
    let m = dir.join("matrix.json");
    fs::write(
        &m,
        r#"{"name": "small", "configs": [
            {"op": "delta", "graph": {"kind": "regular_tree", "valence": 3, "depth": 3}},
            {"op": "shadow", "bundle": {"kind": "product", "fiber": {"kind": "path", "n": 17}, "levels": 4}, "params": {"m": 0, "min_start": 5}, "expect": "violation"}
        ]}"#,
    )
    .unwrap();
    m
}

#[test]
fn suite_summary_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = write_matrix(dir.path());
    let mut outputs = Vec::new();
    for threads in ["1", "2"] {
        let out_dir = dir.path().join(format!("out-{threads}"));
        let out = Command::new(env!("CARGO_BIN_EXE_coarselab"))
            .env("COARSELAB_THREADS", threads)
            .args([
                "suite",
                matrix.to_str().unwrap(),
                "--out",
                out_dir.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let v = stdout_json(&out);
        assert_eq!(
            (v["total"].as_u64(), v["all_met"].as_bool()),
            (Some(2), Some(true))
        );
        outputs.push(fs::read(out_dir.join("summary.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let flag = coarselab(&["--threads", "1", "suite", matrix.to_str().unwrap()]);
    assert_eq!(code(&flag), 0);
}

#[test]
fn gen_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = coarselab(&[
        "gen",
        "--graph",
        "free:2,3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().any(|n| n.ends_with(".edges")), "{names:?}");
}
