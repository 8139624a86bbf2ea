// SPDX-License-Identifier: Apache-2.0
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nandvmm"))
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn ok(args: &[&str], out: &Path) -> Output {
    let o = run(args, out);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn code(args: &[&str], out: &Path) -> i32 {
    run(args, out).status.code().expect("exit code")
}

fn read_json(p: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap()
}

fn write_graph(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn explore_default_table_and_optimum() {
    let d = tempfile::tempdir().unwrap();
    ok(&["explore"], d.path());
    let v = read_json(d.path().join("explore.json"));
    assert_eq!(v["tool"], "nandvmm");
    assert_eq!(v["seed"], 0);
    assert_eq!(v["result"]["rows"].as_array().unwrap().len(), 9);
    assert_eq!(v["result"]["optimal"], serde_json::json!([16e-9, 300e-9]));
}

#[test]
fn explore_single_column_and_usage_errors() {
    let d = tempfile::tempdir().unwrap();
    ok(&["explore", "--columns", "16ns:300nA"], d.path());
    let v = read_json(d.path().join("explore.json"));
    assert_eq!(v["result"]["rows"].as_array().unwrap().len(), 1);
    assert_eq!(code(&["explore", "--columns", ""], d.path()), 1);
    assert_eq!(code(&["explore", "--columns", "16ns"], d.path()), 1);
    assert_eq!(code(&["explore", "--columns", "10ns:300nA"], d.path()), 1);
    assert_eq!(code(&["frobnicate"], d.path()), 1);
}

#[test]
fn simulate_flags_off_is_exact() {
    let d = tempfile::tempdir().unwrap();
    ok(&["simulate", "--flags", "none", "--trials", "20", "--rows", "50"], d.path());
    let v = read_json(d.path().join("simulate.json"));
    assert_eq!(v["result"]["summary"]["max_error"], 0.0);
    assert_eq!(v["result"]["p0"], "exact");
    assert_eq!(code(&["simulate", "--flags", "shot"], d.path()), 1);
}

#[test]
fn simulate_full_flags_reaches_four_bits() {
    let d = tempfile::tempdir().unwrap();
    for rows in ["10", "100"] {
        ok(&["simulate", "--rows", rows, "--trials", "300", "--t-int", "16ns", "--i-max", "300nA"], d.path());
        let v = read_json(d.path().join("simulate.json"));
        let p0: u32 = v["result"]["p0"].as_str().unwrap().parse().unwrap();
        assert!(p0 >= 4, "M = {rows}: p0 = {p0}");
    }
}

#[test]
fn map_toy_and_gnmt() {
    let d = tempfile::tempdir().unwrap();
    ok(&["map", "--graph", "toy-chain"], d.path());
    assert_eq!(read_json(d.path().join("placement.json"))["result"]["layers_used"], 1);
    assert!(d.path().join("occupancy/layer_000.csv").exists());
    ok(&["map", "--graph", "gnmt-1024", "--iterations", "4"], d.path());
    let used = read_json(d.path().join("placement.json"))["result"]["layers_used"].as_u64().unwrap();
    assert!(used <= 64, "{used}");
}

#[test]
fn oversize_graph_is_a_capacity_error() {
    let d = tempfile::tempdir().unwrap();
    let g = write_graph(
        d.path(),
        "big.json",
        r#"{"name": "big", "nodes": [
            {"id": "in", "kind": "input", "out_shape": [1, 1, 16384]},
            {"id": "fc", "kind": "fc", "inputs": 16384, "outputs": 16384, "out_shape": [1, 1, 16384]},
            {"id": "out", "kind": "output"}
        ], "edges": [{"src": "in", "dst": "fc", "bytes": 8192}, {"src": "fc", "dst": "out", "bytes": 8192}]}"#,
    );
    let o = run(&["map", "--graph", &g], d.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("short by"));
}

#[test]
fn malformed_graph_is_a_format_error() {
    let d = tempfile::tempdir().unwrap();
    let g = write_graph(d.path(), "bad.json", r#"{"name": "bad", "nodes": [{"id": "x"}]}"#);
    assert_eq!(code(&["analyze-graph", "--graph", &g], d.path()), 2);
}

#[test]
fn estimate_benchmarks_and_reference() {
    let d = tempfile::tempdir().unwrap();
    for g in ["inception-v1", "resnet-152"] {
        ok(&["estimate", "--graph", g, "--iterations", "2"], d.path());
        let v = read_json(d.path().join("report.json"));
        assert!(v["result"]["report"]["energy_j"].as_f64().unwrap() > 0.0);
    }
    let o = ok(&["estimate", "--graph", "gnmt-1024", "--reference", "table2-baseline"], d.path());
    let v = read_json(d.path().join("report.json"));
    let devs = v["result"]["comparisons"][0]["deviations"].as_array().unwrap();
    assert_eq!(devs.len(), 5);
    assert!(String::from_utf8_lossy(&o.stdout).contains("throughput_tops"));
    assert_eq!(code(&["estimate", "--reference", "table9"], d.path()), 1);
}

#[test]
fn empty_graph_gives_zero_report() {
    let d = tempfile::tempdir().unwrap();
    let g = write_graph(d.path(), "empty.json", r#"{"name": "empty", "nodes": [], "edges": []}"#);
    ok(&["estimate", "--graph", &g], d.path());
    let r = &read_json(d.path().join("report.json"))["result"]["report"];
    assert_eq!(r["ops"], 0.0);
    assert_eq!(r["latency_s"], 0.0);
}

/// Re-running from the config embedded in an output reproduces it byte for byte.
#[test]
fn rerun_from_embedded_config_is_identical() {
    let d = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str); 6] = [
        (&["explore", "--sizes", "10,100", "--seed", "7"], "explore.json"),
        (&["simulate", "--rows", "20", "--trials", "50", "--seed", "11"], "simulate.json"),
        (&["simulate", "--rows", "20", "--trials", "50", "--seed", "11", "--format", "csv"], "simulate_histogram.csv"),
        (&["map", "--graph", "inception-v1", "--iterations", "3", "--seed", "5"], "placement.json"),
        (&["estimate", "--graph", "gnmt-1024", "--cap-sharing", "16", "--format", "csv"], "report.csv"),
        (&["analyze-graph", "--graph", "resnet-152"], "graph_analysis.json"),
    ];
    for (i, (args, file)) in cases.iter().enumerate() {
        let first = d.path().join(format!("a{i}"));
        let second = d.path().join(format!("b{i}"));
        ok(args, &first);
        let cfg = first.join(file);
        let mut again: Vec<&str> = vec![args[0], "--config", cfg.to_str().unwrap()];
        if args.contains(&"--format") {
            again.extend(["--format", "csv"]);
        }
        ok(&again, &second);
        let a = std::fs::read(first.join(file)).unwrap();
        let b = std::fs::read(second.join(file)).unwrap();
        assert!(a == b, "{args:?}: {file} differs on re-run");
    }
}
