use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hatcc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hatcc")).args(args).output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = hatcc(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn marginals(v: &Value) -> Vec<Vec<f64>> {
    serde_json::from_value(v["marginals"].clone()).unwrap()
}

#[test]
fn four_cycle_file_matches_the_library_instance() {
    let dir = tempfile::tempdir().unwrap();
    let f = path(dir.path(), "odd.json");
    assert_eq!(hatcc(&["gen", "four-cycle", "--parity", "odd", "--out", &f]).status.code(), Some(0));
    let g: hatcc::FactorGraphF64 = hatcc::io::load(&f).unwrap();
    assert_eq!(g, hatcc::generators::four_cycle(true));
    assert!(dir.path().join("odd.truth.json").exists());
}

#[test]
fn generation_is_deterministic() {
    let args =
        ["gen", "zk", "--k", "2", "--topology", "cycle", "--n", "6", "--eta", "0.1", "--eps", "0.5", "--seed", "7"];
    let a = hatcc(&args);
    let b = hatcc(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = hatcc(&[
        "gen",
        "zk",
        "--k",
        "2",
        "--topology",
        "cycle",
        "--n",
        "6",
        "--eta",
        "0.1",
        "--eps",
        "0.5",
        "--seed",
        "8",
    ]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(hatcc(&["gen", "zk", "--topology", "cycle", "--n", "6"]).status.code(), Some(2));
    assert_eq!(hatcc(&["gen", "zk", "--k", "2", "--topology", "cycle"]).status.code(), Some(2));
    assert_eq!(
        hatcc(&["gen", "zk", "--k", "2", "--topology", "cycle", "--n", "5", "--eps", "2"]).status.code(),
        Some(2)
    );
    assert_eq!(hatcc(&["infer"]).status.code(), Some(2));
    assert_eq!(hatcc(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(hatcc(&["--help"]).status.code(), Some(0));
}

#[test]
fn failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hatcc(&["infer", &path(dir.path(), "missing.json")]).status.code(), Some(1));
    let bad = path(dir.path(), "bad.json");
    std::fs::write(&bad, r#"{"semiring":"sum_product","variables":[{"id":0,"cardinality":2}],"factors":[{"id":0,"scope":[0],"table":[1]}]}"#).unwrap();
    let out = hatcc(&["infer", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("table"));
}

#[test]
fn unsat_is_a_result() {
    let dir = tempfile::tempdir().unwrap();
    let f = path(dir.path(), "odd.json");
    hatcc(&["gen", "four-cycle", "--parity", "odd", "--out", &f]);
    let v = ok_json(&["infer", &f, "--method", "hatcc"]);
    assert_eq!(v["status"], "unsat");
    assert_eq!(v["certificate"]["holonomy_rows"], serde_json::json!(["01", "10"]));
    assert_eq!(ok_json(&["infer", &f, "--method", "oracle"])["status"], "unsat");
}

#[test]
fn methods_agree_on_trees() {
    let dir = tempfile::tempdir().unwrap();
    let f = path(dir.path(), "tree.json");
    hatcc(&["gen", "tree", "--n", "9", "--seed", "3", "--out", &f]);
    let reference = marginals(&ok_json(&["infer", &f, "--method", "oracle"]));
    for m in ["bp", "hatcc"] {
        let got = marginals(&ok_json(&["infer", &f, "--method", m]));
        for (p, q) in got.iter().zip(&reference) {
            let tv: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
            assert!(tv <= 1e-10, "{m}: {tv}");
        }
    }
    let d = ok_json(&["diagnose", &f]);
    assert_eq!(d["chords"], serde_json::json!([]));
}

#[test]
fn bp_reports_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let f = path(dir.path(), "grid.json");
    hatcc(&["gen", "grid", "--rows", "3", "--cols", "3", "--seed", "1", "--out", &f]);
    let v = ok_json(&["infer", &f, "--method", "bp", "--max-iters", "200", "--threshold", "1e-6"]);
    assert_eq!(v["converged"], true);
    assert!(v["iterations"].as_u64().unwrap() <= 200);
    assert!(v.get("timings").is_none());
}

#[test]
fn diagnose_reports_holonomy_and_dot() {
    let dir = tempfile::tempdir().unwrap();
    let f = path(dir.path(), "odd.json");
    let dot = path(dir.path(), "odd.dot");
    hatcc(&["gen", "four-cycle", "--parity", "odd", "--out", &f]);
    let v = ok_json(&["diagnose", &f, "--dot", &dot]);
    assert_eq!(v["chords"][0]["rows"], serde_json::json!(["01", "10"]));
    assert_eq!(v["nontrivial"], 1);
    let text = std::fs::read_to_string(&dot).unwrap();
    assert!(text.starts_with("graph") && text.contains("dashed"));
}

#[test]
fn checksum_is_stable_and_structural() {
    let dir = tempfile::tempdir().unwrap();
    let f = path(dir.path(), "zk.json");
    hatcc(&[
        "gen",
        "zk",
        "--k",
        "3",
        "--topology",
        "grid",
        "--rows",
        "2",
        "--cols",
        "3",
        "--eps",
        "1",
        "--seed",
        "4",
        "--out",
        &f,
    ]);
    let a = hatcc(&["infer", &f, "--method", "sectors", "--checksum"]);
    let b = hatcc(&["infer", &f, "--method", "sectors", "--checksum", "--timings"]);
    assert_eq!(a.stdout, b.stdout);
    let hex = String::from_utf8(a.stdout).unwrap();
    assert_eq!(hex.trim().len(), 64);
    let full_a = hatcc(&["infer", &f, "--method", "hatcc"]);
    let full_b = hatcc(&["infer", &f, "--method", "hatcc"]);
    assert_eq!(full_a.stdout, full_b.stdout);
}

#[test]
fn sweep_rows_and_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let csv = path(dir.path(), "sweep.csv");
    let args = [
        "sweep",
        "--family",
        "zk",
        "--topology",
        "cycle",
        "--n",
        "6",
        "--eps",
        "0,0.25,0.5",
        "--seeds",
        "10",
        "--methods",
        "bp,sectors",
        "--out",
        &csv,
    ];
    let out = hatcc(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(&csv).unwrap();
    let rows: Vec<hatcc::metrics::MetricsRow> = reader.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 60);
    let clean: Vec<_> = rows.iter().filter(|r| r.epsilon == 0.0 && r.method == "bp").collect();
    assert_eq!(clean.len(), 10);
    assert!(clean.iter().all(|r| r.converged));
    let mean = |e: f64| {
        let sel: Vec<_> = rows.iter().filter(|r| r.epsilon == e).collect();
        sel.iter().map(|r| r.nontrivial_generators as f64).sum::<f64>() / sel.len() as f64
    };
    assert!(mean(0.0) <= mean(0.25) && mean(0.25) <= mean(0.5));

    let first = std::fs::read(&csv).unwrap();
    let again = Command::new(env!("CARGO_BIN_EXE_hatcc")).args(args).env("HATCC_THREADS", "1").output().unwrap();
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(std::fs::read(&csv).unwrap(), first);
}

#[test]
fn thread_variable_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_hatcc"))
        .args(["gen", "four-cycle", "--parity", "even"])
        .env("HATCC_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_scores_against_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let f = path(dir.path(), "zk.json");
    hatcc(&["gen", "zk", "--k", "2", "--topology", "cycle", "--n", "7", "--eta", "0.2", "--seed", "2", "--out", &f]);
    let v = ok_json(&["compare", &f]);
    assert_eq!(v["reference"], "oracle");
    let rows = v["methods"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert!(r["mean_tv"].as_f64().unwrap() < 1e-8, "{r}");
    }
}
