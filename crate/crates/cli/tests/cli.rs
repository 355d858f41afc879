use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const TWO_STEP: &str = r#"{"s0": 100.0, "steps": [
 {"a": 0.5, "vol": {"kind": "constant", "sigma": 1.0}, "shocks": [{"eps": -0.5, "prob": 0.5}, {"eps": 0.5, "prob": 0.5}]},
 {"a": 0.5, "vol": {"kind": "constant", "sigma": 1.0}, "shocks": [{"eps": -0.5, "prob": 0.5}, {"eps": 0.5, "prob": 0.5}]}
]}"#;

const THREE_ATOM: &str = r#"{"s0": 100.0, "steps": [
 {"a": 0.6, "vol": {"kind": "constant", "sigma": 0.4}, "shocks": [{"eps": -1.0, "prob": 0.3}, {"eps": 0.2, "prob": 0.5}, {"eps": 1.5, "prob": 0.2}]},
 {"a": 0.6, "vol": {"kind": "constant", "sigma": 0.4}, "shocks": [{"eps": -1.0, "prob": 0.3}, {"eps": 0.2, "prob": 0.5}, {"eps": 1.5, "prob": 0.2}]}
]}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_superhedge"))
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn closed_call_on_two_step_model() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.json", TWO_STEP);
    let out = dir.path().join("r.json");
    let o = run(&["price", "--model", s(&model), "--payoff", "call", "--strike", "30", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out);
    assert_eq!(r["value"], 75.0);
    assert_eq!(r["interval"]["lower"], 70.0);
    assert_eq!(r["interval"]["upper"], 75.0);
    assert_eq!(r["method"], "closed");
}

#[test]
fn exhaustive_matches_closed_form_on_three_atom_model() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.json", THREE_ATOM);
    let closed = dir.path().join("c.json");
    let search = dir.path().join("s.json");
    let args = ["--model", s(&model), "--payoff", "put", "--strike", "90"];
    assert!(run(&[&["price"][..], &args, &["--out", s(&closed)]].concat()).status.success());
    let o = run(&[&["price"][..], &args, &["--method", "exhaustive", "--out", s(&search)]].concat());
    assert!(o.status.success());
    let c = json(&closed)["value"].as_f64().unwrap();
    let e = json(&search)["value"].as_f64().unwrap();
    assert!(e <= c + 1e-9 && e >= 0.0, "exhaustive {e} vs closed {c}");
    assert!(json(&search)["argmax_selection"].is_array());
}

#[test]
fn interval_report_has_both_ends() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.json", TWO_STEP);
    let out = dir.path().join("i.json");
    let o = run(&["interval", "--model", s(&model), "--payoff", "put", "--strike", "50", "--out", s(&out)]);
    assert!(o.status.success());
    let r = json(&out);
    assert_eq!(r["interval"]["lower"], 0.0);
    assert_eq!(r["interval"]["upper"], 25.0);
}

#[test]
fn verify_passes_on_random_alphas() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.json", THREE_ATOM);
    let out = dir.path().join("v.json");
    let dens = dir.path().join("d.json");
    let o = run(&["verify", "--model", s(&model), "--alphas", "42", "--out", s(&out), "--density-out", s(&dens)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(json(&dens).as_array().is_some_and(|a| !a.is_empty()));
}

#[test]
fn estimate_on_short_sample() {
    let dir = TempDir::new().unwrap();
    let csv = write(&dir, "p.csv", "t,price\n0,100\n1,80\n2,120\n3,90\n");
    let model = dir.path().join("m.json");
    let report = dir.path().join("e.json");
    let o = run(&["estimate", "--prices", s(&csv), "--out", s(&model), "--report", s(&report)]);
    assert!(o.status.success());
    let m = json(&model);
    let a: Vec<f64> = m["steps"].as_array().unwrap().iter().map(|st| st["a"].as_f64().unwrap()).collect();
    assert!((a[0] - 0.2).abs() < 1e-15);
    assert_eq!(&a[1..], &[0.0, 0.0]);

    // the estimated model prices directly
    let o = run(&["price", "--model", s(&model), "--payoff", "put", "--strike", "100"]);
    assert!(o.status.success());
}

#[test]
fn custom_statistic_needs_table() {
    let dir = TempDir::new().unwrap();
    let csv = write(&dir, "p.csv", "t,price\n0,100\n1,80\n2,120\n3,90\n");
    let o = run(&["estimate", "--prices", s(&csv), "--statistic", "custom"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["estimate", "--prices", s(&csv), "--statistic", "custom", "--table", "1,0.9,0.8"]);
    assert!(o.status.success());
}

fn spot_surface() -> String {
    let g = |e: f64| 1.0 + 0.5 * e.exp_m1();
    let (d, u) = (g(-0.5), g(0.5));
    let mut nodes = vec![serde_json::json!({"history": [], "value": 100.0})];
    for (i, x) in [d, u].into_iter().enumerate() {
        nodes.push(serde_json::json!({"history": [i], "value": 100.0 * x}));
        for (j, y) in [d, u].into_iter().enumerate() {
            nodes.push(serde_json::json!({"history": [i, j], "value": 100.0 * x * y}));
        }
    }
    serde_json::json!({"floor": 1.0, "nodes": nodes}).to_string()
}

#[test]
fn decompose_martingale_surface() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.json", TWO_STEP);
    let surf = write(&dir, "s.json", &spot_surface());
    let out = dir.path().join("d.json");
    let o = run(&["decompose", "--model", s(&model), "--surface", s(&surf), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out);
    assert_eq!(r["verification"]["passed"], true);
    // f = S is a martingale, so no consumption anywhere
    for node in r["nodes"].as_array().unwrap() {
        for atom in node["atoms"].as_array().unwrap() {
            assert!(atom["g"].as_f64().unwrap().abs() < 1e-10);
        }
    }
}

#[test]
fn decompose_rejects_incomplete_surface() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.json", TWO_STEP);
    let surface = r#"{"floor": 1.0, "nodes": [
      {"history": [], "value": 100},
      {"history": [0], "value": 80},
      {"history": [1], "value": 130}
    ]}"#;
    let surf = write(&dir, "s.json", surface);
    let out = dir.path().join("d.json");
    let o = run(&["decompose", "--model", s(&model), "--surface", s(&surf), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn unknown_flag_exits_one() {
    let o = run(&["price", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn invalid_model_exits_one() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.json", &TWO_STEP.replace("\"a\": 0.5", "\"a\": 1.5"));
    let o = run(&["price", "--model", s(&model), "--payoff", "call", "--strike", "30"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn budget_overflow_exits_two() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.json", TWO_STEP);
    let o = run(&["price", "--model", s(&model), "--payoff", "call", "--strike", "30", "--method", "exhaustive", "--cap", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.json", THREE_ATOM);
    let mut bodies = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("r{i}.json"));
        let o = run(&[
            "price", "--model", s(&model), "--payoff", "asian_call", "--strike", "95", "--method", "grid",
            "--grid-points", "9", "--out", s(&out),
        ]);
        assert!(o.status.success());
        bodies.push(fs::read(&out).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn oracle_random_model_round_trips() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("m.json");
    assert!(run(&["oracle", "random-model", "--seed", "7", "--out", s(&model)]).status.success());
    let o = run(&["oracle", "sup", "--model", s(&model), "--payoff", "call", "--strike", "100"]);
    assert!(o.status.success());
    let o = run(&["verify", "--model", s(&model), "--alphas", "3"]);
    assert!(o.status.success());
}
