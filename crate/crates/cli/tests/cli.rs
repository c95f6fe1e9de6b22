use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reachstl"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("reachstl-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> i32 {
    let out = bin().args(args).output().unwrap();
    out.status.code().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_problem(dir: &Path, spec: Option<&str>) -> PathBuf {
    let mut p = json!({
        "A": [[-1.0]],
        "B": [[1.0]],
        "X0": {"c": [1.0], "G": [[0.1]]},
        "U": {"c": [0.0], "G": [[0.05]]},
    });
    if let Some(s) = spec {
        p["spec"] = json!(s);
    }
    let path = dir.join("p.json");
    std::fs::write(&path, p.to_string()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn safe_verdict_schema() {
    let dir = workdir("safe");
    let p = write_problem(&dir, Some("F[0,3] x1 < 0.3"));
    let out = dir.join("out");
    assert_eq!(run(&["verify", "--problem", s(&p), "--out", s(&out), "--seed", "3", "--samples", "50"]), 0);
    let v = read_json(&out.join("verdict.json"));
    assert_eq!(v["result"], "safe");
    for key in ["iterations", "dt_final", "kappa", "wall_time_ms"] {
        assert!(v[key].is_number(), "{key}");
    }
    assert_eq!(v["monte_carlo"]["violations"], 0);
    assert!(!out.join("counterexample.csv").exists());
}

#[test]
fn unsafe_run_writes_counterexample_inside_reach_sets() {
    let dir = workdir("unsafe");
    let p = write_problem(&dir, None);
    let out = dir.join("out");
    let code = run(&["verify", "--problem", s(&p), "--spec", "F[0,1] x1 < 0.3", "--out", s(&out), "--emit-reach"]);
    assert_eq!(code, 1);
    assert_eq!(read_json(&out.join("verdict.json"))["result"], "unsafe");
    let csv = std::fs::read_to_string(out.join("counterexample.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x1,u1"));
    let reach = read_json(&out.join("reach.json"));
    let steps = reach["steps"].as_array().unwrap();
    let mut checked = 0;
    for line in lines {
        let row: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let (t, x) = (row[0], row[1]);
        let step = steps
            .iter()
            .find(|st| st["t_start"].as_f64().unwrap() <= t + 1e-12 && t <= st["t_end"].as_f64().unwrap() + 1e-12)
            .expect("time covered");
        let (lo, hi) = (step["lo"][0].as_f64().unwrap(), step["hi"][0].as_f64().unwrap());
        assert!(lo - 1e-9 <= x && x <= hi + 1e-9, "t = {t}: {x} outside [{lo}, {hi}]");
        checked += 1;
    }
    assert!(checked > 1);
}

#[test]
fn wholeset_baseline_on_corridor() {
    let dir = workdir("corridor");
    let p = dir.join("corridor.json");
    assert_eq!(run(&["bench", "corridor", "--out", s(&p)]), 0);
    let out = dir.join("out");
    let code = run(&["verify", "--problem", s(&p), "--baseline", "wholeset", "--emit-reach", "--shadow", "1,2", "--out", s(&out)]);
    assert_eq!(code, 0);
    let v = read_json(&out.join("verdict.json"));
    assert_eq!(v["result"], "safe");
    assert_eq!(v["baseline"]["result"], "unsafe");
    let reach = read_json(&out.join("reach.json"));
    let shadow = &reach["steps"][0]["shadows"][0];
    assert_eq!(shadow["dims"], json!([1, 2]));
    assert!(shadow["vertices"].as_array().unwrap().len() >= 4);
}

#[test]
fn falsify_only_reports_unknown_for_safe_problem() {
    let dir = workdir("falsify");
    let p = write_problem(&dir, Some("F[0,3] x1 < 0.3"));
    let out = dir.join("out");
    assert_eq!(run(&["falsify-only", "--problem", s(&p), "--max-iter", "3", "--out", s(&out)]), 2);
    let v = read_json(&out.join("verdict.json"));
    assert_eq!(v["result"], "unknown");
    assert_eq!(v["mode"], "falsify-only");
}

#[test]
fn predict_writes_occupancy() {
    let dir = workdir("predict");
    let p = dir.join("traffic.json");
    assert_eq!(run(&["bench", "traffic", "--out", s(&p)]), 0);
    let out = dir.join("out");
    assert_eq!(run(&["predict", "--problem", s(&p), "--out", s(&out)]), 0);
    let occ = read_json(&out.join("occupancy.json"));
    let steps = occ["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 20);
    let z = &steps[0]["zonotope"];
    assert_eq!(z["c"].as_array().unwrap().len(), 4);
    assert_eq!(z["G"].as_array().unwrap().len(), 4);
    let poly = &steps[0]["polytopes"][0];
    let factor_dim = occ["factor_dim"].as_u64().unwrap() as usize;
    assert_eq!(poly["C"][0].as_array().unwrap().len(), factor_dim);
    assert_eq!(poly["C"].as_array().unwrap().len(), poly["d"].as_array().unwrap().len());
}

#[test]
fn bench_output_is_canonical() {
    let dir = workdir("bench");
    for name in reachstl::problem::BENCHMARK_NAMES {
        let a = dir.join(format!("{name}.json"));
        assert_eq!(run(&["bench", name, "--out", s(&a)]), 0);
        let b = dir.join(format!("{name}-copy.json"));
        reachstl::problem::save_problem(&b, &reachstl::problem::load_problem(&a).unwrap()).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{name}");
    }
    let out = bin().args(["bench", "heat1d", "--params", r#"{"n": 5}"#]).output().unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["A"].as_array().unwrap().len(), 5);
}

#[test]
fn error_exit_codes() {
    let dir = workdir("errors");
    let p = write_problem(&dir, Some("x1 < 2"));
    let out = dir.join("out");
    assert_eq!(run(&["verify", "--problem", s(&dir.join("missing.json")), "--out", s(&out)]), 4);
    assert_eq!(run(&["verify", "--problem", s(&p), "--spec", "x2 < 1", "--out", s(&out)]), 3);
    assert_eq!(run(&["verify", "--problem", s(&p), "--spec", "F[0,1 x1", "--out", s(&out)]), 3);
    assert_eq!(run(&["verify", "--problem", s(&p), "--epsilon", "-1", "--out", s(&out)]), 3);
    assert_eq!(run(&["verify"]), 3);
    assert_eq!(run(&["bench", "nosuch"]), 3);
    assert_eq!(run(&["bench", "heat1d", "--params", "{\"n\": 1}"]), 3);

    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"A": [[0.0]], "B": [[1.0], [2.0]], "X0": {"c": [0.0], "G": [[1.0]]}, "U": {"c": [0.0], "G": [[1.0]]}, "spec": "x1 < 1"}"#).unwrap();
    let o = bin().args(["verify", "--problem", s(&bad), "--out", s(&out)]).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("B"));
}
