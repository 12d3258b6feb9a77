use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SINGLE: &str = r#"{
  "system": {
    "processes": [{"rate": 9, "recovery": {"kind": "exponential_decay", "rate": 1}, "weight": 1}],
    "service": {"kind": "exponential", "mean": 1}
  }
}"#;

const TWO: &str = r#"{
  "system": {
    "processes": [
      {"rate": 6, "recovery": {"kind": "exponential_decay", "rate": 0.1}, "weight": 0.1},
      {"rate": 6, "recovery": {"kind": "exponential_decay", "rate": 50}, "weight": 0.1}
    ],
    "service": {"kind": "exponential", "mean": 1.5}
  },
  "seed": 4
}"#;

// minimum of the closed-form AoI over a 1e-4 grid, computed independently
const GRID_AOI_MIN: f64 = 1.9406588897;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_stampwait"));
    c.env_remove("STAMPWAIT_OUTPUT_DIR");
    c
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn run(c: &mut Command) -> Output {
    c.output().expect("binary runs")
}

fn json(o: &Output) -> serde_json::Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn solve_single_matches_grid_optimum() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.json", SINGLE);
    let v = json(&run(bin().args(["solve-single", "--config", &cfg])));
    assert!((v["aoi"].as_f64().unwrap() - GRID_AOI_MIN).abs() < 1e-6);
    assert_eq!(v["method"], "line_search");
    assert!(v.get("curve").is_none());

    let v = json(&run(bin().args(["solve-single", "-c", &cfg, "--tau", "0.3", "--emit-curve"])));
    assert_eq!(v["method"], "dinkelbach");
    assert!(v["err"].as_f64().unwrap() <= 0.3 + 1e-8);
    assert_eq!(v["curve"].as_array().unwrap().len(), 201);
}

#[test]
fn solve_single_infeasible_tau() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.json", SINGLE);
    let o = run(bin().args(["solve-single", "--config", &cfg, "--tau", "0"]));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasible"));
}

#[test]
fn config_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let bad = write_config(d.path(), "bad.json", "{ \"system\": ");
    assert_eq!(run(bin().args(["solve-single", "--config", &bad])).status.code(), Some(2));
    let typo = write_config(d.path(), "typo.json", r#"{"sead": 1}"#);
    assert_eq!(run(bin().args(["solve-single", "--config", &typo])).status.code(), Some(2));
    let two = write_config(d.path(), "two.json", TWO);
    assert_eq!(run(bin().args(["solve-single", "--config", &two])).status.code(), Some(2));
    let missing = d.path().join("nope.json");
    let o = run(bin().args(["solve-single", "--config", missing.to_str().unwrap()]));
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn simulate_usage_errors() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.json", SINGLE);
    let o = run(bin().args(["simulate", "--config", &cfg, "--policy", "single", "--epochs", "0"]));
    assert_eq!(o.status.code(), Some(2));
    let o = run(bin().args(["simulate", "--config", &cfg, "--policy", "as"]));
    assert_eq!(o.status.code(), Some(2));
}

fn parse_metrics(o: &Output) -> Vec<(String, String, f64, f64, f64)> {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "quantity,process,estimate,std_error,ci_low,ci_high");
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].to_string(),
                f[1].to_string(),
                f[2].parse().unwrap(),
                f[4].parse().unwrap(),
                f[5].parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn simulate_single_ci_covers_closed_form_and_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.json", SINGLE);
    let args = ["simulate", "--config", &cfg, "--policy", "single", "--epochs", "1000000", "--seed", "12"];
    let a = run(bin().args(args));
    let b = run(bin().args(args));
    assert_eq!(a.stdout, b.stdout);
    let rows = parse_metrics(&a);
    let aoi = rows.iter().find(|r| r.0 == "aoi").unwrap();
    assert!(aoi.3 <= 2.011111111111 && 2.011111111111 <= aoi.4, "{aoi:?}");
    assert!(rows.iter().any(|r| r.0 == "objective" && r.1 == "all"));
}

#[test]
fn simulate_trace_and_schedule() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "two.json", TWO);
    let trace = d.path().join("sub/trace.csv");
    let o = run(bin().args([
        "simulate",
        "--config",
        &cfg,
        "--policy",
        "as",
        "--schedule",
        "2,1",
        "--epochs",
        "50",
        "--trace",
        trace.to_str().unwrap(),
    ]));
    let rows = parse_metrics(&o);
    assert_eq!(rows.iter().filter(|r| r.0 == "aoi").count(), 2);
    let text = fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("process,i,S,S_prime,D,Y,X,W,L,start_age\n"));
    assert_eq!(text.lines().count(), 1 + 150);
}

#[test]
fn optimize_commands() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "two.json", TWO);
    let v = json(&run(bin().args(["optimize-as", "--config", &cfg, "--m-max", "6"])));
    assert_eq!(v["report"]["mode"], "analytic");
    assert_eq!(v["policy"]["m"].as_array().unwrap().len(), 2);
    let v = json(&run(bin().args(["optimize-rr", "--config", &cfg, "--epochs", "2000", "--grid", "6"])));
    assert_eq!(v["report"]["mode"], "simulated");
    assert!(v["policy"]["threshold"].as_f64().unwrap() >= 0.0);
    let single = write_config(d.path(), "c.json", SINGLE);
    let v = json(&run(bin().args(["optimize-rr", "--config", &single])));
    assert!((v["sum_aoi"].as_f64().unwrap() - GRID_AOI_MIN).abs() < 1e-5);
}

#[test]
fn experiment_fig3_and_fig5() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("nested/out");
    let o = run(bin().args(["experiment", "--fig", "3", "--out-dir", out.to_str().unwrap()]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("fig3.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 25 * 3 + 3);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("fig3.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["rows"], 78);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert!(m["version"].is_string());

    // default directory from the environment
    let env_dir = d.path().join("from_env");
    let o = run(bin().args(["experiment", "--fig", "5"]).env("STAMPWAIT_OUTPUT_DIR", &env_dir));
    assert!(o.status.success());
    let csv = fs::read_to_string(env_dir.join("fig5.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 7);
    assert!(csv.starts_with("alpha1,m1,m2,objective\n"));
}

#[test]
fn experiment_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    for dir in [&a, &b] {
        let o = run(bin().args(["experiment", "--fig", "5", "--seed", "9", "--out-dir", dir.to_str().unwrap()]));
        assert!(o.status.success());
    }
    assert_eq!(fs::read(a.join("fig5.csv")).unwrap(), fs::read(b.join("fig5.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("fig5.manifest.json")).unwrap(),
        fs::read(b.join("fig5.manifest.json")).unwrap()
    );
}

#[test]
fn experiment_unwritable_dir_is_io_error() {
    let d = tempfile::tempdir().unwrap();
    let file = d.path().join("plain");
    fs::write(&file, "x").unwrap();
    let o = run(bin().args(["experiment", "--fig", "5", "--out-dir", file.join("sub").to_str().unwrap()]));
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn threads_flag_accepted() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.json", SINGLE);
    let o = run(bin().args(["--threads", "1", "solve-single", "--config", &cfg]));
    assert!(o.status.success());
    assert_eq!(run(bin().args(["--threads", "0", "solve-single", "--config", &cfg])).status.code(), Some(2));
}
