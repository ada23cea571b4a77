use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BASE: &str = r#"{
  "agent": {"p_bar": 0.75, "lambda": 0.75, "mu": 1.0, "c": 0.5, "B": 5.0, "T": 1.9},
  "model": {"family": "SafeArm", "nu": 1.0, "B_nu": 5.0, "c_nu": 0.5}
}"#;

fn config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn dblab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dblab")).args(args).output().unwrap()
}

fn run(cmd: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut a = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    a.extend_from_slice(extra);
    dblab(&a)
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_writes_schedule() {
    let d = TempDir::new().unwrap();
    let cfg = config(d.path(), "base_set.json", BASE);
    let o = run("solve", &cfg, d.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(d.path().join("schedule.json"));
    assert!((v["tau2"].as_f64().unwrap() - 0.7).abs() <= 1e-3);
    assert_eq!(v["tau1"].as_f64().unwrap(), 0.0);
    assert_eq!(v["structure"], "THINK_DO");
    for k in ["tau3", "q_at_switch", "terminal_belief"] {
        assert!(v[k].is_number(), "{k}");
    }
    assert!((v["thresholds"]["p_hat"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-9);
}

#[test]
fn missing_config_names_the_path() {
    let d = TempDir::new().unwrap();
    let missing = d.path().join("absent.json");
    let o = run("solve", &missing, d.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.json"));
}

#[test]
fn out_of_range_prior_is_a_validation_error() {
    let d = TempDir::new().unwrap();
    let cfg = config(d.path(), "bad.json", &BASE.replace("\"p_bar\": 0.75", "\"p_bar\": 1.2"));
    let o = run("solve", &cfg, d.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("p_bar"));
}

#[test]
fn malformed_json_is_a_validation_error() {
    let d = TempDir::new().unwrap();
    let cfg = config(d.path(), "bad.json", "{\"agent\": ");
    assert_eq!(run("solve", &cfg, d.path(), &[]).status.code(), Some(2));
}

#[test]
fn coarse_grid_is_rejected() {
    let d = TempDir::new().unwrap();
    let cfg = config(d.path(), "base_set.json", BASE);
    assert_eq!(run("verify", &cfg, d.path(), &["--dt", "0.5"]).status.code(), Some(2));
}

#[test]
fn verify_agrees_at_horizon_four() {
    let d = TempDir::new().unwrap();
    let cfg = config(d.path(), "base_set.json", &BASE.replace("\"T\": 1.9", "\"T\": 4.0"));
    let o = run("verify", &cfg, d.path(), &["--dt", "0.001"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(d.path().join("verify.json"));
    assert_eq!(v["pass"], true);
    assert!(v["max_delta"].as_f64().unwrap() <= 5e-3);
    let sw = v["solver_switches"].as_array().unwrap();
    assert_eq!(sw.len(), 1);
    assert!((sw[0].as_f64().unwrap() - 2.8).abs() <= 1e-3);
}

#[test]
fn verify_reports_double_thinking() {
    let d = TempDir::new().unwrap();
    let text = r#"{
      "agent": {"p_bar": 0.8, "lambda": 1.0, "mu": 0.4, "c": 0.5, "B": 9.0, "T": 4.0},
      "model": {"family": "SafeArm", "nu": 0.5, "B_nu": 10.25, "c_nu": 0.0},
      "oracle": {"dt": 0.002, "kind": "two_stage"}
    }"#;
    let cfg = config(d.path(), "double.json", text);
    let o = run("verify", &cfg, d.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(d.path().join("verify.json"));
    assert_eq!(v["thinking_runs"], 2);
    let coarse = v["coarse_intervals"].as_array().unwrap();
    let actions: Vec<&str> = coarse.iter().map(|i| i["action"].as_str().unwrap()).collect();
    assert_eq!(actions, ["Think", "Do", "Think", "Do"]);
    assert!(v["solver_switches"].is_null());
}

#[test]
fn verify_without_feedback_never_reverts() {
    let d = TempDir::new().unwrap();
    let text = BASE.replace("\"T\": 1.9", "\"T\": 4.0").replace("\"nu\": 1.0", "\"nu\": 0.5").replace("}\n}", "},\n  \"oracle\": {\"dt\": 0.001, \"kind\": \"no_feedback\"}\n}");
    let cfg = config(d.path(), "nf.json", &text);
    let o = run("verify", &cfg, d.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(d.path().join("verify.json"));
    assert_eq!(v["think_reverts_to_do"], false);
    let sw = v["oracle_switches"].as_array().unwrap();
    assert_eq!(sw.len(), 1);
    assert!((sw[0].as_f64().unwrap() - 1.474).abs() < 0.01);
}

#[test]
fn sweep_csv_is_ordered_and_monotone() {
    let d = TempDir::new().unwrap();
    let cfg = config(d.path(), "base_set.json", BASE);
    let o = run("sweep", &cfg, d.path(), &["--grid", "2:8:0.5", "--variable", "T"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(d.path().join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "grid_value,tau1,tau2,tau3,structure,p_total,p_do_initial,p_think,p_hailmary,p_total_backloaded,expected_work");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').filter(|f| f.parse::<f64>().is_ok()).map(|f| f.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 13);
    for w in rows.windows(2) {
        assert!(w[1][0] > w[0][0]);
        assert!(w[1][1] >= w[0][1] - 1e-9, "tau1 fell");
        assert!(w[1][2] >= w[0][2] - 1e-9, "tau2 fell");
    }
}

#[test]
fn simulate_is_reproducible() {
    let d = TempDir::new().unwrap();
    let cfg = config(d.path(), "base_set.json", BASE);
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    for out in [&a, &b] {
        let o = run("simulate", &cfg, out, &["--reps", "20000", "--seed", "11"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let x = fs::read(a.join("simulate.csv")).unwrap();
    assert_eq!(x, fs::read(b.join("simulate.csv")).unwrap());
    let text = String::from_utf8(x).unwrap();
    assert_eq!(text.lines().next().unwrap(), "estimate,std_err,reps,seed");
    assert!(text.lines().nth(1).unwrap().ends_with(",20000,11"));
}

#[test]
fn trajectory_starts_with_nothing_done() {
    let d = TempDir::new().unwrap();
    let cfg = config(d.path(), "base_set.json", BASE);
    let o = run("trajectory", &cfg, d.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(d.path().join("trajectory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,p_progress,p_solution,p_neither");
    assert_eq!(lines.next().unwrap(), "0,0,0,1");
}

#[test]
fn unwritable_output_exits_four() {
    let d = TempDir::new().unwrap();
    let cfg = config(d.path(), "base_set.json", BASE);
    let blocker = d.path().join("file");
    fs::write(&blocker, "x").unwrap();
    for cmd in ["trajectory", "sweep", "solve"] {
        let o = run(cmd, &cfg, &blocker.join("sub"), &["--grid", "1:2:0.5"]);
        assert_eq!(o.status.code(), Some(4), "{cmd}");
    }
}

#[test]
fn canonical_config_round_trips() {
    let d = TempDir::new().unwrap();
    let cfg = config(d.path(), "base_set.json", BASE);
    let first = dblab(&["config", "--config", cfg.to_str().unwrap()]);
    assert!(first.status.success());
    let again = config(d.path(), "canon.json", &String::from_utf8(first.stdout.clone()).unwrap());
    let second = dblab(&["config", "--config", again.to_str().unwrap()]);
    assert_eq!(first.stdout, second.stdout);
}
