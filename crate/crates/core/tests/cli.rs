use std::path::Path;
use std::process::{Command, Output};

fn droprad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_droprad")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

const CONFIG: &str = r#"
[network]
input_dim = 4
widths = [2]
budgets = [1.0, 1.0]
activation = "tanh"
input_bound = 1.0

[estimator]
n_epsilon_draws = 2
n_restarts = 1
ascent_steps = 30
n_outer_replicates = 2

[sweep]
types = ["I", "III"]
rho = [0.5, 1.0]
n = [8]
k = [0, 1]

[train]
epochs = 3
learning_rate = 0.05
loss = { kind = "square", y_bound = 1.0 }
n_train = 16
dropout_type = "II"
rho = 0.5
n_trials = 3
holdout_samples = 500
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn bound_calculator() {
    let v = json(&droprad(&["bound", "--type", "I", "--rho", "0.25", "--n", "100", "--budgets", "1"]));
    assert!((v["complexity_bound"].as_f64().unwrap() - 0.05).abs() < 1e-15);
    let v = json(&droprad(&[
        "bound", "--type", "III", "--rho", "0.5", "--n", "100", "--budgets", "1,1", "--risk", "0.1",
    ]));
    assert!((v["complexity_bound"].as_f64().unwrap() - 0.025).abs() < 1e-15);
    assert_eq!(v["k"], 1);
    assert!(v["generalization"]["total_bound"].as_f64().unwrap() > 0.1);
}

#[test]
fn slope_from_points() {
    let v = json(&droprad(&["slope", "--points", "0.1:0.01,0.5:0.25,1.0:1.0"]));
    assert!((v["fit"]["slope"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    let bad = droprad(&["slope", "--points", "0.1:0.01,0.5:0"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("point 1"));
}

#[test]
fn moments_report() {
    let v = json(&droprad(&["moments", "--x", "1,1", "--power", "2", "--rho", "0.5", "--trials", "1000"]));
    assert_eq!(v["analytic"], 0.5);
    assert_eq!(v["enumerated"], 0.5);
}

#[test]
fn sweep_then_slope_on_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = droprad(&["--config", &cfg, "--seed", "3", "sweep"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
    let path = dir.path().join("rows.csv");
    std::fs::write(&path, &csv).unwrap();
    let v = json(&droprad(&[
        "slope", "--csv", path.to_str().unwrap(), "--column", "bound", "--type", "III", "--k", "1",
    ]));
    assert!((v["fit"]["slope"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(v["points"], 2);
}

#[test]
fn sweep_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let csv = dir.path().join("out.csv");
    let out = droprad(&["--config", &cfg, "--jobs", "2", "--out", csv.to_str().unwrap(), "sweep"]);
    assert!(out.status.success());
    assert!(csv.exists());
    assert!(dir.path().join("out.json").exists());
}

#[test]
fn gap_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let v = json(&droprad(&["--config", &cfg, "gap"]));
    assert_eq!(v["trials"].as_array().unwrap().len(), 3);
    assert_eq!(v["n_holds"], 3);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("n_trials = 3", "n_trials = 3\ntrails = 4"));
    let out = droprad(&["--config", &cfg, "gap"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("trails"));
}

#[test]
fn sweep_needs_a_config() {
    assert!(!droprad(&["sweep"]).status.success());
}
