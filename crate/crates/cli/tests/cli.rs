use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONFIG: &str = r#"
[data]
kind = "sbm"
blocks = 3
nodes_per_block = 30
p_in = 0.2
p_out = 0.02
feature_dim = 6
seed = 1

[partition]
num_clients = 2
mean_fraction = 0.7
fraction_variance = 0.05

[run]
rounds = 3
kappa = 16
out_dir = "out"

[ddpg]
hidden = [8, 8]
state_dim = 2
warmup = 2
batch = 2
episodes = 1
rounds = 3

[bench]
modes = ["full_batch"]
variances = [0.1]
seeds = 1
"#;

fn fedgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedgraph")).args(args).output().unwrap()
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, format!("{CONFIG}{extra}")).unwrap();
    path
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&fedgraph(&["--help"])), 0);
    assert_eq!(code(&fedgraph(&["--version"])), 0);
}

#[test]
fn usage_and_config_errors_exit_with_one() {
    assert_eq!(code(&fedgraph(&[])), 1);
    assert_eq!(code(&fedgraph(&["train"])), 1);
    assert_eq!(code(&fedgraph(&["train", "--config", "/nonexistent/run.toml"])), 1);

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&fedgraph(&["train", "--config", cfg, "--mode", "bogus"])), 1);
    assert_eq!(code(&fedgraph(&["eval", "--config", cfg, "--checkpoint", "missing.bin"])), 1);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[run]\nkappa = 0\n").unwrap();
    assert_eq!(code(&fedgraph(&["train", "--config", bad.to_str().unwrap()])), 1);
}

#[test]
fn every_subcommand_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    let out = dir.path().join("out");

    let o = fedgraph(&["partition", "--config", cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("partition.bin").is_file());

    let o = fedgraph(&["train", "--config", cfg, "--workers", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 3 * 2);

    let ckpt = out.join("weights.bin");
    let o = fedgraph(&["eval", "--config", cfg, "--checkpoint", ckpt.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("accuracy "));

    let alt = dir.path().join("alt");
    let o = fedgraph(&["train-drl", "--config", cfg, "--out", alt.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(alt.join("returns.csv").is_file() && alt.join("controller.bin").is_file());

    let o = fedgraph(&["bench", "--config", cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(out.join("bench.csv")).unwrap().lines().count(), 2);
}

#[test]
fn zero_rounds_give_a_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let text = fs::read_to_string(&cfg).unwrap().replace("rounds = 3\nkappa", "rounds = 0\nkappa");
    fs::write(&cfg, text).unwrap();
    let o = fedgraph(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let metrics = fs::read_to_string(dir.path().join("out/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1);
}

#[test]
fn diverging_training_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "\n[train]\noptimizer = \"sgd\"\nlr = 1e300\n");
    let o = fedgraph(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}
