use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const QUICK: &str = "[identifier]\nepochs = 3000\n\n[simulation]\nduration = 4.0\n";

fn mmaflc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmaflc")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn path(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn trained(dir: &TempDir) -> (String, String) {
    let cfg = write_config(dir.path(), QUICK);
    let out = path(&dir.path().join("out"));
    let o = mmaflc(&["train", "--config", &cfg, "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    (cfg, out)
}

#[test]
fn training_is_deterministic_for_a_seed() {
    let dir = TempDir::new().unwrap();
    let (cfg, out) = trained(&dir);
    let other = path(&dir.path().join("again"));
    assert!(mmaflc(&["train", "--config", &cfg, "--out", &other]).status.success());
    let read = |d: &str, f: &str| std::fs::read_to_string(Path::new(d).join(f)).unwrap();
    assert_eq!(read(&out, "weights.txt"), read(&other, "weights.txt"));
    assert_eq!(read(&out, "loss.csv"), read(&other, "loss.csv"));
    assert_eq!(read(&out, "loss.csv").lines().count(), 3001);
}

#[test]
fn malformed_config_exits_1_and_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    for text in ["[plant]\nmass = 2.0\n", "[plant\n", "[simulation]\ndt = -1.0\n"] {
        let cfg = write_config(dir.path(), text);
        let o = mmaflc(&["train", "--config", &cfg, "--out", &path(&out)]);
        assert_eq!(o.status.code(), Some(1), "{text}");
        assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
        assert!(!out.exists());
    }
}

#[test]
fn missing_weights_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let o = mmaflc(&["run", "--config", &cfg, "--out", &path(dir.path()), "--kinds", "aflc"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("weights"));
}

#[test]
fn baseline_runs_without_weights() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let out = dir.path().join("out");
    let o = mmaflc(&["run", "--config", &cfg, "--out", &path(&out), "--kinds", "baseline-fuzzy"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("completed="));
    for f in ["steer.csv", "drive.csv", "metrics.txt", "metrics.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(out.join("drive.csv")).unwrap();
    assert!(csv.lines().next().unwrap().starts_with("t,"));
    assert_eq!(csv.lines().count(), 1 + 41);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(json["kind"], "baseline-fuzzy");
    assert!(json["metrics"]["completed"].is_boolean());
}

#[test]
fn compare_needs_two_kinds() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let o = mmaflc(&["compare", "--config", &cfg, "--out", &path(dir.path()), "--kinds", "baseline-fuzzy"]);
    assert_eq!(o.status.code(), Some(1));
    let o = mmaflc(&["compare", "--config", &cfg, "--out", &path(dir.path()), "--kinds", "warp-drive,aflc"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compare_ranks_every_kind_and_keeps_duplicates_apart() {
    let dir = TempDir::new().unwrap();
    let (cfg, out) = trained(&dir);
    let o = mmaflc(&["compare", "--config", &cfg, "--out", &out, "--kinds", "aflc,mm-aflc,aflc"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(Path::new(&out).join("compare.csv")).unwrap();
    let rows: Vec<_> = table.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("rank,kind,"));
    for d in ["aflc", "mm-aflc", "aflc-2"] {
        assert!(Path::new(&out).join(d).join("metrics.txt").exists(), "{d}");
    }
    let a = std::fs::read_to_string(Path::new(&out).join("aflc/drive.csv")).unwrap();
    let b = std::fs::read_to_string(Path::new(&out).join("aflc-2/drive.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sweep_writes_one_row_per_value_and_kind() {
    let dir = TempDir::new().unwrap();
    let (cfg, out) = trained(&dir);
    let o = mmaflc(&[
        "sweep", "--config", &cfg, "--out", &out, "--param", "plant.friction_coeff", "--values", "1,2,3",
        "--kinds", "baseline-fuzzy,aflc",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(Path::new(&out).join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    assert!(csv.lines().skip(1).all(|l| l.starts_with("plant.friction_coeff,")));

    let o = mmaflc(&["sweep", "--config", &cfg, "--out", &out, "--param", "plant.mass", "--values", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = mmaflc(&["sweep", "--config", &cfg, "--out", &out, "--param", "plant.friction_coeff", "--values"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn plotdata_keeps_every_logged_point() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let out = dir.path().join("out");
    assert!(mmaflc(&["run", "--config", &cfg, "--out", &path(&out), "--kinds", "baseline-fuzzy"]).status.success());
    let plots = dir.path().join("plots");
    let o = mmaflc(&["plotdata", &path(&out.join("drive.csv")), "--out", &path(&plots)]);
    assert!(o.status.success());
    let lines = |f: &str| std::fs::read_to_string(plots.join(f)).unwrap().lines().count();
    assert_eq!(lines("drive_path.csv"), 1 + 41);
    assert_eq!(lines("drive_error.csv"), 1 + 41);

    let o = mmaflc(&["plotdata", &path(&dir.path().join("nope.csv")), "--out", &path(&plots)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn seed_flag_changes_the_bank() {
    let dir = TempDir::new().unwrap();
    let (cfg, out) = trained(&dir);
    let run = |seed: &str| {
        let o = mmaflc(&["run", "--config", &cfg, "--out", &out, "--kinds", "mm-aflc", "--seed", seed]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(Path::new(&out).join("steer.csv")).unwrap()
    };
    let a = run("3");
    assert_eq!(a, run("3"));
    assert_ne!(a, run("4"));
}

#[test]
fn aborted_runs_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir.path().join("out"));
    let cfg = write_config(dir.path(), "[identifier]\nepochs = 10\nalpha = 50.0\n");
    assert_eq!(mmaflc(&["train", "--config", &cfg, "--out", &out]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "[plant]\nfriction_coeff = 1e6\n\n[simulation]\nduration = 2.0\n");
    let o = mmaflc(&["run", "--config", &cfg, "--out", &out, "--kinds", "baseline-fuzzy"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("non-finite"));
}
