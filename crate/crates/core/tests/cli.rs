// Exit codes and argument handling of the `rvae` binary.

use std::path::Path;
use std::process::{Command, Output};

fn rvae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rvae")).args(args).env_remove("RVAE_SEED").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn make_data(dir: &Path, dim: usize) -> String {
    let out = rvae(&["make-data", "--out", s(dir), "--set", "data.n=60", "--set", &format!("data.dim={dim}")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("train.manifest").to_str().unwrap().to_string()
}

fn train(dir: &Path, manifest: &str, extra: &[&str]) -> Output {
    let data = format!("data.train={manifest}");
    let mut args = vec![
        "train", "--out", s(dir), "--set", &data, "--set", "model.hidden=8", "--set", "model.latent=2", "--set", "train.epochs=1",
    ];
    args.extend_from_slice(extra);
    rvae(&args)
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rvae(&["robustfit-demo", "--out", s(dir.path()), "--set", "fit.betta=0.5"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("fit.betta"));
}

#[test]
fn malformed_override_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&rvae(&["robustfit-demo", "--out", s(dir.path()), "--set", "fit.beta"])), 2);
    assert_eq!(code(&rvae(&["robustfit-demo", "--out", s(dir.path()), "--set", "fit.beta=abc"])), 2);
}

#[test]
fn missing_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.manifest");
    assert_eq!(code(&train(dir.path(), s(&missing), &[])), 3);
}

#[test]
fn diverging_training_is_a_numeric_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = make_data(&dir.path().join("data"), 36);
    let out = train(&dir.path().join("run"), &manifest, &["--set", "train.lr=1e300", "--set", "train.epochs=3"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn eval_rejects_a_checkpoint_of_another_width() {
    let dir = tempfile::tempdir().unwrap();
    let small = make_data(&dir.path().join("small"), 36);
    let large = make_data(&dir.path().join("large"), 64);
    let run = dir.path().join("run");
    assert!(train(&run, &small, &[]).status.success());
    let test = large.replace("train.manifest", "test.manifest");
    let out = rvae(&[
        "eval",
        "--out",
        s(&dir.path().join("eval")),
        "--set",
        &format!("data.test={test}"),
        "--set",
        &format!("model.checkpoint={}", s(&run.join("model.ckpt"))),
    ]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("architecture"));
}

#[test]
fn seed_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rvae"))
        .args(["robustfit-demo", "--out", s(dir.path())])
        .env("RVAE_SEED", "42")
        .output()
        .unwrap();
    assert!(out.status.success());
    let echo = std::fs::read_to_string(dir.path().join("resolved.cfg")).unwrap();
    assert!(echo.lines().any(|l| l.trim() == "seed = 42"), "{echo}");
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["train", "eval", "sweep", "select-beta", "robustfit-demo", "make-data"] {
        assert!(rvae(&[sub, "--help"]).status.success(), "{sub}");
    }
}
