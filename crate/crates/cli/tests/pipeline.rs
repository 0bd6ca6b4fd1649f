//! End-to-end checks of the `mmvae` binary with a deliberately tiny run
//! configuration so the whole pipeline finishes in seconds.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mmvae")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary launches")
}

fn write_config(dir: &Path) -> String {
    let out = dir.join("out");
    let config = format!(
        "seed = 5\n\
         output_dir = {:?}\n\
         [dataset]\n\
         rows = 240\n\
         [train]\n\
         steps = 60\n\
         batch_size = 32\n",
        out.display().to_string()
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    path.display().to_string()
}

#[test]
fn pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("out");

    let r = run(&["--config", &config, "babble"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("trace.csv").exists());
    assert!(out.join("trace.bin").exists());
    assert!(out.join("normalization.json").exists());
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    // comment, header, then one line per row
    assert_eq!(trace.lines().count(), 2 + 240);

    let r = run(&["--config", &config, "dataset"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("dataset.csv").exists());
    assert!(out.join("dataset.bin").exists());

    let r = run(&["--config", &config, "train"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("mmvae.mmvc").exists());
    assert!(out.join("mmvae_loss.csv").exists());

    let r = run(&["--config", &config, "eval", "--pattern", "complete"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("eval_mmvae.json")).unwrap())
            .unwrap();
    assert_eq!(report["pattern"], "Complete");
    assert!(report["report"]["overall"].as_f64().unwrap().is_finite());

    let r = run(&["--config", &config, "predict", "--index", "3"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("predict.json").exists());

    let r = run(&["--config", &config, "rollout", "--horizon", "3"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("rollout.csv").exists());

    let r = run(&[
        "--config",
        &config,
        "imitate",
        "--reference",
        out.join("trace.csv").to_str().unwrap(),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("imitation.csv").exists());
    assert!(out.join("imitate.json").exists());

    let r = run(&["--config", &config, "export-plots"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("plots/rollout.csv").exists());
    assert!(out.join("plots/imitation.csv").exists());
}

#[test]
fn mixed_hashes_are_refused_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());

    let r = run(&["--config", &config, "train"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));

    // a different seed hashes differently, so eval must refuse the checkpoint
    let r = run(&[
        "--config", &config, "--seed", "6", "eval", "--pattern", "complete",
    ]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("config"), "stderr: {}", err);

    let r = run(&[
        "--config", &config, "--seed", "6", "--force", "eval", "--pattern", "complete",
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn unknown_pattern_exits_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let r = run(&["--config", &config, "eval", "--pattern", "sonar"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("sonar"));
}

#[test]
fn eval_on_missing_checkpoint_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let r = run(&["--config", &config, "eval", "--pattern", "complete"]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("mmvae.mmvc"), "stderr: {}", err);
}

#[test]
fn vanilla_and_fwdinv_train_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("out");

    for model in ["vanilla", "vanilla-aug", "fwdinv"] {
        let r = run(&["--config", &config, "train", "--model", model]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    assert!(out.join("vanilla.mmvc").exists());
    assert!(out.join("vanilla-aug.mmvc").exists());
    assert!(out.join("forward.mmvc").exists());
    assert!(out.join("inverse.mmvc").exists());

    let r = run(&["--config", &config, "eval", "--pattern", "vision", "--model", "vanilla"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("eval_vanilla.json").exists());
}
