use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use survbma::cli::ingest_csv;
use survbma::ensemble::fit_ensemble;
use survbma::priors::{estimation_ensemble, testing_ensemble};
use survbma::sampler::SamplerSettings;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_survbma"))
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn error_line(out: &Output) -> serde_json::Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    let line = text.lines().last().expect("an error line on stderr");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn small_sampler() -> serde_json::Value {
    serde_json::json!({"chains": 2, "burnin_iterations": 300, "sampling_iterations": 500, "adapt_target_acceptance": 0.44})
}

fn write_config(dir: &Path, name: &str, value: &serde_json::Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(value).unwrap()).unwrap();
    p
}

#[test]
fn usage_errors_exit_two() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "usage");

    let cfg = repo("configs/testing.json");
    let out = run(&["test", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "config");

    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn malformed_inputs_exit_two_with_row_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    fs::write(&csv, "time,event,group\n10,1,0\n20,2,1\n").unwrap();
    let cfg = repo("configs/testing.json");
    let out = run(&["test", "--config", cfg.to_str().unwrap(), "--data", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_line(&out);
    assert_eq!(err["error"], "data");
    assert!(err["message"].as_str().unwrap().contains("row 2"), "{err}");

    let unknown = write_config(dir.path(), "unknown.json", &serde_json::json!({"sampler": small_sampler(), "colour": 3}));
    let data = repo("data/trial.csv");
    let out = run(&["test", "--config", unknown.to_str().unwrap(), "--data", data.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "config");
}

#[test]
fn unpaired_testing_ensemble_is_rejected_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut models = testing_ensemble();
    models.remove(0);
    let w = 1.0 / models.len() as f64;
    models.iter_mut().for_each(|m| m.prior_weight = w);
    let cfg = write_config(dir.path(), "cfg.json", &serde_json::json!({"models": models, "sampler": small_sampler()}));
    let report = dir.path().join("report.json");
    let data = repo("data/trial.csv");
    let out = run(&[
        "test", "--config", cfg.to_str().unwrap(), "--data", data.to_str().unwrap(), "--out", report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!report.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn numerical_failures_exit_three() {
    // every study has its only event after all censored times: the Weibull likelihood is unbounded
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("degenerate.csv");
    fs::write(&csv, "time,event,group\n1,0,0\n2,0,1\n3,0,0\n10,1,1\n").unwrap();
    let cfg = write_config(
        dir.path(),
        "cfg.json",
        &serde_json::json!({"sampler": small_sampler(), "map_prior": {"families": ["weibull"]}}),
    );
    let out = run(&["map-prior", "--config", cfg.to_str().unwrap(), "--data", csv.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(error_line(&out)["error"], "numerical");
}

#[test]
fn estimate_reports_the_library_mixture() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cfg.json",
        &serde_json::json!({"models": estimation_ensemble(), "sampler": small_sampler(), "seed": 11, "curve_times": [365.0]}),
    );
    let data = repo("data/trial.csv");
    let out = run(&["estimate", "--config", cfg.to_str().unwrap(), "--data", data.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let reported = report["beta"]["mean"].as_f64().unwrap();

    let settings = SamplerSettings { burnin_iterations: 300, sampling_iterations: 500, seed: 11, ..Default::default() };
    let r = fit_ensemble(&estimation_ensemble(), &ingest_csv(&data).unwrap(), &settings, 11).unwrap();
    assert_eq!(reported, r.beta_mixture().unwrap().mean());
    assert_eq!(report["curves"].as_array().unwrap().len(), 4);
}

#[test]
fn simulate_then_test_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let trial = dir.path().join("trial.csv");
    let out = run(&["simulate", "--config", repo("configs/simulate.json").to_str().unwrap(), "--out", trial.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let data = ingest_csv(&trial).unwrap();
    assert_eq!(data.len(), 200);
    assert_eq!(fs::read(&trial).unwrap(), fs::read(repo("data/trial.csv")).unwrap());
}
