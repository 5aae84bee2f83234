//! Drives the command-line interface in-process: simulate a trial, then test it.

use std::fs;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let configs = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    let data = dir.path().join("trial.csv");
    let report = dir.path().join("report.json");
    let code = survbma::cli::run([
        "survbma", "simulate", "--config", &format!("{configs}/simulate.json"), "--out", data.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    let config = dir.path().join("testing.json");
    let mut cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(format!("{configs}/testing.json"))?)?;
    cfg["sampler"]["burnin_iterations"] = 300.into();
    cfg["sampler"]["sampling_iterations"] = 500.into();
    fs::write(&config, serde_json::to_string(&cfg)?)?;
    let code = survbma::cli::run([
        "survbma", "test", "--config", config.to_str().unwrap(), "--data", data.to_str().unwrap(),
        "--out", report.to_str().unwrap(), "--threads", "1",
    ]);
    assert_eq!(code, 0);
    let parsed: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report)?)?;
    println!("inclusion BF for the effect: {}", parsed["inclusion_bf_effect"]["value"]);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
