//! Monitoring the effect inclusion Bayes factor at regular looks.

use survbma::cli::ingest_csv;
use survbma::priors::testing_ensemble;
use survbma::sampler::SamplerSettings;
use survbma::sequential::{run_sequential, DecisionThresholds, LookSchedule};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/trial.csv");
    let data = ingest_csv(path.as_ref())?;
    let schedule = LookSchedule::new(365.0, 1825.0)?;
    let thresholds = DecisionThresholds { bf10_upper: 6.9, bf01_upper: 4.4 };
    let settings = SamplerSettings { burnin_iterations: 300, sampling_iterations: 500, seed: 8, ..Default::default() };
    let trajectory = run_sequential(&data, &testing_ensemble(), &schedule, &thresholds, &settings)?;
    for (t, bf) in trajectory.look_times.iter().zip(&trajectory.bf10) {
        println!("day {t:>6.0}: BF10 = {bf:.3}");
    }
    println!("decision {:?} at {:?}", trajectory.decision, trajectory.decision_time);
    trajectory.write_csv(std::io::stdout())?;
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
