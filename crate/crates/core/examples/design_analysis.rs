//! A small Bayes factor design analysis with fixed-n calibration.

use survbma::design::{
    calibrate_fixed, generating_models, run_bfda, AnalysisConfig, BfdaScenario, CensoringModel, DesignKind,
    Hypothesis,
};
use survbma::priors::testing_ensemble;
use survbma::sampler::SamplerSettings;
use survbma::sequential::DecisionThresholds;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let ensemble = testing_ensemble();
    let scenario = |h| -> Result<BfdaScenario, survbma::Error> {
        Ok(BfdaScenario {
            generating_ensemble: generating_models(&ensemble, h)?,
            hypothesis: h,
            n_participants: 100,
            censoring: CensoringModel { shape: 1.5, scale: 2500.0, cutoff: 1825.0 },
            replications: 4,
            design: DesignKind::FixedN,
            master_seed: 77 + h as u64,
            leave_one_family_out: false,
        })
    };
    let analysis = AnalysisConfig {
        models: ensemble.clone(),
        settings: SamplerSettings { burnin_iterations: 200, sampling_iterations: 500, ..Default::default() },
        thresholds: DecisionThresholds::NEVER,
        truncate: None,
    };
    let result = run_bfda(&scenario(Hypothesis::H0)?, &scenario(Hypothesis::H1)?, &analysis)?;
    println!("BF10 under H0: {:?}", result.h0.bf10());
    println!("BF10 under H1: {:?}", result.h1.bf10());
    let cal = calibrate_fixed(&result.h0.bf10(), &result.h1.bf10(), 0.05, 0.10)?;
    println!(
        "thresholds BF10 {:.3}, BF01 {:.3}; achieved FP {:.2}, FN {:.2}",
        cal.bf10_threshold, cal.bf01_threshold, cal.achieved_false_positive.value, cal.achieved_false_negative.value
    );
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
