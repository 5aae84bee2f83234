//! Adaptive Metropolis posterior of a single Weibull model on simulated data.

use survbma::design::{simulate_trial, BfdaScenario, CensoringModel, DesignKind, Hypothesis};
use survbma::families::FamilyKind;
use survbma::priors::{ModelSpec, PriorSpec};
use survbma::sampler::{sample_posterior, SamplerSettings};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let truth = ModelSpec {
        family: FamilyKind::Weibull,
        prior_beta: PriorSpec::Spike { value: 0.4 },
        prior_alpha: PriorSpec::Spike { value: 7.0 },
        prior_gamma: Some(PriorSpec::Spike { value: 1.3 }),
        prior_weight: 1.0,
    };
    let scenario = BfdaScenario {
        generating_ensemble: vec![truth],
        hypothesis: Hypothesis::H1,
        n_participants: 300,
        censoring: CensoringModel { shape: 1.5, scale: 2500.0, cutoff: 1825.0 },
        replications: 1,
        design: DesignKind::FixedN,
        master_seed: 3,
        leave_one_family_out: false,
    };
    let (data, _) = simulate_trial(&scenario, 0)?;
    let model = ModelSpec {
        family: FamilyKind::Weibull,
        prior_beta: PriorSpec::Normal { mu: 0.0, sigma: 1.0 },
        prior_alpha: PriorSpec::Normal { mu: 8.8, sigma: 2.2 },
        prior_gamma: Some(PriorSpec::LogNormal { mu_log: -0.07, sigma_log: 0.22 }),
        prior_weight: 1.0,
    };
    let settings = SamplerSettings { burnin_iterations: 500, sampling_iterations: 1000, seed: 9, ..Default::default() };
    let fit = sample_posterior(&model, &data, &settings)?;
    println!("{} events among {} participants", data.event_count(), data.len());
    for (j, name) in fit.free_parameter_names.iter().enumerate() {
        println!(
            "{name:<6} mean {:>8.4}  sd {:.4}  rhat {:.3}  ess {:>6.0}  accept {:.2}",
            fit.mean(j),
            fit.sd(j),
            fit.rhat[j],
            fit.ess[j],
            fit.acceptance_rates[j]
        );
    }
    assert!(fit.max_rhat() < 1.1);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
