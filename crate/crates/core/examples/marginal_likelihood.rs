//! Bridge-sampled marginal likelihoods and a Bayes factor between two models.

use survbma::bridge::bridge_marglik;
use survbma::ensemble::bayes_factor;
use survbma::families::{FamilyKind, SurvivalDataset, SurvivalRecord};
use survbma::priors::{example_support_priors, ModelSpec, PriorSpec};
use survbma::sampler::{sample_posterior, SamplerSettings};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let times = [
        (120.0, true, false), (340.0, true, false), (800.0, false, false), (55.0, true, false),
        (610.0, true, false), (900.0, false, false), (240.0, true, true), (720.0, true, true),
        (900.0, false, true), (900.0, false, true), (430.0, true, true), (150.0, true, true),
    ];
    let data = SurvivalDataset::new(times.iter().map(|&(t, e, g)| SurvivalRecord::new(t, e, g)).collect())?;
    let settings = SamplerSettings { burnin_iterations: 500, sampling_iterations: 1000, seed: 21, ..Default::default() };
    let mut log_ml = Vec::new();
    for beta in [PriorSpec::Spike { value: 0.0 }, PriorSpec::Normal { mu: 0.0, sigma: 1.0 }] {
        let (alpha, gamma) = example_support_priors(FamilyKind::Weibull);
        let model = ModelSpec { family: FamilyKind::Weibull, prior_beta: beta, prior_alpha: alpha, prior_gamma: gamma, prior_weight: 1.0 };
        let fit = sample_posterior(&model, &data, &settings)?;
        let bridge = bridge_marglik(&fit, &model, &data, 5)?;
        println!("{:<40} log p(data) = {:.4} ({} iterations)", model.label(), bridge.log_marglik, bridge.iterations_used);
        log_ml.push(bridge.log_marglik);
    }
    println!("BF10 = {:.3}", bayes_factor(log_ml[1], log_ml[0]));
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
