//! Meta-analytic predictive priors for the intercept and shape from three historical trials.

use survbma::cli::ingest_csv;
use survbma::families::FamilyKind;
use survbma::map_priors::{map_prior, Heterogeneity};
use survbma::sampler::SamplerSettings;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let historical = (1..=3)
        .map(|k| ingest_csv(format!("{}/../../data/historical_{k}.csv", env!("CARGO_MANIFEST_DIR")).as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    let settings = SamplerSettings { burnin_iterations: 1000, sampling_iterations: 2000, seed: 5, ..Default::default() };
    for family in [FamilyKind::Exponential, FamilyKind::Weibull] {
        let prior = map_prior(family, &historical, &settings, Heterogeneity::Estimate)?;
        for s in &prior.studies {
            println!("{family:<12} study alpha {:.3} ({:.3})", s.alpha.estimate, s.alpha.standard_error);
        }
        println!("{family:<12} intercept prior {}  (tau {:.3})", prior.prior_alpha.predictive, prior.prior_alpha.tau);
        if let Some(g) = prior.prior_gamma {
            println!("{family:<12} shape prior {}  (tau {:.3})", g.predictive, g.tau);
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
