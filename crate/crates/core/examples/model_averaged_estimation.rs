//! Model-averaged treatment effect and survival curves with the estimation ensemble.

use survbma::cli::ingest_csv;
use survbma::ensemble::{fit_ensemble, CurveKind};
use survbma::priors::estimation_ensemble;
use survbma::sampler::SamplerSettings;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/trial.csv");
    let data = ingest_csv(path.as_ref())?;
    let settings = SamplerSettings { burnin_iterations: 300, sampling_iterations: 500, ..Default::default() };
    let result = fit_ensemble(&estimation_ensemble(), &data, &settings, 2024)?;
    for (m, p) in result.models.iter().zip(&result.posterior_probs) {
        println!("{:<12} posterior probability {:.3}", m.spec.family, p);
    }
    let beta = result.beta_mixture()?;
    println!(
        "beta: mean {:.3}, 95% interval [{:.3}, {:.3}]; acceleration factor {:.3}",
        beta.mean(),
        beta.quantile(0.025),
        beta.quantile(0.975),
        beta.mean().exp()
    );
    let times = [365.0, 730.0, 1095.0, 1460.0, 1825.0];
    for treated in [false, true] {
        let curve = result.curve(CurveKind::Survival, &times, treated)?;
        let line: Vec<String> = curve.iter().map(|p| format!("{:.3}", p.mean)).collect();
        println!("group {}: S(1..5 years) = {}", treated as u8, line.join(" "));
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
