//! Maximum-likelihood fits, AIC/BIC selection and the one-sided Wald test.

use survbma::cli::ingest_csv;
use survbma::families::FamilyKind;
use survbma::mle::{fit_mle, select_model, wald_one_sided, Criterion};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/trial.csv");
    let data = ingest_csv(path.as_ref())?;
    let fits = FamilyKind::ALL.iter().map(|&f| fit_mle(f, &data, true)).collect::<Result<Vec<_>, _>>()?;
    for fit in &fits {
        let wald = wald_one_sided(fit, 0.05)?;
        println!(
            "{:<12} logLik {:>10.3}  AIC {:>9.3}  BIC {:>9.3}  beta {:>7.4}  z {:>6.3}  reject {}",
            fit.family, fit.log_lik, fit.aic, fit.bic, fit.estimates.beta, wald.z, wald.reject
        );
    }
    println!("AIC picks {}", fits[select_model(&fits, Criterion::Aic)?].family);
    println!("BIC picks {}", fits[select_model(&fits, Criterion::Bic)?].family);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
