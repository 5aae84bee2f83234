//! Survival, hazard and quantile functions of the five AFT families.

use survbma::families::{log_hazard, log_survival, quantile, FamilyKind};
use survbma::priors::example_support_priors;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let t = 365.0;
    for family in FamilyKind::ALL {
        let (alpha, gamma) = example_support_priors(family);
        let eta = alpha.mean().unwrap_or(8.7);
        let g = gamma.and_then(|p| p.mean());
        let s = log_survival(family, t, eta, g)?.exp();
        let h = log_hazard(family, t, eta, g)?.exp();
        let median = quantile(family, 0.5, eta, g)?;
        println!("{family:<12} S(1y) = {s:.4}  h(1y) = {h:.3e}/day  median = {median:.0} days");
        assert!(s > 0.0 && s < 1.0);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
