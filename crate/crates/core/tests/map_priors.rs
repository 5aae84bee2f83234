use survbma::design::{simulate_trial, BfdaScenario, CensoringModel, DesignKind, Hypothesis};
use survbma::families::FamilyKind;
use survbma::map_priors::{map_prior, meta_analyze, Heterogeneity, Scale, StudyEstimate};
use survbma::priors::{ModelSpec, PriorSpec};
use survbma::sampler::SamplerSettings;

fn settings(seed: u64) -> SamplerSettings {
    SamplerSettings { burnin_iterations: 1000, sampling_iterations: 5000, seed, ..Default::default() }
}

fn studies(pairs: &[(f64, f64)]) -> Vec<StudyEstimate> {
    pairs.iter().map(|&(e, s)| StudyEstimate::new(e, s).unwrap()).collect()
}

#[test]
fn common_effect_with_equal_errors_is_the_arithmetic_mean() {
    let est = studies(&[(8.6, 0.2), (8.9, 0.2), (8.75, 0.2)]);
    let p = meta_analyze(&est, &settings(1), Scale::Intercept, Heterogeneity::FixedZero).unwrap();
    let mean = (8.6 + 8.9 + 8.75) / 3.0;
    assert!((p.pooled_mean - mean).abs() < 3.0 * p.pooled_mean_mcse, "{} vs {mean}", p.pooled_mean);
    assert_eq!(p.tau, 0.0);
    // posterior sd of the common mean is se / sqrt(k)
    assert!((p.pooled_se - 0.2 / 3f64.sqrt()).abs() < 0.05 * 0.2 / 3f64.sqrt());
}

#[test]
fn common_effect_with_unequal_errors_is_inverse_variance_weighted() {
    let pairs = [(8.2, 0.1), (9.0, 0.3), (8.7, 0.5)];
    let p = meta_analyze(&studies(&pairs), &settings(2), Scale::Intercept, Heterogeneity::FixedZero).unwrap();
    let w: Vec<f64> = pairs.iter().map(|&(_, s)| 1.0 / (s * s)).collect();
    let iv = pairs.iter().zip(&w).map(|(&(e, _), w)| e * w).sum::<f64>() / w.iter().sum::<f64>();
    assert!((p.pooled_mean - iv).abs() < 3.0 * p.pooled_mean_mcse, "{} vs {iv}", p.pooled_mean);
}

#[test]
fn predictive_variance_identity() {
    let est = studies(&[(8.2, 0.1), (9.0, 0.3), (8.7, 0.5)]);
    for scale in [Scale::Intercept, Scale::LogAuxiliary] {
        let p = meta_analyze(&est, &settings(3), scale, Heterogeneity::Estimate).unwrap();
        let sd = p.predictive_sd();
        assert_eq!(sd * sd, {
            let s = (p.pooled_se * p.pooled_se + p.tau * p.tau).sqrt();
            s * s
        });
        assert!(p.tau > 0.0);
        match p.predictive {
            PriorSpec::Normal { mu, .. } => assert_eq!((scale, mu), (Scale::Intercept, p.pooled_mean)),
            PriorSpec::LogNormal { mu_log, .. } => assert_eq!((scale, mu_log), (Scale::LogAuxiliary, p.pooled_mean)),
            other => panic!("unexpected predictive prior {other}"),
        }
    }
}

#[test]
fn single_study_prior_is_no_tighter_than_its_estimate() {
    let est = studies(&[(8.8, 0.15)]);
    for h in [Heterogeneity::Estimate, Heterogeneity::FixedZero] {
        let p = meta_analyze(&est, &settings(4), Scale::Intercept, h).unwrap();
        assert!(p.predictive_sd() >= 0.95 * 0.15, "{h:?}: {}", p.predictive_sd());
    }
}

#[test]
fn pipeline_recovers_the_generating_scale() {
    let model = ModelSpec {
        family: FamilyKind::Weibull,
        prior_beta: PriorSpec::Spike { value: 0.0 },
        prior_alpha: PriorSpec::Spike { value: 8.8 },
        prior_gamma: Some(PriorSpec::Spike { value: 0.93 }),
        prior_weight: 1.0,
    };
    let scenario = |seed| BfdaScenario {
        generating_ensemble: vec![model.clone()],
        hypothesis: Hypothesis::H0,
        n_participants: 300,
        censoring: CensoringModel { shape: 1.5, scale: 2500.0, cutoff: 1825.0 },
        replications: 1,
        design: DesignKind::FixedN,
        master_seed: seed,
        leave_one_family_out: false,
    };
    let historical: Vec<_> = (0..3).map(|s| simulate_trial(&scenario(40 + s), 0).unwrap().0).collect();
    let p = map_prior(FamilyKind::Weibull, &historical, &settings(5), Heterogeneity::Estimate).unwrap();
    assert!((p.prior_alpha.pooled_mean - 8.8).abs() < 1.0);
    assert!((p.prior_gamma.unwrap().pooled_mean - 0.93f64.ln()).abs() < 1.0);
    assert!(p.excluded_studies.is_empty());
}
