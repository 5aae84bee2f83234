//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Pass criterion numbers as arguments to run a subset, e.g. `cargo test --test acceptance -- 2 3`.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use common::{ln_normal, log_integrate, moments, normal_cdf, synthetic_n50};
use survbma::bridge::bridge_marglik;
use survbma::cli::ingest_csv;
use survbma::design::{
    calibrate_fixed, calibrate_sequential, estimator_metrics, evaluate_design, generating_models,
    misleading_evidence_rate, run_scenario, AnalysisConfig, BfdaScenario, CensoringModel, DesignKind, Hypothesis,
};
use survbma::ensemble::{bayes_factor, fit_ensemble, inclusion_bf, EnsembleResult};
use survbma::families::{FamilyKind, SurvivalDataset};
use survbma::map_priors::{meta_analyze, Heterogeneity, Scale, StudyEstimate};
use survbma::priors::{estimation_ensemble, testing_ensemble, ModelSpec, PriorSpec};
use survbma::sampler::{sample_posterior, PosteriorFit, SamplerSettings};
use survbma::seeding::derive_seed;
use survbma::sequential::{look_seed, run_sequential_with, DecisionThresholds, LookSchedule, MonitorOptions};

type Outcome = (bool, String);

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn exponential_null() -> ModelSpec {
    ModelSpec {
        family: FamilyKind::Exponential,
        prior_beta: PriorSpec::Spike { value: 0.0 },
        prior_alpha: PriorSpec::Normal { mu: 8.70, sigma: 2.04 },
        prior_gamma: None,
        prior_weight: 1.0,
    }
}

fn weibull_null() -> ModelSpec {
    ModelSpec {
        family: FamilyKind::Weibull,
        prior_beta: PriorSpec::Spike { value: 0.0 },
        prior_alpha: PriorSpec::Normal { mu: 8.80, sigma: 2.20 },
        prior_gamma: Some(PriorSpec::LogNormal { mu_log: -0.07, sigma_log: 0.22 }),
        prior_weight: 1.0,
    }
}

fn exponential_log_post(data: &SurvivalDataset) -> impl Fn(f64) -> f64 + '_ {
    move |a: f64| ln_normal(a, 8.70, 2.04) + common::exponential_loglik(data, 0.0, a)
}

/// Weibull null model on the n = 50 trial by nested quadrature over (alpha, ln gamma):
/// ln Z, E/SD of alpha, E/SD of gamma.
fn weibull_reference() -> (f64, f64, f64, f64, f64) {
    static CELL: OnceLock<(f64, f64, f64, f64, f64)> = OnceLock::new();
    *CELL.get_or_init(|| weibull_quadrature(&synthetic_n50()))
}

fn weibull_quadrature(data: &SurvivalDataset) -> (f64, f64, f64, f64, f64) {
    let inner = |u: f64| {
        let g = u.exp();
        let f = move |a: f64| ln_normal(a, 8.80, 2.20) + common::weibull_loglik(data, 0.0, a, g);
        let (lz, m, s) = moments(f, 8.80 - 30.0, 8.80 + 30.0);
        (lz + ln_normal(u, -0.07, 0.22), m, s)
    };
    let (lo, hi) = (-0.07 - 12.0 * 0.22, -0.07 + 12.0 * 0.22);
    let (a, b, peak) = common::effective_support(&|u| inner(u).0, lo, hi);
    let w = |u: f64, h: &dyn Fn(f64, f64, f64) -> f64| {
        let (lz, m, s) = inner(u);
        (lz - peak).exp() * h(u, m, s)
    };
    let z = common::integrate(|u| w(u, &|_, _, _| 1.0), a, b, 1e-10);
    let ea = common::integrate(|u| w(u, &|_, m, _| m), a, b, 1e-10) / z;
    let ea2 = common::integrate(|u| w(u, &|_, m, s| s * s + m * m), a, b, 1e-10) / z;
    let eg = common::integrate(|u| w(u, &|u, _, _| u.exp()), a, b, 1e-10) / z;
    let eg2 = common::integrate(|u| w(u, &|u, _, _| (2.0 * u).exp()), a, b, 1e-10) / z;
    (peak + z.ln(), ea, (ea2 - ea * ea).sqrt(), eg, (eg2 - eg * eg).sqrt())
}

fn criterion_1() -> Outcome {
    // 8 recoveries out of 10 under point hypotheses 0.5, 0.6 and 0.7
    let ln_binom = |theta: f64| 45f64.ln() + 8.0 * theta.ln() + 2.0 * (1.0 - theta).ln();
    let bf10 = bayes_factor(ln_binom(0.6), ln_binom(0.5));
    let bf20 = bayes_factor(ln_binom(0.7), ln_binom(0.5));
    let ok = (bf10 - 2.75).abs() <= 0.01 && (bf20 - 5.31).abs() <= 0.01;
    (ok, format!("binomial BF10 = {bf10:.4} (2.75 +/- 0.01), BF20 = {bf20:.4} (5.31 +/- 0.01)"))
}

fn fit_with(model: &ModelSpec, data: &SurvivalDataset, seed: u64) -> (PosteriorFit, f64) {
    let settings = SamplerSettings::default().with_seed(derive_seed(seed, &[0]));
    let fit = sample_posterior(model, data, &settings).unwrap();
    let b = bridge_marglik(&fit, model, data, derive_seed(seed, &[1])).unwrap();
    (fit, b.log_marglik)
}

fn criterion_2() -> Outcome {
    let data = synthetic_n50();
    let exp_ref = log_integrate(exponential_log_post(&data), 8.70 - 30.0, 8.70 + 30.0);
    let wei_ref = weibull_reference().0;
    let (mut worst_exp, mut worst_wei) = (0.0f64, 0.0f64);
    for seed in 0..20u64 {
        worst_exp = worst_exp.max((fit_with(&exponential_null(), &data, seed).1 - exp_ref).abs());
        worst_wei = worst_wei.max((fit_with(&weibull_null(), &data, 100 + seed).1 - wei_ref).abs());
    }
    let ok = worst_exp < 0.05 && worst_wei < 0.1;
    (
        ok,
        format!(
            "bridge vs quadrature over 20 seeds (n = {}, {} events): exponential max |err| = {worst_exp:.4} (< 0.05), \
             weibull max |err| = {worst_wei:.4} (< 0.1); reference log-ml {exp_ref:.4}, {wei_ref:.4}",
            data.len(),
            data.event_count()
        ),
    )
}

struct Check {
    label: String,
    estimate: f64,
    reference: f64,
    mcse: f64,
}

impl Check {
    fn z(&self) -> f64 {
        (self.estimate - self.reference).abs() / self.mcse
    }
}

fn mean_sd_checks(fit: &PosteriorFit, name: &str, label: &str, mean: f64, sd: f64) -> [Check; 2] {
    let j = fit.index_of(name).unwrap();
    [
        Check { label: format!("{label} mean"), estimate: fit.mean(j), reference: mean, mcse: fit.mcse_mean(j) },
        Check { label: format!("{label} sd"), estimate: fit.sd(j), reference: sd, mcse: fit.mcse_sd(j) },
    ]
}

fn prior_moments(p: &PriorSpec) -> (f64, f64) {
    match *p {
        PriorSpec::Normal { mu, sigma } => (mu, sigma),
        PriorSpec::LogNormal { mu_log, sigma_log } => {
            let m = (mu_log + 0.5 * sigma_log * sigma_log).exp();
            (m, m * (sigma_log * sigma_log).exp_m1().sqrt())
        }
        PriorSpec::TruncatedNormal { mu, sigma, lower, upper } => {
            assert!(upper.is_infinite());
            let a = (lower - mu) / sigma;
            let phi = (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let lambda = phi / (1.0 - normal_cdf(a));
            (mu + sigma * lambda, sigma * (1.0 + a * lambda - lambda * lambda).sqrt())
        }
        other => panic!("no Table 1 prior of kind {other}"),
    }
}

fn criterion_3() -> Outcome {
    let data = synthetic_n50();
    let mut checks = Vec::new();
    let (_, m, s) = moments(exponential_log_post(&data), 8.70 - 30.0, 8.70 + 30.0);
    let (fit, _) = fit_with(&exponential_null(), &data, 7);
    checks.extend(mean_sd_checks(&fit, "alpha", "exponential alpha", m, s));
    let (_, ma, sa, mg, sg) = weibull_reference();
    let (fit, _) = fit_with(&weibull_null(), &data, 8);
    checks.extend(mean_sd_checks(&fit, "alpha", "weibull alpha", ma, sa));
    checks.extend(mean_sd_checks(&fit, "gamma", "weibull gamma", mg, sg));

    // every distinct prior of the example ensembles, sampled with no data
    let mut models = estimation_ensemble();
    models.push(testing_ensemble().into_iter().find(|m| !m.is_null()).unwrap());
    let empty = SurvivalDataset::empty();
    for (i, m) in models.iter().enumerate() {
        let fit = sample_posterior(m, &empty, &SamplerSettings::default().with_seed(500 + i as u64)).unwrap();
        let mut params = vec![("beta", m.prior_beta), ("alpha", m.prior_alpha)];
        if let Some(g) = m.prior_gamma {
            params.push(("gamma", g));
        }
        for (name, prior) in params {
            let (mean, sd) = prior_moments(&prior);
            checks.extend(mean_sd_checks(&fit, name, &format!("prior {} {name} ~ {prior}", m.family), mean, sd));
        }
    }
    let worst = checks.iter().max_by(|a, b| a.z().total_cmp(&b.z())).unwrap();
    let failing: Vec<String> = checks.iter().filter(|c| c.z() > 3.0).map(|c| format!("{} ({:.2} MC-SE)", c.label, c.z())).collect();
    let ok = failing.is_empty();
    let mut msg = format!(
        "{} mean/sd checks within 3 MC-SE; worst {} at {:.2} MC-SE ({:.5} vs {:.5})",
        checks.len(),
        worst.label,
        worst.z(),
        worst.estimate,
        worst.reference
    );
    if !ok {
        msg.push_str(&format!("; failing: {}", failing.join(", ")));
    }
    (ok, msg)
}

fn small_settings(seed: u64) -> SamplerSettings {
    SamplerSettings { burnin_iterations: 300, sampling_iterations: 500, seed, ..Default::default() }
}

fn criterion_4() -> Outcome {
    let data = ingest_csv(&repo("data/trial.csv")).unwrap();
    let r: EnsembleResult = fit_ensemble(&testing_ensemble(), &data, &small_settings(4), 4).unwrap();
    // odds form: p_i / p_0 = BF_i0 * prior_i / prior_0, renormalized
    let odds: Vec<f64> =
        (0..r.log_mls.len()).map(|i| bayes_factor(r.log_mls[i], r.log_mls[0]) * r.prior_probs[i] / r.prior_probs[0]).collect();
    let total: f64 = odds.iter().sum();
    let eq_gap = r.posterior_probs.iter().zip(&odds).map(|(p, o)| (p - o / total).abs()).fold(0.0, f64::max);
    let sum_gap = (r.posterior_probs.iter().sum::<f64>() - 1.0).abs();
    let singleton = inclusion_bf(&[0.10, 0.90], &[0.95, 0.05], &[0]).unwrap().value;
    let w = r.beta_mixture().unwrap();
    let effect: Vec<usize> = (0..r.models.len()).filter(|&i| !r.models[i].spec.is_null()).collect();
    let mass: f64 = effect.iter().map(|&i| r.posterior_probs[i]).sum();
    let weighted: f64 = effect
        .iter()
        .map(|&i| {
            let f = &r.models[i].fit;
            r.posterior_probs[i] / mass * f.mean(f.index_of("beta").unwrap())
        })
        .sum();
    let mix_gap = (w.mean() - weighted).abs();
    let ok = eq_gap <= 1e-10 && sum_gap <= 1e-12 && (singleton - 171.0).abs() <= 4.0 * f64::EPSILON * 171.0 && mix_gap <= 1e-12;
    (
        ok,
        format!(
            "direct vs odds-form probabilities {eq_gap:.1e} (1e-10); sum - 1 = {sum_gap:.1e} (1e-12); \
             singleton inclusion BF = {singleton} (171.0); mixture mean gap {mix_gap:.1e} (1e-12)"
        ),
    )
}

fn criterion_5() -> Outcome {
    let data = ingest_csv(&repo("data/trial.csv")).unwrap();
    let models = testing_ensemble();
    let settings = small_settings(55);
    let horizon = data.max_time().unwrap();
    let schedule = LookSchedule::new(365.0, horizon).unwrap();
    let mut last: Option<(usize, EnsembleResult)> = None;
    let traj = run_sequential_with(
        &data,
        &models,
        &schedule,
        &DecisionThresholds::NEVER,
        &settings,
        MonitorOptions::default(),
        |k, _, r| last = Some((k, r.clone())),
    )
    .unwrap();
    let (k, seq) = last.unwrap();
    let fixed = fit_ensemble(&models, &data, &settings, look_seed(settings.seed, k)).unwrap();
    let same_bits = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
    let bf_seq = *traj.bf10.last().unwrap();
    let bf_fixed = fixed.inclusion_bf_effect.unwrap().value;
    let ok = same_bits(&seq.log_mls, &fixed.log_mls)
        && same_bits(&seq.posterior_probs, &fixed.posterior_probs)
        && bf_seq.to_bits() == bf_fixed.to_bits()
        && traj.look_times.len() == k + 1;
    (ok, format!("final look {} of {} at {horizon} days: BF10 {bf_seq} vs fixed-n {bf_fixed}", k + 1, traj.look_times.len()))
}

fn bfda_scenario(h: Hypothesis, n: usize, reps: usize, interval: f64, seed: u64) -> BfdaScenario {
    BfdaScenario {
        generating_ensemble: generating_models(&testing_ensemble(), h).unwrap(),
        hypothesis: h,
        n_participants: n,
        censoring: CensoringModel { shape: 1.5, scale: 2500.0, cutoff: 1825.0 },
        replications: reps,
        design: DesignKind::Sequential { schedule: LookSchedule::new(interval, 1825.0).unwrap() },
        master_seed: seed,
        leave_one_family_out: false,
    }
}

fn criterion_6() -> Outcome {
    // untruncated trajectories; the last look sees the complete data, i.e. the fixed-n analysis
    let analysis = AnalysisConfig {
        models: testing_ensemble(),
        settings: small_settings(0),
        thresholds: DecisionThresholds::NEVER,
        truncate: None,
    };
    let (n, reps) = (200, 100);
    let h0 = run_scenario(&bfda_scenario(Hypothesis::H0, n, reps, 180.0, 600), &analysis).unwrap();
    let h1 = run_scenario(&bfda_scenario(Hypothesis::H1, n, reps, 180.0, 601), &analysis).unwrap();
    let misleading = misleading_evidence_rate(&h0.bf10(), Hypothesis::H0, 10.0);
    let fixed = calibrate_fixed(&h0.bf10(), &h1.bf10(), 0.05, 0.10).unwrap();
    let seq = calibrate_sequential(&h0.trajectories(), &h1.trajectories(), 0.05, 0.10, 15.0);
    let failed = h0.failed.len() + h1.failed.len();
    match seq {
        Ok(seq) => {
            let ok = misleading < 0.05
                && seq.bf10_threshold >= fixed.bf10_threshold
                && seq.bf01_threshold >= fixed.bf01_threshold;
            (
                ok,
                format!(
                    "n = {n}, {reps} replications per hypothesis ({failed} failed): P(BF10 >= 10 | H0) = {misleading:.3} (< 0.05); \
                     thresholds fixed ({:.3}, {:.3}) vs sequential ({:.3}, {:.3})",
                    fixed.bf10_threshold, fixed.bf01_threshold, seq.bf10_threshold, seq.bf01_threshold
                ),
            )
        }
        Err(e) => (false, format!("P(BF10 >= 10 | H0) = {misleading:.3}; sequential calibration failed: {e}")),
    }
}

fn criterion_7() -> Outcome {
    // Weibull truth at the intercept and shape prior means of the example priors
    let truth = ModelSpec {
        family: FamilyKind::Weibull,
        prior_beta: PriorSpec::Spike { value: 0.4 },
        prior_alpha: PriorSpec::Spike { value: 8.8 },
        prior_gamma: Some(PriorSpec::Spike { value: (-0.07f64).exp() }),
        prior_weight: 1.0,
    };
    let scenario = BfdaScenario {
        generating_ensemble: vec![truth],
        hypothesis: Hypothesis::H1,
        n_participants: 2070,
        censoring: CensoringModel { shape: 1.5, scale: 2500.0, cutoff: 1825.0 },
        replications: 20,
        design: DesignKind::Sequential { schedule: LookSchedule::new(30.0, 1825.0).unwrap() },
        master_seed: 700,
        leave_one_family_out: true,
    };
    let analysis = AnalysisConfig {
        models: testing_ensemble(),
        settings: small_settings(0),
        thresholds: DecisionThresholds { bf10_upper: 6.9, bf01_upper: 4.4 },
        truncate: None,
    };
    let set = run_scenario(&scenario, &analysis).unwrap();
    let metrics = evaluate_design(&set.decisions(), Hypothesis::H1).unwrap();
    let stopped = set.records.iter().filter(|r| r.decision == survbma::sequential::Decision::AcceptH1).count();
    let months = metrics.mean_decision_time.map(|m| m.value / 30.0);
    let ok = set.failed.is_empty() && stopped * 10 >= 9 * 20 && months.is_some_and(|m| m < 15.0);
    (
        ok,
        format!(
            "{stopped}/20 stopped for H1 (>= 18), {} for H0, {} failed; mean decision time {} months (< 15)",
            set.records.iter().filter(|r| r.decision == survbma::sequential::Decision::AcceptH0).count(),
            set.failed.len(),
            months.map_or("n/a".to_string(), |m| format!("{m:.2}"))
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = survbma::seeding::stream(8, &[0]);
    use rand::Rng;
    let mut all_ok = true;
    for _ in 0..5 {
        let truth: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let est: Vec<f64> = truth.iter().map(|t| t + rng.gen_range(-0.5..0.7)).collect();
        let ci: Vec<(f64, f64)> = est.iter().map(|e| (e - 0.4, e + 0.4)).collect();
        let m = estimator_metrics(&est, &truth, &ci).unwrap();
        let n = 20.0;
        let err: Vec<f64> = est.iter().zip(&truth).map(|(e, t)| e - t).collect();
        let bias = err.iter().sum::<f64>() / n;
        let rmse = (err.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
        let loo: Vec<f64> = (0..20)
            .map(|i| {
                let drop = |v: &[f64]| v.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, x)| *x).collect::<Vec<_>>();
                let ci_i: Vec<(f64, f64)> = ci.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, x)| *x).collect();
                estimator_metrics(&drop(&est), &drop(&truth), &ci_i).unwrap().rmse
            })
            .collect();
        let lm = loo.iter().sum::<f64>() / n;
        let jack = ((n - 1.0) / n * loo.iter().map(|v| (v - lm).powi(2)).sum::<f64>()).sqrt();
        let covered = truth.iter().zip(&ci).filter(|(t, (lo, hi))| lo <= *t && *t <= hi).count() as f64 / n;
        all_ok &= m.bias == bias && m.rmse == rmse && m.rmse_se == jack && m.coverage.value == covered;
    }
    (all_ok, "bias, RMSE, jackknife SE and coverage equal brute-force leave-one-out recomputation on 5 sets of 20".into())
}

fn criterion_9() -> Outcome {
    let pairs = [(8.2, 0.1), (9.0, 0.3), (8.7, 0.5)];
    let est: Vec<StudyEstimate> = pairs.iter().map(|&(e, s)| StudyEstimate::new(e, s).unwrap()).collect();
    let settings = SamplerSettings::default().with_seed(9);
    let pooled = meta_analyze(&est, &settings, Scale::Intercept, Heterogeneity::FixedZero).unwrap();
    let w: Vec<f64> = pairs.iter().map(|&(_, s)| 1.0 / (s * s)).collect();
    let iv = pairs.iter().zip(&w).map(|(&(e, _), w)| e * w).sum::<f64>() / w.iter().sum::<f64>();
    let z = (pooled.pooled_mean - iv).abs() / pooled.pooled_mean_mcse;
    let re = meta_analyze(&est, &settings, Scale::Intercept, Heterogeneity::Estimate).unwrap();
    let sd = re.predictive_sd();
    let rhs = (re.pooled_se * re.pooled_se + re.tau * re.tau).sqrt();
    let ok = z <= 3.0 && sd == rhs;
    (
        ok,
        format!(
            "tau = 0 pooled mean {:.5} vs inverse-variance {iv:.5} ({z:.2} MC-SE); predictive sd {sd} = sqrt(se^2 + tau^2) = {rhs}",
            pooled.pooled_mean
        ),
    )
}

fn cli(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_survbma")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let small = serde_json::json!({"chains": 2, "burnin_iterations": 300, "sampling_iterations": 500, "adapt_target_acceptance": 0.44});
    let mut testing: serde_json::Value = serde_json::from_str(&fs::read_to_string(repo("configs/testing.json")).unwrap()).unwrap();
    testing["sampler"] = small.clone();
    testing["schedule"] = serde_json::json!({"interval": 365.0, "horizon": 1825.0});
    testing["outputs"] = serde_json::json!({"trajectory_csv": d.join("trajectory.csv")});
    let mut estimation: serde_json::Value = serde_json::from_str(&fs::read_to_string(repo("configs/estimation.json")).unwrap()).unwrap();
    estimation["sampler"] = small.clone();
    estimation["curve_times"] = serde_json::json!([180.0, 365.0, 730.0]);
    estimation["outputs"] = serde_json::json!({"curves_csv": d.join("curves.csv")});
    let mut bfda: serde_json::Value = serde_json::from_str(&fs::read_to_string(repo("configs/bfda.json")).unwrap()).unwrap();
    bfda["bfda"]["n_participants"] = 100.into();
    bfda["bfda"]["replications"] = 3.into();
    bfda["bfda"]["design"]["schedule"]["interval"] = 365.0.into();
    bfda["outputs"] = serde_json::json!({"replication_log": d.join("reps.ndjson"), "histogram_csv": d.join("bf.csv")});
    let mut map: serde_json::Value = serde_json::from_str(&fs::read_to_string(repo("configs/map_prior.json")).unwrap()).unwrap();
    map["sampler"] = small;
    let write = |name: &str, v: &serde_json::Value| {
        let p = d.join(name);
        fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
        p.to_str().unwrap().to_string()
    };
    let (t, e, b, m) = (write("t.json", &testing), write("e.json", &estimation), write("b.json", &bfda), write("m.json", &map));
    let trial = repo("data/trial.csv").to_str().unwrap().to_string();
    let hist: Vec<String> = (1..=3).map(|i| repo(&format!("data/historical_{i}.csv")).to_str().unwrap().to_string()).collect();
    let sim = repo("configs/simulate.json").to_str().unwrap().to_string();
    let runs: Vec<(&str, Vec<&str>, Vec<&str>)> = vec![
        ("fit", vec!["fit", "--config", &t, "--data", &trial], vec![]),
        ("estimate", vec!["estimate", "--config", &e, "--data", &trial], vec!["curves.csv"]),
        ("test", vec!["test", "--config", &t, "--data", &trial], vec![]),
        ("sequential", vec!["sequential", "--config", &t, "--data", &trial], vec!["trajectory.csv"]),
        ("bfda", vec!["bfda", "--config", &b], vec!["reps.ndjson", "bf.csv"]),
        (
            "map-prior",
            vec!["map-prior", "--config", &m, "--data", &hist[0], "--data", &hist[1], "--data", &hist[2]],
            vec![],
        ),
        ("simulate", vec!["simulate", "--config", &sim], vec![]),
    ];
    let mut bad = Vec::new();
    for (name, args, side) in &runs {
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let mut a = args.clone();
            a.extend(["--threads", "1"]);
            let (code, stdout) = cli(&a);
            let files: Vec<Vec<u8>> = side.iter().map(|f| fs::read(d.join(f)).unwrap_or_default()).collect();
            outputs.push((code, stdout, files));
        }
        if outputs[0].0 != 0 || outputs[0] != outputs[1] {
            bad.push(format!("{name} (exit {})", outputs[0].0));
        }
    }
    let ok = bad.is_empty();
    let msg = if ok {
        format!("{} subcommands byte-identical across repeated runs with --threads 1", runs.len())
    } else {
        format!("not reproducible or failed: {}", bad.join(", "))
    };
    (ok, msg)
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "binomial Bayes factors", criterion_1),
        (2, "bridge sampling vs quadrature", criterion_2),
        (3, "sampler vs quadrature and prior recovery", criterion_3),
        (4, "ensemble identities", criterion_4),
        (5, "sequential final look equals fixed-n analysis", criterion_5),
        (6, "design analysis misleading evidence and calibration", criterion_6),
        (7, "sequential power at n = 2070", criterion_7),
        (8, "estimator metrics vs leave-one-out", criterion_8),
        (9, "meta-analytic predictive prior", criterion_9),
        (10, "subcommand determinism", criterion_10),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = run();
        failures += usize::from(!ok);
        println!(
            "criterion {id:>2} {}: {name}: {detail} [{:.1} s]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
