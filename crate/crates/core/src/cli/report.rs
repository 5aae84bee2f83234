//! Subcommand implementations and their JSON reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::config::{validate_estimation, validate_testing, AnalysisConfig};
use super::io::{to_json_bytes, write_survival_csv};
use super::Outputs;
use crate::design::{
    calibrate_fixed, calibrate_sequential, evaluate_design, generating_models, misleading_evidence_rate,
    nearest_rank_quantile, run_bfda, BfdaScenario, CalibrationResult, DesignKind, DesignMetrics, Hypothesis,
    ReplicationSet,
};
use crate::ensemble::{fit_ensemble, fit_models, CurveKind, CurvePoint, EnsembleResult, InclusionBf, ModelResult, WeightedDraws};
use crate::error::{Error, Result};
use crate::families::{FamilyKind, SurvivalDataset};
use crate::map_priors::{map_prior as build_map_prior, FamilyMapPrior};
use crate::mle::{fit_mle, select_model, wald_one_sided, Criterion, MleFit, WaldTest};
use crate::priors::ModelSpec;
use crate::sampler::PosteriorFit;
use crate::sequential::{run_sequential, Decision, DecisionThresholds, EvidenceTrajectory};

#[derive(Debug, Serialize)]
struct DataSummary {
    n: usize,
    events: usize,
    comparator: usize,
    treated: usize,
    max_time: Option<f64>,
}

fn data_summary(d: &SurvivalDataset) -> DataSummary {
    let (comparator, treated) = d.arm_counts();
    DataSummary { n: d.len(), events: d.event_count(), comparator, treated, max_time: d.max_time() }
}

#[derive(Debug, Serialize)]
struct ParamSummary {
    name: String,
    mean: f64,
    sd: f64,
    median: f64,
    lower: f64,
    upper: f64,
    mcse_mean: f64,
    rhat: f64,
    ess: f64,
}

fn param_summaries(fit: &PosteriorFit) -> Vec<ParamSummary> {
    (0..fit.dimension())
        .map(|j| {
            let col = fit.column(j);
            ParamSummary {
                name: fit.free_parameter_names[j].clone(),
                mean: fit.mean(j),
                sd: fit.sd(j),
                median: nearest_rank_quantile(&col, 0.5),
                lower: nearest_rank_quantile(&col, 0.025),
                upper: nearest_rank_quantile(&col, 0.975),
                mcse_mean: fit.mcse_mean(j),
                rhat: fit.rhat[j],
                ess: fit.ess[j],
            }
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct ModelRow {
    label: String,
    family: FamilyKind,
    null: bool,
    prior_prob: f64,
    posterior_prob: Option<f64>,
    log_marglik: f64,
    inclusion_bf: Option<InclusionBf>,
    bridge_iterations: usize,
    parameters: Vec<ParamSummary>,
    warnings: Vec<String>,
}

fn model_row(m: &ModelResult, post: Option<f64>, bf: Option<InclusionBf>) -> ModelRow {
    ModelRow {
        label: m.spec.label(),
        family: m.spec.family,
        null: m.spec.is_null(),
        prior_prob: m.spec.prior_weight,
        posterior_prob: post,
        log_marglik: m.bridge.log_marglik,
        inclusion_bf: bf,
        bridge_iterations: m.bridge.iterations_used,
        parameters: param_summaries(&m.fit),
        warnings: m.fit.warnings.clone(),
    }
}

fn model_table(r: &EnsembleResult) -> Vec<ModelRow> {
    r.models
        .iter()
        .enumerate()
        .map(|(i, m)| model_row(m, Some(r.posterior_probs[i]), r.per_model_inclusion_bf[i]))
        .collect()
}

#[derive(Debug, Serialize)]
struct BetaSummary {
    mean: f64,
    median: f64,
    lower: f64,
    upper: f64,
}

fn beta_summary(w: &WeightedDraws) -> BetaSummary {
    BetaSummary { mean: w.mean(), median: w.quantile(0.5), lower: w.quantile(0.025), upper: w.quantile(0.975) }
}

fn family_probs(r: &EnsembleResult) -> BTreeMap<FamilyKind, f64> {
    FamilyKind::ALL.iter().zip(r.family_probs()).map(|(f, p)| (*f, p)).collect()
}

#[derive(Debug, Serialize)]
struct MleRow {
    #[serde(flatten)]
    fit: MleFit,
    wald: Option<WaldTest>,
}

#[derive(Debug, Serialize)]
struct FitReport {
    command: &'static str,
    seed: u64,
    data: DataSummary,
    models: Vec<ModelRow>,
    mle: Vec<MleRow>,
    selected_aic: Option<FamilyKind>,
    selected_bic: Option<FamilyKind>,
}

pub fn fit(cfg: &AnalysisConfig, data: &SurvivalDataset, seed: Option<u64>) -> Result<Outputs> {
    if cfg.models.is_empty() {
        return Err(Error::Config("configuration lists no models".into()));
    }
    let settings = cfg.settings(seed);
    let fits = fit_models(&cfg.models, data, &settings, settings.seed)?;
    let (n0, n1) = data.arm_counts();
    let with_treatment = n0 > 0 && n1 > 0;
    let mut families: Vec<FamilyKind> = cfg.models.iter().map(|m| m.family).collect();
    families.sort();
    families.dedup();
    let mut mle = Vec::new();
    if data.event_count() > 0 {
        for f in families {
            let fit = fit_mle(f, data, with_treatment)?;
            let wald = wald_one_sided(&fit, 0.05).ok();
            mle.push(MleRow { fit, wald });
        }
    }
    let plain: Vec<MleFit> = mle.iter().map(|r| r.fit.clone()).collect();
    let pick = |c| select_model(&plain, c).ok().map(|i| plain[i].family);
    let report = FitReport {
        command: "fit",
        seed: settings.seed,
        data: data_summary(data),
        models: fits.iter().map(|m| model_row(m, None, None)).collect(),
        selected_aic: pick(Criterion::Aic),
        selected_bic: pick(Criterion::Bic),
        mle,
    };
    Ok(Outputs { main: to_json_bytes(&report)?, side: Vec::new() })
}

#[derive(Debug, Serialize)]
struct CurveSeries {
    kind: CurveKind,
    treated: bool,
    points: Vec<CurvePoint>,
}

#[derive(Debug, Serialize)]
struct EstimateReport {
    command: &'static str,
    seed: u64,
    data: DataSummary,
    models: Vec<ModelRow>,
    family_posterior_probs: BTreeMap<FamilyKind, f64>,
    beta: BetaSummary,
    acceleration_factor: BetaSummary,
    curves: Vec<CurveSeries>,
}

fn curve_times(cfg: &AnalysisConfig, data: &SurvivalDataset) -> Result<Vec<f64>> {
    if let Some(t) = &cfg.curve_times {
        return Ok(t.clone());
    }
    let max = data.max_time().ok_or_else(|| Error::Config("curves need data or curve_times".into()))?;
    Ok((1..=50).map(|k| max * k as f64 / 50.0).collect())
}

pub fn estimate(cfg: &AnalysisConfig, data: &SurvivalDataset, seed: Option<u64>) -> Result<Outputs> {
    validate_estimation(&cfg.models)?;
    let times = curve_times(cfg, data)?;
    if let Some(&t) = times.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::Config(format!("curve times must be positive, got {t}")));
    }
    let settings = cfg.settings(seed);
    let r = fit_ensemble(&cfg.models, data, &settings, settings.seed)?;
    let w = r.beta_mixture()?;
    let af = WeightedDraws { values: w.values.iter().map(|b| b.exp()).collect(), weights: w.weights.clone() };
    let mut curves = Vec::new();
    for kind in [CurveKind::Survival, CurveKind::Hazard] {
        for treated in [false, true] {
            curves.push(CurveSeries { kind, treated, points: r.curve(kind, &times, treated)? });
        }
    }
    let mut side = Vec::new();
    if let Some(p) = &cfg.outputs.curves_csv {
        let mut s = String::from("kind,group,time,mean,lower,upper\n");
        for c in &curves {
            let kind = match c.kind {
                CurveKind::Survival => "survival",
                CurveKind::Hazard => "hazard",
            };
            for pt in &c.points {
                let _ = writeln!(s, "{kind},{},{},{},{},{}", c.treated as u8, pt.time, pt.mean, pt.lower, pt.upper);
            }
        }
        side.push((p.clone(), s.into_bytes()));
    }
    let report = EstimateReport {
        command: "estimate",
        seed: settings.seed,
        data: data_summary(data),
        models: model_table(&r),
        family_posterior_probs: family_probs(&r),
        beta: beta_summary(&w),
        acceleration_factor: beta_summary(&af),
        curves,
    };
    Ok(Outputs { main: to_json_bytes(&report)?, side })
}

#[derive(Debug, Serialize)]
struct TestReport {
    command: &'static str,
    seed: u64,
    data: DataSummary,
    models: Vec<ModelRow>,
    inclusion_bf_effect: InclusionBf,
    bf01: f64,
    per_family_inclusion_bf: BTreeMap<FamilyKind, InclusionBf>,
    family_posterior_probs: BTreeMap<FamilyKind, f64>,
    /// Conditional on the effect models.
    beta: Option<BetaSummary>,
    decision: Option<Decision>,
}

pub fn test(cfg: &AnalysisConfig, data: &SurvivalDataset, seed: Option<u64>) -> Result<Outputs> {
    validate_testing(&cfg.models)?;
    if let Some(t) = &cfg.thresholds {
        t.validate()?;
    }
    let settings = cfg.settings(seed);
    let r = fit_ensemble(&cfg.models, data, &settings, settings.seed)?;
    let bf = r.inclusion_bf_effect.expect("validated testing ensemble");
    let report = TestReport {
        command: "test",
        seed: settings.seed,
        data: data_summary(data),
        models: model_table(&r),
        inclusion_bf_effect: bf,
        bf01: 1.0 / bf.value,
        per_family_inclusion_bf: r.per_family_inclusion_bf.clone(),
        family_posterior_probs: family_probs(&r),
        beta: r.beta_mixture().ok().map(|w| beta_summary(&w)),
        decision: cfg.thresholds.map(|t| t.decide(bf.value)),
    };
    Ok(Outputs { main: to_json_bytes(&report)?, side: Vec::new() })
}

#[derive(Debug, Serialize)]
struct SequentialReport {
    command: &'static str,
    seed: u64,
    data: DataSummary,
    thresholds: DecisionThresholds,
    trajectory: EvidenceTrajectory,
}

pub fn sequential(cfg: &AnalysisConfig, data: &SurvivalDataset, seed: Option<u64>) -> Result<Outputs> {
    validate_testing(&cfg.models)?;
    let schedule = cfg.schedule.ok_or_else(|| Error::Config("sequential analysis needs a schedule".into()))?;
    let thresholds = cfg.thresholds.ok_or_else(|| Error::Config("sequential analysis needs thresholds".into()))?;
    schedule.validate()?;
    thresholds.validate()?;
    let settings = cfg.settings(seed);
    let trajectory = run_sequential(data, &cfg.models, &schedule, &thresholds, &settings)?;
    let mut side = Vec::new();
    if let Some(p) = &cfg.outputs.trajectory_csv {
        let mut buf = Vec::new();
        trajectory.write_csv(&mut buf)?;
        side.push((p.clone(), buf));
    }
    let report = SequentialReport { command: "sequential", seed: settings.seed, data: data_summary(data), thresholds, trajectory };
    Ok(Outputs { main: to_json_bytes(&report)?, side })
}

#[derive(Debug, Serialize)]
struct HypothesisSummary {
    replications: usize,
    failed: usize,
    bf10_median: Option<f64>,
    misleading_rate: Option<f64>,
    /// Decisions at the calibrated thresholds.
    metrics: Option<DesignMetrics>,
    /// Decisions at the configured thresholds, when given.
    metrics_at_configured: Option<DesignMetrics>,
}

#[derive(Debug, Serialize)]
struct BfdaReport {
    command: &'static str,
    seed: u64,
    n_participants: usize,
    design: DesignKind,
    misleading_threshold: f64,
    h0: HypothesisSummary,
    h1: HypothesisSummary,
    /// Calibration on the terminal Bayes factors.
    fixed_calibration: Option<CalibrationResult>,
    /// Calibration on whole trajectories (sequential designs).
    sequential_calibration: Option<CalibrationResult>,
    calibration_error: Option<String>,
}

fn fixed_decisions(bfs: &[f64], t: &DecisionThresholds) -> Vec<(Decision, Option<f64>)> {
    bfs.iter()
        .map(|&b| {
            let d = if b > t.bf10_upper {
                Decision::AcceptH1
            } else if 1.0 / b > t.bf01_upper {
                Decision::AcceptH0
            } else {
                Decision::Undecided
            };
            (d, None)
        })
        .collect()
}

fn sequential_decisions(set: &ReplicationSet, t: &DecisionThresholds) -> Vec<(Decision, Option<f64>)> {
    set.trajectories()
        .iter()
        .map(|tr| match tr.first_crossing(t) {
            Some((d, time)) => (d, Some(time)),
            None => (Decision::Undecided, None),
        })
        .collect()
}

pub fn bfda(cfg: &AnalysisConfig, seed: Option<u64>) -> Result<Outputs> {
    let section = cfg.bfda.as_ref().ok_or_else(|| Error::Config("bfda needs a `bfda` section".into()))?;
    validate_testing(&cfg.models)?;
    if let Some(t) = &cfg.thresholds {
        t.validate()?;
    }
    if !(section.truncate > 1.0) {
        return Err(Error::Config("bfda truncation bound must exceed 1".into()));
    }
    let master = cfg.master_seed(seed);
    let generating = section.generating_models.clone().unwrap_or_else(|| cfg.models.clone());
    let scenario = |h: Hypothesis| -> Result<BfdaScenario> {
        let s = BfdaScenario {
            generating_ensemble: generating_models(&generating, h)?,
            hypothesis: h,
            n_participants: section.n_participants,
            censoring: section.censoring,
            replications: section.replications,
            design: section.design,
            master_seed: crate::seeding::derive_seed(master, &[h as u64]),
            leave_one_family_out: section.leave_one_family_out,
        };
        s.validate()?;
        Ok(s)
    };
    let (s0, s1) = (scenario(Hypothesis::H0)?, scenario(Hypothesis::H1)?);
    let sequential = matches!(section.design, DesignKind::Sequential { .. });
    let analysis = crate::design::AnalysisConfig {
        models: cfg.models.clone(),
        settings: cfg.settings(seed),
        thresholds: DecisionThresholds::NEVER,
        truncate: sequential.then_some(section.truncate),
    };
    let result = run_bfda(&s0, &s1, &analysis)?;

    let (b0, b1) = (result.h0.bf10(), result.h1.bf10());
    let mut calibration_error = None;
    let fixed_calibration = if !b0.is_empty() && !b1.is_empty() {
        Some(calibrate_fixed(&b0, &b1, section.alpha, section.beta)?)
    } else {
        None
    };
    let sequential_calibration = if sequential && !b0.is_empty() && !b1.is_empty() {
        match calibrate_sequential(
            &result.h0.trajectories(),
            &result.h1.trajectories(),
            section.alpha,
            section.beta,
            section.truncate,
        ) {
            Ok(c) => Some(c),
            Err(e @ Error::Calibration(_)) => {
                calibration_error = Some(e.to_string());
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let calibrated = if sequential { sequential_calibration } else { fixed_calibration }
        .map(|c| DecisionThresholds { bf10_upper: c.bf10_threshold, bf01_upper: c.bf01_threshold });
    let summarize = |set: &ReplicationSet, bfs: &[f64], truth: Hypothesis| -> Result<HypothesisSummary> {
        let decide = |t: &DecisionThresholds| -> Result<Option<DesignMetrics>> {
            if set.records.is_empty() {
                return Ok(None);
            }
            let d = if sequential { sequential_decisions(set, t) } else { fixed_decisions(bfs, t) };
            evaluate_design(&d, truth).map(Some)
        };
        Ok(HypothesisSummary {
            replications: set.records.len() + set.failed.len(),
            failed: set.failed.len(),
            bf10_median: (!bfs.is_empty()).then(|| nearest_rank_quantile(bfs, 0.5)),
            misleading_rate: (!bfs.is_empty()).then(|| misleading_evidence_rate(bfs, truth, section.misleading_threshold)),
            metrics: match &calibrated {
                Some(t) => decide(t)?,
                None => None,
            },
            metrics_at_configured: match &cfg.thresholds {
                Some(t) => decide(t)?,
                None => None,
            },
        })
    };
    let report = BfdaReport {
        command: "bfda",
        seed: master,
        n_participants: section.n_participants,
        design: section.design,
        misleading_threshold: section.misleading_threshold,
        h0: summarize(&result.h0, &b0, Hypothesis::H0)?,
        h1: summarize(&result.h1, &b1, Hypothesis::H1)?,
        fixed_calibration,
        sequential_calibration,
        calibration_error,
    };
    let mut side = Vec::new();
    if let Some(p) = &cfg.outputs.replication_log {
        let mut buf = Vec::new();
        result.h0.write_ndjson(&mut buf)?;
        result.h1.write_ndjson(&mut buf)?;
        side.push((p.clone(), buf));
    }
    if let Some(p) = &cfg.outputs.histogram_csv {
        let mut s = String::from("hypothesis,replication,bf10\n");
        for set in [&result.h0, &result.h1] {
            for r in &set.records {
                let _ = writeln!(s, "{:?},{},{}", r.hypothesis, r.replication, r.bf10);
            }
        }
        side.push((p.clone(), s.into_bytes()));
    }
    Ok(Outputs { main: to_json_bytes(&report)?, side })
}

#[derive(Debug, Serialize)]
struct MapPriorReport {
    command: &'static str,
    seed: u64,
    studies: usize,
    families: Vec<FamilyMapPrior>,
    /// Configured models with intercept and auxiliary priors replaced.
    models: Vec<ModelSpec>,
}

pub fn map_prior(cfg: &AnalysisConfig, historical: &[SurvivalDataset], seed: Option<u64>) -> Result<Outputs> {
    let section = cfg.map_prior.as_ref().ok_or_else(|| Error::Config("map-prior needs a `map_prior` section".into()))?;
    if section.families.is_empty() {
        return Err(Error::Config("map_prior.families is empty".into()));
    }
    let settings = cfg.settings(seed);
    settings.validate()?;
    let mut families = Vec::new();
    for (i, &f) in section.families.iter().enumerate() {
        let s = settings.with_seed(crate::seeding::derive_seed(settings.seed, &[i as u64]));
        families.push(build_map_prior(f, historical, &s, section.heterogeneity)?);
    }
    let models = cfg
        .models
        .iter()
        .map(|m| {
            let mut m = m.clone();
            if let Some(fp) = families.iter().find(|fp| fp.family == m.family) {
                m.prior_alpha = fp.prior_alpha.predictive;
                if let Some(g) = &fp.prior_gamma {
                    m.prior_gamma = Some(g.predictive);
                }
            }
            m
        })
        .collect();
    let report = MapPriorReport { command: "map-prior", seed: settings.seed, studies: historical.len(), families, models };
    Ok(Outputs { main: to_json_bytes(&report)?, side: Vec::new() })
}

/// Writes the simulated dataset as CSV in place of a JSON report.
pub fn simulate(cfg: &AnalysisConfig, seed: Option<u64>) -> Result<Outputs> {
    let section = cfg.simulate.as_ref().ok_or_else(|| Error::Config("simulate needs a `simulate` section".into()))?;
    let generating = section.generating_models.clone().unwrap_or_else(|| cfg.models.clone());
    let scenario = BfdaScenario {
        generating_ensemble: generating_models(&generating, section.hypothesis)?,
        hypothesis: section.hypothesis,
        n_participants: section.n_participants,
        censoring: section.censoring,
        replications: 1,
        design: DesignKind::FixedN,
        master_seed: cfg.master_seed(seed),
        leave_one_family_out: false,
    };
    scenario.validate()?;
    let (data, truth) = crate::design::simulate_trial(&scenario, section.replication)?;
    log::info!("simulated from {} with {:?}", truth.family, truth.params);
    let mut buf = Vec::new();
    write_survival_csv(&data, &mut buf)?;
    Ok(Outputs { main: buf, side: Vec::new() })
}
