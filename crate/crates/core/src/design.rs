//! Bayes factor design analysis.
//!
//! Trials are simulated from the prior predictive of a generating ensemble, analysed with
//! the testing ensemble, and the resulting Bayes factors (or evidence trajectories) are
//! used to estimate error rates and to calibrate decision thresholds.

use std::io::Write;

use log::warn;
use rand::distributions::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{fit_ensemble, validate_ensemble, EnsembleResult};
use crate::error::{Error, Result};
use crate::families::{sample_time, FamilyKind, ParamVector, SurvivalDataset, SurvivalRecord};
use crate::priors::ModelSpec;
use crate::sampler::SamplerSettings;
use crate::seeding::{derive_seed, stream};
use crate::sequential::{
    run_sequential_with, Decision, DecisionThresholds, EvidenceTrajectory, LookSchedule, MonitorOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

/// Weibull censoring times plus a hard administrative cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensoringModel {
    pub shape: f64,
    /// `inf` disables random censoring.
    pub scale: f64,
    /// `inf` disables the cutoff.
    pub cutoff: f64,
}

impl CensoringModel {
    pub const NONE: Self = Self { shape: 1.0, scale: f64::INFINITY, cutoff: f64::INFINITY };

    pub fn validate(&self) -> Result<()> {
        if !(self.shape > 0.0 && self.shape.is_finite() && self.scale > 0.0 && self.cutoff > 0.0) {
            return Err(Error::Config(format!(
                "censoring needs positive shape, scale and cutoff, got ({}, {}, {})",
                self.shape, self.scale, self.cutoff
            )));
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.scale.is_infinite() {
            return f64::INFINITY;
        }
        let u: f64 = rng.sample(Open01);
        self.scale * (-u.ln()).powf(1.0 / self.shape)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum DesignKind {
    FixedN,
    Sequential { schedule: LookSchedule },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BfdaScenario {
    pub generating_ensemble: Vec<ModelSpec>,
    pub hypothesis: Hypothesis,
    pub n_participants: usize,
    pub censoring: CensoringModel,
    pub replications: usize,
    pub design: DesignKind,
    pub master_seed: u64,
    /// Drop the generating family from the analysis ensemble.
    #[serde(default)]
    pub leave_one_family_out: bool,
}

impl BfdaScenario {
    pub fn validate(&self) -> Result<()> {
        validate_ensemble(&self.generating_ensemble)?;
        self.censoring.validate()?;
        if self.n_participants == 0 {
            return Err(Error::Config("scenario needs at least one participant".into()));
        }
        if let DesignKind::Sequential { schedule } = &self.design {
            schedule.validate()?;
        }
        Ok(())
    }
}

/// Models of `ensemble` matching the hypothesis (null for H0, effect for H1), weights renormalized.
pub fn generating_models(ensemble: &[ModelSpec], hypothesis: Hypothesis) -> Result<Vec<ModelSpec>> {
    let keep: Vec<ModelSpec> =
        ensemble.iter().filter(|m| m.is_null() == (hypothesis == Hypothesis::H0)).cloned().collect();
    renormalize(keep)
}

fn renormalize(mut models: Vec<ModelSpec>) -> Result<Vec<ModelSpec>> {
    let total: f64 = models.iter().map(|m| m.prior_weight).sum();
    if models.is_empty() || !(total > 0.0) {
        return Err(Error::Config("no models left after filtering the ensemble".into()));
    }
    for m in &mut models {
        m.prior_weight /= total;
    }
    Ok(models)
}

/// Analysis ensemble with `family` removed.
pub fn without_family(ensemble: &[ModelSpec], family: FamilyKind) -> Result<Vec<ModelSpec>> {
    renormalize(ensemble.iter().filter(|m| m.family != family).cloned().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialTruth {
    pub model_index: usize,
    pub family: FamilyKind,
    pub params: ParamVector,
}

/// Simulates one trial; deterministic in `(scenario.master_seed, replication)`.
/// The first `n/2` participants are in the comparator arm.
pub fn simulate_trial(scenario: &BfdaScenario, replication: usize) -> Result<(SurvivalDataset, TrialTruth)> {
    let mut rng = stream(scenario.master_seed, &[replication as u64, 0]);
    let models = &scenario.generating_ensemble;
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut model_index = models.len() - 1;
    for (i, m) in models.iter().enumerate() {
        acc += m.prior_weight;
        if u < acc {
            model_index = i;
            break;
        }
    }
    let m = &models[model_index];
    let params = ParamVector {
        beta: m.prior_beta.sample(&mut rng),
        alpha: m.prior_alpha.sample(&mut rng),
        gamma: m.prior_gamma.map(|g| g.sample(&mut rng)),
    };
    let n = scenario.n_participants;
    let c = &scenario.censoring;
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let treated = i >= n / 2;
        let t = sample_time(m.family, params.eta(treated), params.gamma, &mut rng)?.max(f64::MIN_POSITIVE);
        let cens = c.sample(&mut rng).min(c.cutoff);
        records.push(SurvivalRecord { time: t.min(cens), event: t <= cens, treated });
    }
    let data = SurvivalDataset::new(records)?;
    Ok((data, TrialTruth { model_index, family: m.family, params }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub models: Vec<ModelSpec>,
    pub settings: SamplerSettings,
    /// Sequential stopping rule; defaults to never stopping.
    #[serde(default = "never")]
    pub thresholds: DecisionThresholds,
    /// Sequential truncation bound; trajectories end once BF10 leaves [1/b, b].
    #[serde(default)]
    pub truncate: Option<f64>,
}

fn never() -> DecisionThresholds {
    DecisionThresholds::NEVER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub hypothesis: Hypothesis,
    pub seed: u64,
    pub truth: TrialTruth,
    pub events: usize,
    /// Fixed-n: the terminal BF10. Sequential: BF10 at the last completed look.
    pub bf10: f64,
    pub decision: Decision,
    pub decision_time: Option<f64>,
    /// Model-averaged posterior mean of beta and its central 95% interval over effect models.
    pub beta_mean: Option<f64>,
    pub beta_interval: Option<(f64, f64)>,
    pub trajectory: Option<EvidenceTrajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSet {
    pub hypothesis: Hypothesis,
    pub records: Vec<ReplicationRecord>,
    /// Replication indices whose analysis failed.
    pub failed: Vec<usize>,
}

impl ReplicationSet {
    pub fn bf10(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.bf10).collect()
    }

    pub fn trajectories(&self) -> Vec<&EvidenceTrajectory> {
        self.records.iter().filter_map(|r| r.trajectory.as_ref()).collect()
    }

    pub fn decisions(&self) -> Vec<(Decision, Option<f64>)> {
        self.records.iter().map(|r| (r.decision, r.decision_time)).collect()
    }

    /// One JSON object per line.
    pub fn write_ndjson<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            writeln!(out)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BfdaResult {
    pub h0: ReplicationSet,
    pub h1: ReplicationSet,
}

fn beta_summary(result: &EnsembleResult) -> (Option<f64>, Option<(f64, f64)>) {
    match result.beta_mixture() {
        Ok(w) => (Some(w.mean()), Some((w.quantile(0.025), w.quantile(0.975)))),
        Err(_) => (None, None),
    }
}

/// Runs every replication of one scenario.
pub fn run_scenario(scenario: &BfdaScenario, analysis: &AnalysisConfig) -> Result<ReplicationSet> {
    scenario.validate()?;
    validate_ensemble(&analysis.models)?;
    analysis.settings.validate()?;
    let results: Vec<Result<Option<ReplicationRecord>>> = (0..scenario.replications)
        .into_par_iter()
        .map(|rep| {
            let (data, truth) = simulate_trial(scenario, rep)?;
            let models = if scenario.leave_one_family_out {
                without_family(&analysis.models, truth.family)?
            } else {
                analysis.models.clone()
            };
            let seed = derive_seed(scenario.master_seed, &[rep as u64, 1]);
            let settings = analysis.settings.with_seed(seed);
            let outcome = match &scenario.design {
                DesignKind::FixedN => fit_ensemble(&models, &data, &settings, seed).map(|r| {
                    let bf = r.inclusion_bf_effect.map_or(f64::NAN, |b| b.value);
                    let (beta_mean, beta_interval) = beta_summary(&r);
                    (bf, Decision::Undecided, None, beta_mean, beta_interval, None)
                }),
                DesignKind::Sequential { schedule } => {
                    let mut last_beta = (None, None);
                    run_sequential_with(
                        &data,
                        &models,
                        schedule,
                        &analysis.thresholds,
                        &settings,
                        MonitorOptions { truncate: analysis.truncate },
                        |_, _, r| last_beta = beta_summary(r),
                    )
                    .map(|t| {
                        let bf = t.bf10.last().copied().unwrap_or(f64::NAN);
                        (bf, t.decision, t.decision_time, last_beta.0, last_beta.1, Some(t))
                    })
                }
            };
            match outcome {
                Ok((bf10, decision, decision_time, beta_mean, beta_interval, trajectory)) => {
                    Ok(Some(ReplicationRecord {
                        replication: rep,
                        hypothesis: scenario.hypothesis,
                        seed,
                        truth,
                        events: data.event_count(),
                        bf10,
                        decision,
                        decision_time,
                        beta_mean,
                        beta_interval,
                        trajectory,
                    }))
                }
                Err(e) if e.is_numerical() => {
                    warn!("replication {rep} failed: {e}");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut records = Vec::new();
    let mut failed = Vec::new();
    for (rep, r) in results.into_iter().enumerate() {
        match r? {
            Some(rec) => records.push(rec),
            None => failed.push(rep),
        }
    }
    Ok(ReplicationSet { hypothesis: scenario.hypothesis, records, failed })
}

/// Paired runs under H0 and H1 sharing sample size and analysis configuration.
pub fn run_bfda(h0: &BfdaScenario, h1: &BfdaScenario, analysis: &AnalysisConfig) -> Result<BfdaResult> {
    if h0.n_participants != h1.n_participants {
        return Err(Error::Config("H0 and H1 scenarios must share the sample size".into()));
    }
    if h0.hypothesis != Hypothesis::H0 || h1.hypothesis != Hypothesis::H1 {
        return Err(Error::Config("scenarios must be labelled H0 and H1 respectively".into()));
    }
    Ok(BfdaResult { h0: run_scenario(h0, analysis)?, h1: run_scenario(h1, analysis)? })
}

/// Fraction of Bayes factors at or beyond `threshold` in the misleading direction.
pub fn misleading_evidence_rate(bf10: &[f64], truth: Hypothesis, threshold: f64) -> f64 {
    if bf10.is_empty() {
        return f64::NAN;
    }
    let hits = bf10
        .iter()
        .filter(|&&b| match truth {
            Hypothesis::H0 => b >= threshold,
            Hypothesis::H1 => 1.0 / b >= threshold,
        })
        .count();
    hits as f64 / bf10.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub value: f64,
    pub se: f64,
}

impl Proportion {
    pub fn from_counts(k: usize, n: usize) -> Self {
        let p = k as f64 / n as f64;
        Self { value: p, se: (p * (1.0 - p) / n as f64).sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub bf10_threshold: f64,
    pub bf01_threshold: f64,
    pub achieved_false_positive: Proportion,
    pub achieved_false_negative: Proportion,
}

/// Lower nearest-rank quantile: the `ceil(p n)`-th smallest value (1-based).
pub fn nearest_rank_quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[k - 1]
}

fn check_rates(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
        return Err(Error::Config(format!("error rates must lie in (0, 1), got ({alpha}, {beta})")));
    }
    Ok(())
}

/// Fixed-n thresholds: BF10 threshold is the (1 - alpha) quantile under H0, the BF01 threshold
/// the reciprocal of the beta quantile under H1; both clamped to at least 1. Achieved rates
/// count strict exceedances.
pub fn calibrate_fixed(bf_h0: &[f64], bf_h1: &[f64], alpha: f64, beta: f64) -> Result<CalibrationResult> {
    check_rates(alpha, beta)?;
    if bf_h0.is_empty() || bf_h1.is_empty() {
        return Err(Error::Calibration("calibration needs samples under both hypotheses".into()));
    }
    let t10 = nearest_rank_quantile(bf_h0, 1.0 - alpha).max(1.0);
    let t01 = (1.0 / nearest_rank_quantile(bf_h1, beta)).max(1.0);
    let fp = bf_h0.iter().filter(|&&b| b > t10).count();
    let fneg = bf_h1.iter().filter(|&&b| 1.0 / b > t01).count();
    Ok(CalibrationResult {
        bf10_threshold: t10,
        bf01_threshold: t01,
        achieved_false_positive: Proportion::from_counts(fp, bf_h0.len()),
        achieved_false_negative: Proportion::from_counts(fneg, bf_h1.len()),
    })
}

/// Geometric threshold grid `1.1^j`, j >= 1, up to `max`.
pub fn threshold_grid(max: f64) -> Vec<f64> {
    (1..).map(|j| 1.1f64.powi(j)).take_while(|&v| v <= max * (1.0 + 1e-12)).collect()
}

fn crossing_rate(trajs: &[&EvidenceTrajectory], upper: f64, lower: f64, wanted: Decision) -> usize {
    let th = DecisionThresholds { bf10_upper: upper, bf01_upper: lower };
    trajs.iter().filter(|t| t.first_crossing(&th).map(|c| c.0) == Some(wanted)).count()
}

/// Sequential thresholds on the grid `1.1^j` up to `grid_max`.
///
/// Starting from the smallest lower bound, alternately takes the smallest upper bound whose
/// H0 upward-crossing rate is at most `alpha` and the smallest lower bound whose H1
/// downward-crossing rate is at most `beta`, until the pair is stable.
pub fn calibrate_sequential(
    trajectories_h0: &[&EvidenceTrajectory],
    trajectories_h1: &[&EvidenceTrajectory],
    alpha: f64,
    beta: f64,
    grid_max: f64,
) -> Result<CalibrationResult> {
    check_rates(alpha, beta)?;
    if trajectories_h0.is_empty() || trajectories_h1.is_empty() {
        return Err(Error::Calibration("calibration needs trajectories under both hypotheses".into()));
    }
    let grid = threshold_grid(grid_max);
    if grid.is_empty() {
        return Err(Error::Config(format!("threshold grid up to {grid_max} is empty")));
    }
    let (n0, n1) = (trajectories_h0.len(), trajectories_h1.len());
    let fp = |u: f64, l: f64| crossing_rate(trajectories_h0, u, l, Decision::AcceptH1);
    let fneg = |u: f64, l: f64| crossing_rate(trajectories_h1, u, l, Decision::AcceptH0);
    let (k_alpha, k_beta) = ((alpha * n0 as f64 + 1e-9).floor() as usize, (beta * n1 as f64 + 1e-9).floor() as usize);

    let mut lower = grid[0];
    let mut upper = grid[0];
    for _ in 0..=grid.len() * 2 {
        let Some(&u) = grid.iter().find(|&&u| fp(u, lower) <= k_alpha) else {
            return Err(infeasible(&grid, lower, true, fp(grid[grid.len() - 1], lower), n0));
        };
        let Some(&l) = grid.iter().find(|&&l| fneg(u, l) <= k_beta) else {
            return Err(infeasible(&grid, u, false, fneg(u, grid[grid.len() - 1]), n1));
        };
        let stable = u == upper && l == lower;
        upper = u;
        lower = l;
        if stable {
            break;
        }
    }
    // the final lower bound may have moved the H0 crossing rate
    if fp(upper, lower) > k_alpha {
        return Err(Error::Calibration(format!(
            "threshold search did not stabilize; last pair ({upper}, {lower})"
        )));
    }
    Ok(CalibrationResult {
        bf10_threshold: upper,
        bf01_threshold: lower,
        achieved_false_positive: Proportion::from_counts(fp(upper, lower), n0),
        achieved_false_negative: Proportion::from_counts(fneg(upper, lower), n1),
    })
}

fn infeasible(grid: &[f64], paired: f64, searching_upper: bool, best_count: usize, n: usize) -> Error {
    let top = grid[grid.len() - 1];
    let (u, l) = if searching_upper { (top, paired) } else { (paired, top) };
    Error::Calibration(format!(
        "no feasible threshold pair on the grid; best infeasible pair ({u}, {l}) with error rate {}",
        best_count as f64 / n as f64
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub value: f64,
    /// Absent with fewer than two observations.
    pub se: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignMetrics {
    pub n: usize,
    pub error_rate: Proportion,
    pub power: Proportion,
    pub undecided: Proportion,
    /// Over decided replications only.
    pub mean_decision_time: Option<MeanEstimate>,
}

/// Error rate (decision for the wrong hypothesis), power (decision for the true one),
/// undecided fraction and mean decision time.
pub fn evaluate_design(decisions: &[(Decision, Option<f64>)], truth: Hypothesis) -> Result<DesignMetrics> {
    if decisions.is_empty() {
        return Err(Error::Contract("design evaluation needs at least one decision".into()));
    }
    let (right, wrong) = match truth {
        Hypothesis::H0 => (Decision::AcceptH0, Decision::AcceptH1),
        Hypothesis::H1 => (Decision::AcceptH1, Decision::AcceptH0),
    };
    let n = decisions.len();
    let count = |d: Decision| decisions.iter().filter(|x| x.0 == d).count();
    let times: Vec<f64> =
        decisions.iter().filter(|x| x.0 != Decision::Undecided).filter_map(|x| x.1).collect();
    Ok(DesignMetrics {
        n,
        error_rate: Proportion::from_counts(count(wrong), n),
        power: Proportion::from_counts(count(right), n),
        undecided: Proportion::from_counts(count(Decision::Undecided), n),
        mean_decision_time: mean_estimate(&times),
    })
}

fn mean_estimate(xs: &[f64]) -> Option<MeanEstimate> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let se = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt());
    Some(MeanEstimate { value: m, se })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorMetrics {
    pub bias: f64,
    pub bias_se: f64,
    pub rmse: f64,
    /// Jackknife.
    pub rmse_se: f64,
    pub coverage: Proportion,
}

/// Bias, RMSE and interval coverage (bounds inclusive).
pub fn estimator_metrics(estimates: &[f64], truths: &[f64], ci_bounds: &[(f64, f64)]) -> Result<EstimatorMetrics> {
    let n = estimates.len();
    if n < 2 || truths.len() != n || ci_bounds.len() != n {
        return Err(Error::Contract("estimator metrics need at least two aligned records".into()));
    }
    let err: Vec<f64> = estimates.iter().zip(truths).map(|(e, t)| e - t).collect();
    let nf = n as f64;
    let bias = err.iter().sum::<f64>() / nf;
    let bias_se = (err.iter().map(|e| (e - bias).powi(2)).sum::<f64>() / (nf - 1.0) / nf).sqrt();
    let sq: f64 = err.iter().map(|e| e * e).sum();
    let rmse = (sq / nf).sqrt();
    // leave-one-out sums recomputed in record order
    let loo: Vec<f64> = (0..n)
        .map(|i| {
            let s: f64 = err.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, e)| e * e).sum();
            (s / (nf - 1.0)).sqrt()
        })
        .collect();
    let loo_mean = loo.iter().sum::<f64>() / nf;
    let rmse_se = ((nf - 1.0) / nf * loo.iter().map(|v| (v - loo_mean).powi(2)).sum::<f64>()).sqrt();
    let covered = truths.iter().zip(ci_bounds).filter(|&(&t, &(lo, hi))| lo <= t && t <= hi).count();
    Ok(EstimatorMetrics { bias, bias_se, rmse, rmse_se, coverage: Proportion::from_counts(covered, n) })
}
