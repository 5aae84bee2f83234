//! Bayesian model averaging over a set of survival models.
//!
//! Posterior model probabilities follow from prior weights and bridge-sampled marginal
//! likelihoods. Inclusion Bayes factors compare any subset of models (all effect models,
//! one family, a single model) against its complement. Estimation uses the mixture of
//! per-model posteriors for the treatment effect and averages survival and hazard curves.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridge::{bridge_marglik, BridgeResult};
use crate::error::{Error, Result};
use crate::families::{log_hazard, log_survival, FamilyKind, SurvivalDataset};
use crate::priors::ModelSpec;
use crate::sampler::{sample_posterior, PosteriorFit, SamplerSettings};
use crate::seeding::derive_seed;
use crate::special::log_sum_exp;

/// Tolerance on the sum of prior model weights.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// p_j proportional to prior_j * exp(log_ml_j), normalized with log-sum-exp.
pub fn posterior_model_probs(prior_probs: &[f64], log_mls: &[f64]) -> Result<Vec<f64>> {
    if prior_probs.len() != log_mls.len() || prior_probs.is_empty() {
        return Err(Error::Contract(format!(
            "{} prior probabilities for {} marginal likelihoods",
            prior_probs.len(),
            log_mls.len()
        )));
    }
    let total: f64 = prior_probs.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE || prior_probs.iter().any(|&p| !(p >= 0.0)) {
        return Err(Error::Contract(format!("prior probabilities must sum to 1, got {total}")));
    }
    let lw: Vec<f64> = prior_probs.iter().zip(log_mls).map(|(p, l)| p.ln() + l).collect();
    let norm = log_sum_exp(&lw);
    if !norm.is_finite() {
        return Err(Error::Numerical("all marginal likelihoods are zero or undefined".into()));
    }
    Ok(lw.iter().map(|l| (l - norm).exp()).collect())
}

/// Bayes factor of model 1 over model 0 from their log marginal likelihoods.
pub fn bayes_factor(log_ml_1: f64, log_ml_0: f64) -> f64 {
    (log_ml_1 - log_ml_0).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BfFlag {
    Finite,
    /// The complement has zero posterior mass.
    Infinite,
    /// The subset has zero posterior mass.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InclusionBf {
    /// May be `0` or `+inf`; see `flag`.
    pub value: f64,
    pub flag: BfFlag,
}

impl InclusionBf {
    pub fn is_finite(&self) -> bool {
        self.flag == BfFlag::Finite
    }

    pub fn ln(&self) -> f64 {
        self.value.ln()
    }
}

/// Posterior inclusion odds of `subset` divided by its prior inclusion odds.
pub fn inclusion_bf(prior_probs: &[f64], posterior_probs: &[f64], subset: &[usize]) -> Result<InclusionBf> {
    let n = prior_probs.len();
    if posterior_probs.len() != n {
        return Err(Error::Contract("prior and posterior vectors differ in length".into()));
    }
    let mut member = vec![false; n];
    for &i in subset {
        if i >= n {
            return Err(Error::Contract(format!("model index {i} out of range")));
        }
        member[i] = true;
    }
    let k = member.iter().filter(|&&m| m).count();
    if k == 0 || k == n {
        return Err(Error::Contract("inclusion subset must be nonempty and proper".into()));
    }
    let sum = |v: &[f64], inside: bool| -> f64 {
        v.iter().zip(&member).filter(|(_, &m)| m == inside).map(|(p, _)| *p).sum()
    };
    let (post_in, post_out) = (sum(posterior_probs, true), sum(posterior_probs, false));
    let (prior_in, prior_out) = (sum(prior_probs, true), sum(prior_probs, false));
    if post_out == 0.0 {
        return Ok(InclusionBf { value: f64::INFINITY, flag: BfFlag::Infinite });
    }
    if post_in == 0.0 {
        return Ok(InclusionBf { value: 0.0, flag: BfFlag::Zero });
    }
    Ok(InclusionBf { value: (post_in / post_out) / (prior_in / prior_out), flag: BfFlag::Finite })
}

/// Weighted draws of a mixture posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedDraws {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl WeightedDraws {
    pub fn mean(&self) -> f64 {
        let tw: f64 = self.weights.iter().sum();
        self.values.iter().zip(&self.weights).map(|(v, w)| v * w).sum::<f64>() / tw
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let tw: f64 = self.weights.iter().sum();
        self.values.iter().zip(&self.weights).map(|(v, w)| w * (v - m).powi(2)).sum::<f64>() / tw
    }

    /// Smallest value whose weighted empirical CDF reaches `q`.
    pub fn quantile(&self, q: f64) -> f64 {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        weighted_quantile_sorted(&idx, &self.values, &self.weights, q)
    }
}

fn weighted_quantile_sorted(order: &[usize], values: &[f64], weights: &[f64], q: f64) -> f64 {
    let tw: f64 = weights.iter().sum();
    let target = q * tw;
    let mut cum = 0.0;
    for &i in order {
        cum += weights[i];
        if cum >= target {
            return values[i];
        }
    }
    order.last().map_or(f64::NAN, |&i| values[i])
}

/// Mixture of per-model treatment-effect posteriors weighted by posterior model probability.
/// Each draw of model d carries weight p_d / n_d, so the mixture mean is sum_d p_d * mean_d.
pub fn mixture_posterior_beta(fits: &[&PosteriorFit], posterior_probs: &[f64]) -> Result<WeightedDraws> {
    if fits.len() != posterior_probs.len() {
        return Err(Error::Contract("one posterior probability per fit is required".into()));
    }
    let mut values = Vec::new();
    let mut weights = Vec::new();
    for (fit, &p) in fits.iter().zip(posterior_probs) {
        let j = fit.index_of("beta").ok_or_else(|| {
            Error::Contract("estimation mixtures need beta as a free parameter in every model".into())
        })?;
        let n = fit.len() as f64;
        for d in &fit.draws {
            values.push(d[j]);
            weights.push(p / n);
        }
    }
    Ok(WeightedDraws { values, weights })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Survival,
    Hazard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub time: f64,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Model-averaged survival curve for one arm with central 95% bands.
pub fn model_averaged_survival(
    times: &[f64],
    fits: &[&PosteriorFit],
    posterior_probs: &[f64],
    treated: bool,
) -> Result<Vec<CurvePoint>> {
    model_averaged_curve(CurveKind::Survival, times, fits, posterior_probs, treated)
}

/// Pointwise value is sum_d p_d * E_d[curve(t)]; bands are weighted quantiles of the
/// pooled draw-level curve values.
pub fn model_averaged_curve(
    kind: CurveKind,
    times: &[f64],
    fits: &[&PosteriorFit],
    posterior_probs: &[f64],
    treated: bool,
) -> Result<Vec<CurvePoint>> {
    if fits.len() != posterior_probs.len() {
        return Err(Error::Contract("one posterior probability per fit is required".into()));
    }
    if let Some(&t) = times.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::Domain(format!("curve times must be positive, got {t}")));
    }
    // collect parameter vectors once
    let mut params = Vec::with_capacity(fits.len());
    for fit in fits {
        let model = fit
            .model
            .as_ref()
            .ok_or_else(|| Error::Contract("curve averaging needs survival-model fits".into()))?;
        let rows: Vec<_> = (0..fit.parameter_draw_count()).filter_map(|i| fit.param_vector(i)).collect();
        params.push((model.family, rows));
    }
    times
        .par_iter()
        .map(|&t| {
            let mut values = Vec::new();
            let mut weights = Vec::new();
            let mut mean = 0.0;
            for ((family, rows), &p) in params.iter().zip(posterior_probs) {
                let n = rows.len() as f64;
                let mut acc = 0.0;
                for pv in rows {
                    let eta = pv.eta(treated);
                    let v = match kind {
                        CurveKind::Survival => log_survival(*family, t, eta, pv.gamma)?.exp(),
                        CurveKind::Hazard => log_hazard(*family, t, eta, pv.gamma)?.exp(),
                    };
                    acc += v;
                    values.push(v);
                    weights.push(p / n);
                }
                mean += p * acc / n;
            }
            let mut order: Vec<usize> = (0..values.len()).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            Ok(CurvePoint {
                time: t,
                mean,
                lower: weighted_quantile_sorted(&order, &values, &weights, 0.025),
                upper: weighted_quantile_sorted(&order, &values, &weights, 0.975),
            })
        })
        .collect()
}

/// One fitted model of an ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelResult {
    pub spec: ModelSpec,
    pub fit: PosteriorFit,
    pub bridge: BridgeResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub models: Vec<ModelResult>,
    pub prior_probs: Vec<f64>,
    pub posterior_probs: Vec<f64>,
    pub log_mls: Vec<f64>,
    /// Effect models against null models; absent unless the ensemble has both.
    pub inclusion_bf_effect: Option<InclusionBf>,
    pub per_family_inclusion_bf: BTreeMap<FamilyKind, InclusionBf>,
    /// Absent for single-model ensembles.
    pub per_model_inclusion_bf: Vec<Option<InclusionBf>>,
}

impl EnsembleResult {
    /// Posterior probability summed per family, in canonical family order.
    pub fn family_probs(&self) -> [f64; 5] {
        let mut out = [0.0; 5];
        for (m, p) in self.models.iter().zip(&self.posterior_probs) {
            out[m.spec.family.index()] += p;
        }
        out
    }

    /// Effect (non-null) models renormalized among themselves: mixture of the beta posteriors.
    pub fn beta_mixture(&self) -> Result<WeightedDraws> {
        let idx: Vec<usize> = (0..self.models.len()).filter(|&i| !self.models[i].spec.is_null()).collect();
        if idx.is_empty() {
            return Err(Error::Contract("ensemble contains no effect models".into()));
        }
        let total: f64 = idx.iter().map(|&i| self.posterior_probs[i]).sum();
        let fits: Vec<&PosteriorFit> = idx.iter().map(|&i| &self.models[i].fit).collect();
        let probs: Vec<f64> = if total > 0.0 {
            idx.iter().map(|&i| self.posterior_probs[i] / total).collect()
        } else {
            // conditional probabilities among effect models straight from the log-mls
            let lw: Vec<f64> = idx.iter().map(|&i| self.prior_probs[i].ln() + self.log_mls[i]).collect();
            let norm = log_sum_exp(&lw);
            lw.iter().map(|l| (l - norm).exp()).collect()
        };
        mixture_posterior_beta(&fits, &probs)
    }

    pub fn curve(&self, kind: CurveKind, times: &[f64], treated: bool) -> Result<Vec<CurvePoint>> {
        let fits: Vec<&PosteriorFit> = self.models.iter().map(|m| &m.fit).collect();
        model_averaged_curve(kind, times, &fits, &self.posterior_probs, treated)
    }
}

/// Checks prior weights and model validity before any fitting.
pub fn validate_ensemble(models: &[ModelSpec]) -> Result<()> {
    if models.is_empty() {
        return Err(Error::Config("ensemble has no models".into()));
    }
    for m in models {
        m.validate()?;
    }
    let total: f64 = models.iter().map(|m| m.prior_weight).sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::Config(format!("prior model weights must sum to 1, got {total}")));
    }
    Ok(())
}

/// Fits every model (sampler + bridge) with sub-seeds derived from `(seed, model index)`
/// and aggregates the ensemble.
pub fn fit_ensemble(
    models: &[ModelSpec],
    data: &SurvivalDataset,
    settings: &SamplerSettings,
    seed: u64,
) -> Result<EnsembleResult> {
    validate_ensemble(models)?;
    aggregate(fit_models(models, data, settings, seed)?)
}

/// Per-model posterior sampling and bridge sampling, without ensemble weights.
pub fn fit_models(
    models: &[ModelSpec],
    data: &SurvivalDataset,
    settings: &SamplerSettings,
    seed: u64,
) -> Result<Vec<ModelResult>> {
    settings.validate()?;
    for m in models {
        m.validate()?;
    }
    let results: Vec<Result<ModelResult>> = models
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let s = settings.with_seed(derive_seed(seed, &[i as u64, 0]));
            let mut fit = sample_posterior(spec, data, &s)?;
            let bridge = bridge_marglik(&fit, spec, data, derive_seed(seed, &[i as u64, 1]))?;
            fit.log_marglik = Some(bridge.log_marglik);
            Ok(ModelResult { spec: spec.clone(), fit, bridge })
        })
        .collect();
    results.into_iter().collect()
}

/// Builds the ensemble summaries from already fitted models.
pub fn aggregate(models: Vec<ModelResult>) -> Result<EnsembleResult> {
    let prior_probs: Vec<f64> = models.iter().map(|m| m.spec.prior_weight).collect();
    let log_mls: Vec<f64> = models.iter().map(|m| m.bridge.log_marglik).collect();
    let posterior_probs = posterior_model_probs(&prior_probs, &log_mls)?;

    let effect: Vec<usize> = (0..models.len()).filter(|&i| !models[i].spec.is_null()).collect();
    let inclusion_bf_effect = if !effect.is_empty() && effect.len() < models.len() {
        Some(inclusion_bf(&prior_probs, &posterior_probs, &effect)?)
    } else {
        None
    };
    let mut per_family_inclusion_bf = BTreeMap::new();
    for family in FamilyKind::ALL {
        let subset: Vec<usize> = (0..models.len()).filter(|&i| models[i].spec.family == family).collect();
        if !subset.is_empty() && subset.len() < models.len() {
            per_family_inclusion_bf.insert(family, inclusion_bf(&prior_probs, &posterior_probs, &subset)?);
        }
    }
    let per_model_inclusion_bf = (0..models.len())
        .map(|i| {
            if models.len() > 1 {
                inclusion_bf(&prior_probs, &posterior_probs, &[i]).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleResult {
        models,
        prior_probs,
        posterior_probs,
        log_mls,
        inclusion_bf_effect,
        per_family_inclusion_bf,
        per_model_inclusion_bf,
    })
}
