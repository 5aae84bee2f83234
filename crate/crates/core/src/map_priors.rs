//! Meta-analytic predictive priors from historical participant-level data.
//!
//! Each historical study is reduced to maximum-likelihood estimates of the intercept and
//! of the log auxiliary parameter. A normal random-effects model pools them, and the
//! predictive prior for a new study has variance `se(mu)^2 + tau^2`.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{FamilyKind, SurvivalDataset};
use crate::mle::fit_mle;
use crate::priors::PriorSpec;
use crate::sampler::{sample_target, PosteriorFit, SamplerSettings};
use crate::target::RandomEffectsTarget;

pub const MU_PRIOR: PriorSpec = PriorSpec::Cauchy { location: 0.0, scale: 100.0 };
pub const TAU_PRIOR: PriorSpec = PriorSpec::HalfCauchy { scale: 10.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyEstimate {
    pub estimate: f64,
    pub standard_error: f64,
}

impl StudyEstimate {
    pub fn new(estimate: f64, standard_error: f64) -> Result<Self> {
        if !(standard_error > 0.0 && standard_error.is_finite() && estimate.is_finite()) {
            return Err(Error::Domain(format!("study standard error must be positive, got {standard_error}")));
        }
        Ok(Self { estimate, standard_error })
    }
}

/// Intercept estimate and, for two-parameter families, the log-auxiliary estimate of one study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyPair {
    pub alpha: StudyEstimate,
    pub log_gamma: Option<StudyEstimate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyEstimates {
    pub family: FamilyKind,
    pub studies: Vec<StudyPair>,
    /// Zero-based indices of studies whose fit failed.
    pub excluded: Vec<usize>,
}

/// Per-study MLE fits without the treatment coefficient.
pub fn study_estimates(family: FamilyKind, historical: &[SurvivalDataset]) -> Result<StudyEstimates> {
    let fits: Vec<Result<StudyPair>> = historical
        .par_iter()
        .map(|d| {
            let fit = fit_mle(family, d, false)?;
            let se = fit
                .standard_errors
                .filter(|_| fit.converged)
                .ok_or_else(|| Error::Numerical("study fit did not converge".into()))?;
            Ok(StudyPair {
                alpha: StudyEstimate::new(fit.estimates.alpha, se.alpha)?,
                log_gamma: match (fit.estimates.gamma, se.log_gamma) {
                    (Some(g), Some(s)) => Some(StudyEstimate::new(g.ln(), s)?),
                    _ => None,
                },
            })
        })
        .collect();
    let mut studies = Vec::new();
    let mut excluded = Vec::new();
    for (i, r) in fits.into_iter().enumerate() {
        match r {
            Ok(p) => studies.push(p),
            Err(e) => {
                warn!("historical study {} excluded: {e}", i + 1);
                excluded.push(i);
            }
        }
    }
    Ok(StudyEstimates { family, studies, excluded })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Predictive prior is normal on the parameter itself.
    Intercept,
    /// Pooling happens on the log scale; predictive prior is log-normal.
    LogAuxiliary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heterogeneity {
    #[default]
    Estimate,
    /// tau fixed to zero: common-effect pooling.
    FixedZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaAnalyticPrior {
    pub pooled_mean: f64,
    pub pooled_se: f64,
    pub tau: f64,
    /// Monte Carlo standard error of `pooled_mean`.
    pub pooled_mean_mcse: f64,
    pub predictive: PriorSpec,
}

impl MetaAnalyticPrior {
    pub fn predictive_sd(&self) -> f64 {
        match self.predictive {
            PriorSpec::Normal { sigma, .. } => sigma,
            PriorSpec::LogNormal { sigma_log, .. } => sigma_log,
            _ => unreachable!("predictive priors are normal or log-normal"),
        }
    }
}

/// Random-effects pooling; plug-ins are the posterior means of mu and tau and the posterior sd of mu.
pub fn meta_analyze(
    estimates: &[StudyEstimate],
    settings: &SamplerSettings,
    scale: Scale,
    heterogeneity: Heterogeneity,
) -> Result<MetaAnalyticPrior> {
    Ok(meta_analyze_fit(estimates, settings, scale, heterogeneity)?.0)
}

/// As [`meta_analyze`], also returning the posterior fit of `(mu, tau)`.
pub fn meta_analyze_fit(
    estimates: &[StudyEstimate],
    settings: &SamplerSettings,
    scale: Scale,
    heterogeneity: Heterogeneity,
) -> Result<(MetaAnalyticPrior, PosteriorFit)> {
    let pairs: Vec<(f64, f64)> = estimates.iter().map(|e| (e.estimate, e.standard_error)).collect();
    let tau_prior = match heterogeneity {
        Heterogeneity::Estimate => TAU_PRIOR,
        Heterogeneity::FixedZero => PriorSpec::Spike { value: 0.0 },
    };
    let target = RandomEffectsTarget::new(&pairs, MU_PRIOR, tau_prior)?;
    let fit = sample_target(&target, settings)?;
    let pooled_mean = fit.mean(0);
    let pooled_se = fit.sd(0);
    let tau = match heterogeneity {
        Heterogeneity::Estimate => fit.mean(1),
        Heterogeneity::FixedZero => 0.0,
    };
    let sd = (pooled_se * pooled_se + tau * tau).sqrt();
    let predictive = match scale {
        Scale::Intercept => PriorSpec::Normal { mu: pooled_mean, sigma: sd },
        Scale::LogAuxiliary => PriorSpec::LogNormal { mu_log: pooled_mean, sigma_log: sd },
    };
    let prior = MetaAnalyticPrior { pooled_mean, pooled_se, tau, pooled_mean_mcse: fit.mcse_mean(0), predictive };
    Ok((prior, fit))
}

/// Predictive priors for one family, ready to drop into an ensemble configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyMapPrior {
    pub family: FamilyKind,
    pub prior_alpha: MetaAnalyticPrior,
    pub prior_gamma: Option<MetaAnalyticPrior>,
    pub studies: Vec<StudyPair>,
    pub excluded_studies: Vec<usize>,
}

pub fn map_prior(
    family: FamilyKind,
    historical: &[SurvivalDataset],
    settings: &SamplerSettings,
    heterogeneity: Heterogeneity,
) -> Result<FamilyMapPrior> {
    let est = study_estimates(family, historical)?;
    if est.studies.is_empty() {
        return Err(Error::Numerical(format!("no usable historical study for the {family} family")));
    }
    let alphas: Vec<StudyEstimate> = est.studies.iter().map(|s| s.alpha).collect();
    let prior_alpha = meta_analyze(&alphas, settings, Scale::Intercept, heterogeneity)?;
    let prior_gamma = if family.has_auxiliary() {
        let lg: Vec<StudyEstimate> = est.studies.iter().filter_map(|s| s.log_gamma).collect();
        Some(meta_analyze(&lg, settings, Scale::LogAuxiliary, heterogeneity)?)
    } else {
        None
    };
    Ok(FamilyMapPrior { family, prior_alpha, prior_gamma, studies: est.studies, excluded_studies: est.excluded })
}
