//! Prior distributions for the treatment effect, intercepts and auxiliary parameters,
//! and the per-model specification that ties a family to its priors.

use std::f64::consts::PI;
use std::fmt;

use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::FamilyKind;
use crate::special::{ln_normal_cdf, ln_normal_pdf, ln_normal_sf, normal_cdf, normal_quantile};

/// A univariate prior.
///
/// In JSON a prior is a tagged record, e.g. `{"kind":"normal","mu":0.3,"sigma":0.15,"lower":0}`;
/// a `normal` with `lower` and/or `upper` is truncated. Log-normal priors take `mu`/`sigma` on
/// the log scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrior", into = "RawPrior")]
pub enum PriorSpec {
    Normal { mu: f64, sigma: f64 },
    TruncatedNormal { mu: f64, sigma: f64, lower: f64, upper: f64 },
    LogNormal { mu_log: f64, sigma_log: f64 },
    Cauchy { location: f64, scale: f64 },
    HalfCauchy { scale: f64 },
    /// Point mass. The parameter is fixed at `value` and never sampled.
    Spike { value: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrior {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    location: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
}

impl TryFrom<RawPrior> for PriorSpec {
    type Error = Error;

    fn try_from(raw: RawPrior) -> Result<Self> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Config(format!("prior of kind '{}' needs '{name}'", raw.kind)))
        };
        let forbid = |present: &[(&str, bool)]| -> Result<()> {
            match present.iter().find(|(_, p)| *p) {
                Some((name, _)) => {
                    Err(Error::Config(format!("prior of kind '{}' does not take '{name}'", raw.kind)))
                }
                None => Ok(()),
            }
        };
        let spec = match raw.kind.as_str() {
            "normal" => {
                forbid(&[("location", raw.location.is_some()), ("scale", raw.scale.is_some()), ("value", raw.value.is_some())])?;
                let mu = need(raw.mu, "mu")?;
                let sigma = need(raw.sigma, "sigma")?;
                if raw.lower.is_none() && raw.upper.is_none() {
                    PriorSpec::Normal { mu, sigma }
                } else {
                    PriorSpec::TruncatedNormal {
                        mu,
                        sigma,
                        lower: raw.lower.unwrap_or(f64::NEG_INFINITY),
                        upper: raw.upper.unwrap_or(f64::INFINITY),
                    }
                }
            }
            "lognormal" => {
                forbid(&[("lower", raw.lower.is_some()), ("upper", raw.upper.is_some()), ("location", raw.location.is_some()), ("scale", raw.scale.is_some()), ("value", raw.value.is_some())])?;
                PriorSpec::LogNormal { mu_log: need(raw.mu, "mu")?, sigma_log: need(raw.sigma, "sigma")? }
            }
            "cauchy" => {
                forbid(&[("mu", raw.mu.is_some()), ("sigma", raw.sigma.is_some()), ("lower", raw.lower.is_some()), ("upper", raw.upper.is_some()), ("value", raw.value.is_some())])?;
                PriorSpec::Cauchy { location: need(raw.location, "location")?, scale: need(raw.scale, "scale")? }
            }
            "halfcauchy" => {
                forbid(&[("mu", raw.mu.is_some()), ("sigma", raw.sigma.is_some()), ("lower", raw.lower.is_some()), ("upper", raw.upper.is_some()), ("location", raw.location.is_some()), ("value", raw.value.is_some())])?;
                PriorSpec::HalfCauchy { scale: need(raw.scale, "scale")? }
            }
            "spike" => {
                forbid(&[("mu", raw.mu.is_some()), ("sigma", raw.sigma.is_some()), ("lower", raw.lower.is_some()), ("upper", raw.upper.is_some()), ("location", raw.location.is_some()), ("scale", raw.scale.is_some())])?;
                PriorSpec::Spike { value: need(raw.value, "value")? }
            }
            other => return Err(Error::Config(format!("unknown prior kind '{other}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<PriorSpec> for RawPrior {
    fn from(p: PriorSpec) -> Self {
        let mut raw = RawPrior {
            kind: String::new(),
            mu: None,
            sigma: None,
            lower: None,
            upper: None,
            location: None,
            scale: None,
            value: None,
        };
        match p {
            PriorSpec::Normal { mu, sigma } => {
                raw.kind = "normal".into();
                raw.mu = Some(mu);
                raw.sigma = Some(sigma);
            }
            PriorSpec::TruncatedNormal { mu, sigma, lower, upper } => {
                raw.kind = "normal".into();
                raw.mu = Some(mu);
                raw.sigma = Some(sigma);
                raw.lower = lower.is_finite().then_some(lower);
                raw.upper = upper.is_finite().then_some(upper);
            }
            PriorSpec::LogNormal { mu_log, sigma_log } => {
                raw.kind = "lognormal".into();
                raw.mu = Some(mu_log);
                raw.sigma = Some(sigma_log);
            }
            PriorSpec::Cauchy { location, scale } => {
                raw.kind = "cauchy".into();
                raw.location = Some(location);
                raw.scale = Some(scale);
            }
            PriorSpec::HalfCauchy { scale } => {
                raw.kind = "halfcauchy".into();
                raw.scale = Some(scale);
            }
            PriorSpec::Spike { value } => {
                raw.kind = "spike".into();
                raw.value = Some(value);
            }
        }
        raw
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PriorSpec::Normal { mu, sigma } => write!(f, "Normal({mu}, {sigma})"),
            PriorSpec::TruncatedNormal { mu, sigma, lower, upper } => {
                write!(f, "Normal({mu}, {sigma})[{lower}, {upper}]")
            }
            PriorSpec::LogNormal { mu_log, sigma_log } => write!(f, "LogNormal({mu_log}, {sigma_log})"),
            PriorSpec::Cauchy { location, scale } => write!(f, "Cauchy({location}, {scale})"),
            PriorSpec::HalfCauchy { scale } => write!(f, "HalfCauchy({scale})"),
            PriorSpec::Spike { value } => write!(f, "Spike({value})"),
        }
    }
}

fn positive(v: f64, name: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Specification(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite(v: f64, name: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Specification(format!("{name} must be finite, got {v}")))
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PriorSpec::Normal { mu, sigma } => {
                finite(mu, "mu")?;
                positive(sigma, "sigma")
            }
            PriorSpec::TruncatedNormal { mu, sigma, lower, upper } => {
                finite(mu, "mu")?;
                positive(sigma, "sigma")?;
                if lower.is_nan() || upper.is_nan() || lower >= upper {
                    return Err(Error::Specification(format!(
                        "truncation bounds must satisfy lower < upper, got [{lower}, {upper}]"
                    )));
                }
                Ok(())
            }
            PriorSpec::LogNormal { mu_log, sigma_log } => {
                finite(mu_log, "mu_log")?;
                positive(sigma_log, "sigma_log")
            }
            PriorSpec::Cauchy { location, scale } => {
                finite(location, "location")?;
                positive(scale, "scale")
            }
            PriorSpec::HalfCauchy { scale } => positive(scale, "scale"),
            PriorSpec::Spike { value } => finite(value, "value"),
        }
    }

    pub fn is_spike(&self) -> bool {
        matches!(self, PriorSpec::Spike { .. })
    }

    pub fn spike_value(&self) -> Option<f64> {
        match *self {
            PriorSpec::Spike { value } => Some(value),
            _ => None,
        }
    }

    /// Closed support `(lower, upper)`; infinite ends are unbounded.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            PriorSpec::Normal { .. } | PriorSpec::Cauchy { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            PriorSpec::TruncatedNormal { lower, upper, .. } => (lower, upper),
            PriorSpec::LogNormal { .. } | PriorSpec::HalfCauchy { .. } => (0.0, f64::INFINITY),
            PriorSpec::Spike { value } => (value, value),
        }
    }

    /// ln of the truncation mass Phi(b') - Phi(a') of a truncated normal.
    fn ln_truncation_mass(mu: f64, sigma: f64, lower: f64, upper: f64) -> f64 {
        let a = (lower - mu) / sigma;
        let b = (upper - mu) / sigma;
        if a > 0.0 {
            // both bounds in the upper tail: Q(a) - Q(b)
            let qa = ln_normal_sf(a);
            let qb = ln_normal_sf(b);
            qa + (-(qb - qa).exp()).ln_1p()
        } else if b < 0.0 {
            let pb = ln_normal_cdf(b);
            let pa = ln_normal_cdf(a);
            pb + (-(pa - pb).exp()).ln_1p()
        } else {
            (1.0 - normal_cdf(a) - normal_cdf(-b)).ln()
        }
    }

    /// Normalized log density. Values outside the support give negative infinity;
    /// evaluating a spike is a contract violation.
    pub fn log_density(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.support();
        if let PriorSpec::Spike { .. } = self {
            return Err(Error::Contract("spike priors have no density; the parameter is fixed".into()));
        }
        if x.is_nan() || x < lo || x > hi {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.log_density_unchecked(x))
    }

    /// Log density for an in-support `x` of a non-spike prior.
    #[inline]
    pub(crate) fn log_density_unchecked(&self, x: f64) -> f64 {
        match *self {
            PriorSpec::Normal { mu, sigma } => ln_normal_pdf((x - mu) / sigma) - sigma.ln(),
            PriorSpec::TruncatedNormal { mu, sigma, lower, upper } => {
                ln_normal_pdf((x - mu) / sigma)
                    - sigma.ln()
                    - Self::ln_truncation_mass(mu, sigma, lower, upper)
            }
            PriorSpec::LogNormal { mu_log, sigma_log } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let lx = x.ln();
                ln_normal_pdf((lx - mu_log) / sigma_log) - sigma_log.ln() - lx
            }
            PriorSpec::Cauchy { location, scale } => {
                let z = (x - location) / scale;
                -(PI * scale).ln() - z.mul_add(z, 1.0).ln()
            }
            PriorSpec::HalfCauchy { scale } => {
                let z = x / scale;
                (2.0 / (PI * scale)).ln() - z.mul_add(z, 1.0).ln()
            }
            PriorSpec::Spike { .. } => f64::NAN,
        }
    }

    /// Cumulative distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        match *self {
            PriorSpec::Normal { mu, sigma } => normal_cdf((x - mu) / sigma),
            PriorSpec::TruncatedNormal { mu, sigma, lower, upper } => {
                let num = Self::ln_truncation_mass(mu, sigma, lower, x);
                let den = Self::ln_truncation_mass(mu, sigma, lower, upper);
                (num - den).exp()
            }
            PriorSpec::LogNormal { mu_log, sigma_log } => normal_cdf((x.ln() - mu_log) / sigma_log),
            PriorSpec::Cauchy { location, scale } => 0.5 + ((x - location) / scale).atan() / PI,
            PriorSpec::HalfCauchy { scale } => 2.0 * (x / scale).atan() / PI,
            PriorSpec::Spike { .. } => 1.0,
        }
    }

    /// One draw. Deterministic given the stream state; spikes return their value
    /// without consuming randomness.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            PriorSpec::Spike { value } => value,
            PriorSpec::Normal { mu, sigma } => {
                let u: f64 = rng.sample(Open01);
                mu + sigma * normal_quantile(u)
            }
            PriorSpec::TruncatedNormal { mu, sigma, lower, upper } => {
                let u: f64 = rng.sample(Open01);
                let a = (lower - mu) / sigma;
                let b = (upper - mu) / sigma;
                let z = if a >= 0.0 {
                    // invert in the upper tail for accuracy
                    let qa = 1.0 - normal_cdf(a);
                    let qb = 1.0 - normal_cdf(b);
                    let q = qa - u * (qa - qb);
                    -normal_quantile(q.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
                } else {
                    let pa = normal_cdf(a);
                    let pb = normal_cdf(b);
                    let p = pa + u * (pb - pa);
                    normal_quantile(p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
                };
                (mu + sigma * z).clamp(lower, upper)
            }
            PriorSpec::LogNormal { mu_log, sigma_log } => {
                let u: f64 = rng.sample(Open01);
                (mu_log + sigma_log * normal_quantile(u)).exp()
            }
            PriorSpec::Cauchy { location, scale } => {
                let u: f64 = rng.sample(Open01);
                location + scale * (PI * (u - 0.5)).tan()
            }
            PriorSpec::HalfCauchy { scale } => {
                let u: f64 = rng.sample(Open01);
                scale * (0.5 * PI * u).tan()
            }
        }
    }

    /// Mean, when it exists.
    pub fn mean(&self) -> Option<f64> {
        match *self {
            PriorSpec::Normal { mu, .. } => Some(mu),
            PriorSpec::TruncatedNormal { mu, sigma, lower, upper } => {
                let (m, _) = truncated_normal_moments(mu, sigma, lower, upper);
                Some(m)
            }
            PriorSpec::LogNormal { mu_log, sigma_log } => Some((mu_log + 0.5 * sigma_log * sigma_log).exp()),
            PriorSpec::Cauchy { .. } | PriorSpec::HalfCauchy { .. } => None,
            PriorSpec::Spike { value } => Some(value),
        }
    }

    /// Standard deviation, when it exists.
    pub fn sd(&self) -> Option<f64> {
        match *self {
            PriorSpec::Normal { sigma, .. } => Some(sigma),
            PriorSpec::TruncatedNormal { mu, sigma, lower, upper } => {
                let (_, v) = truncated_normal_moments(mu, sigma, lower, upper);
                Some(v.sqrt())
            }
            PriorSpec::LogNormal { mu_log, sigma_log } => {
                let s2 = sigma_log * sigma_log;
                Some(((s2.exp() - 1.0) * (2.0 * mu_log + s2).exp()).sqrt())
            }
            PriorSpec::Cauchy { .. } | PriorSpec::HalfCauchy { .. } => None,
            PriorSpec::Spike { .. } => Some(0.0),
        }
    }

    /// A central interval `[lo, hi]` holding the bulk of the mass, used to keep
    /// sampler initial values away from the numerically hazardous tails.
    pub fn init_bounds(&self) -> (f64, f64) {
        let (slo, shi) = self.support();
        let (lo, hi) = match *self {
            PriorSpec::Cauchy { location, scale } => (location - 5.0 * scale, location + 5.0 * scale),
            PriorSpec::HalfCauchy { scale } => (0.0, 5.0 * scale),
            PriorSpec::LogNormal { mu_log, sigma_log } => {
                ((mu_log - 5.0 * sigma_log).exp(), (mu_log + 5.0 * sigma_log).exp())
            }
            _ => {
                let m = self.mean().unwrap_or(0.0);
                let s = self.sd().unwrap_or(1.0);
                (m - 5.0 * s, m + 5.0 * s)
            }
        };
        (lo.max(slo), hi.min(shi))
    }
}

/// Mean and variance of Normal(mu, sigma) truncated to [lower, upper].
fn truncated_normal_moments(mu: f64, sigma: f64, lower: f64, upper: f64) -> (f64, f64) {
    let a = (lower - mu) / sigma;
    let b = (upper - mu) / sigma;
    let z = PriorSpec::ln_truncation_mass(mu, sigma, lower, upper).exp();
    let pdf = |x: f64| if x.is_finite() { ln_normal_pdf(x).exp() } else { 0.0 };
    let xpdf = |x: f64| if x.is_finite() { x * ln_normal_pdf(x).exp() } else { 0.0 };
    let r = (pdf(a) - pdf(b)) / z;
    let mean = mu + sigma * r;
    let var = sigma * sigma * (1.0 + (xpdf(a) - xpdf(b)) / z - r * r);
    (mean, var)
}

/// Map between a prior's support and the real line used by the sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Identity,
    /// `x = lower + exp(u)`
    Lower(f64),
    /// `x = upper - exp(u)`
    Upper(f64),
    /// `x = lower + (upper - lower) * logistic(u)`
    Interval(f64, f64),
}

impl Transform {
    pub fn for_support(lower: f64, upper: f64) -> Self {
        match (lower.is_finite(), upper.is_finite()) {
            (false, false) => Transform::Identity,
            (true, false) => Transform::Lower(lower),
            (false, true) => Transform::Upper(upper),
            (true, true) => Transform::Interval(lower, upper),
        }
    }

    /// Constrained value and ln |dx/du|.
    #[inline]
    pub fn forward(&self, u: f64) -> (f64, f64) {
        match *self {
            Transform::Identity => (u, 0.0),
            Transform::Lower(lo) => (lo + u.exp(), u),
            Transform::Upper(hi) => (hi - u.exp(), u),
            Transform::Interval(lo, hi) => {
                let w = hi - lo;
                // ln logistic(u) and ln(1 - logistic(u))
                let ln_s = -crate::special::softplus(-u);
                let ln_1ms = -crate::special::softplus(u);
                (lo + w * ln_s.exp(), w.ln() + ln_s + ln_1ms)
            }
        }
    }

    pub fn inverse(&self, x: f64) -> f64 {
        match *self {
            Transform::Identity => x,
            Transform::Lower(lo) => (x - lo).ln(),
            Transform::Upper(hi) => (hi - x).ln(),
            Transform::Interval(lo, hi) => {
                let s = (x - lo) / (hi - lo);
                s.ln() - (-s).ln_1p()
            }
        }
    }
}

/// One model of an ensemble: a family with priors on beta, alpha and (optionally) gamma,
/// plus its prior model probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: FamilyKind,
    pub prior_beta: PriorSpec,
    pub prior_alpha: PriorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_gamma: Option<PriorSpec>,
    pub prior_weight: f64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        self.prior_beta.validate()?;
        self.prior_alpha.validate()?;
        match (self.family.has_auxiliary(), &self.prior_gamma) {
            (true, None) => {
                return Err(Error::Specification(format!(
                    "{} model needs a prior on the auxiliary parameter",
                    self.family
                )))
            }
            (false, Some(_)) => {
                return Err(Error::Specification(
                    "exponential model takes no auxiliary prior".into(),
                ))
            }
            (true, Some(g)) => {
                g.validate()?;
                let (lo, _) = g.support();
                let ok = match g {
                    PriorSpec::Spike { value } => *value > 0.0,
                    _ => lo >= 0.0,
                };
                if !ok {
                    return Err(Error::Specification(format!(
                        "auxiliary prior {g} must be supported on (0, inf)"
                    )));
                }
            }
            (false, None) => {}
        }
        if !(self.prior_weight > 0.0 && self.prior_weight <= 1.0) {
            return Err(Error::Specification(format!(
                "prior model weight must lie in (0, 1], got {}",
                self.prior_weight
            )));
        }
        Ok(())
    }

    /// A model whose treatment effect is a point mass at zero.
    pub fn is_null(&self) -> bool {
        self.prior_beta.spike_value() == Some(0.0)
    }

    pub fn label(&self) -> String {
        format!("{} (beta ~ {})", self.family, self.prior_beta)
    }
}

/// Intercept and auxiliary priors per family used by the shipped example ensembles.
pub fn example_support_priors(family: FamilyKind) -> (PriorSpec, Option<PriorSpec>) {
    let n = |mu, sigma| PriorSpec::Normal { mu, sigma };
    let ln = |mu_log, sigma_log| Some(PriorSpec::LogNormal { mu_log, sigma_log });
    match family {
        FamilyKind::Exponential => (n(8.70, 2.04), None),
        FamilyKind::Weibull => (n(8.80, 2.20), ln(-0.07, 0.22)),
        FamilyKind::LogNormal => (n(8.70, 1.95), ln(0.62, 0.25)),
        FamilyKind::LogLogistic => (n(8.54, 2.37), ln(0.02, 0.27)),
        FamilyKind::Gamma => (n(8.88, 2.05), ln(-0.10, 0.39)),
    }
}

/// Five effect models with `beta ~ Normal(0, 1)` and equal weights.
pub fn estimation_ensemble() -> Vec<ModelSpec> {
    FamilyKind::ALL
        .iter()
        .map(|&family| {
            let (prior_alpha, prior_gamma) = example_support_priors(family);
            ModelSpec {
                family,
                prior_beta: PriorSpec::Normal { mu: 0.0, sigma: 1.0 },
                prior_alpha,
                prior_gamma,
                prior_weight: 1.0 / 5.0,
            }
        })
        .collect()
}

/// Ten models: per family one with `beta = 0` and one with `beta ~ Normal(0.3, 0.15)` on
/// `[0, inf)`, equal weights. Null models come first.
pub fn testing_ensemble() -> Vec<ModelSpec> {
    let effect = PriorSpec::TruncatedNormal { mu: 0.3, sigma: 0.15, lower: 0.0, upper: f64::INFINITY };
    let null = PriorSpec::Spike { value: 0.0 };
    [null, effect]
        .iter()
        .flat_map(|&prior_beta| {
            FamilyKind::ALL.iter().map(move |&family| {
                let (prior_alpha, prior_gamma) = example_support_priors(family);
                ModelSpec { family, prior_beta, prior_alpha, prior_gamma, prior_weight: 1.0 / 10.0 }
            })
        })
        .collect()
}
