//! Unnormalized posterior targets shared by the sampler and the bridge estimator.
//!
//! A target exposes its free (non-spike) parameters with their priors and a
//! log-likelihood at constrained values. Sampling happens on the real line through
//! each parameter's [`Transform`]; the log-Jacobian is added here.

use crate::error::{Error, Result};
use crate::families::{CompressedData, FamilyKind, ParamVector, SurvivalDataset};
use crate::priors::{ModelSpec, PriorSpec, Transform};

#[derive(Debug, Clone, PartialEq)]
pub struct FreeParameter {
    pub name: String,
    pub prior: PriorSpec,
    pub transform: Transform,
}

impl FreeParameter {
    pub fn new(name: impl Into<String>, prior: PriorSpec) -> Self {
        let (lo, hi) = prior.support();
        Self { name: name.into(), prior, transform: Transform::for_support(lo, hi) }
    }
}

pub trait Target: Sync {
    fn parameters(&self) -> &[FreeParameter];

    /// Log-likelihood at constrained values of the free parameters.
    fn log_likelihood(&self, theta: &[f64]) -> f64;

    fn dimension(&self) -> usize {
        self.parameters().len()
    }

    /// Log prior density of the free parameters at constrained values.
    fn log_prior(&self, theta: &[f64]) -> f64 {
        self.parameters()
            .iter()
            .zip(theta)
            .map(|(p, &x)| p.prior.log_density(x).unwrap_or(f64::NEG_INFINITY))
            .sum()
    }

    /// Maps unconstrained coordinates to constrained ones, returning the summed log-Jacobian.
    fn constrain(&self, u: &[f64], theta: &mut [f64]) -> f64 {
        let mut jac = 0.0;
        for ((p, &ui), t) in self.parameters().iter().zip(u).zip(theta.iter_mut()) {
            let (x, lj) = p.transform.forward(ui);
            *t = x;
            jac += lj;
        }
        jac
    }

    fn unconstrain(&self, theta: &[f64], u: &mut [f64]) {
        for ((p, &x), ui) in self.parameters().iter().zip(theta).zip(u.iter_mut()) {
            *ui = p.transform.inverse(x);
        }
    }

    /// Unnormalized log posterior density in unconstrained space:
    /// log-likelihood + log prior + log-Jacobian. Non-finite results map to negative infinity.
    fn log_density_unconstrained(&self, u: &[f64], scratch: &mut [f64]) -> f64 {
        let jac = self.constrain(u, scratch);
        let mut lp = jac;
        for (p, &x) in self.parameters().iter().zip(scratch.iter()) {
            let (lo, hi) = p.prior.support();
            if !(x >= lo && x <= hi) {
                return f64::NEG_INFINITY;
            }
            lp += p.prior.log_density_unchecked(x);
        }
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        let ll = self.log_likelihood(scratch);
        let v = lp + ll;
        if v.is_nan() || v == f64::INFINITY {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Fixed(f64),
    Free(usize),
}

impl Slot {
    #[inline]
    fn get(&self, theta: &[f64]) -> f64 {
        match *self {
            Slot::Fixed(v) => v,
            Slot::Free(i) => theta[i],
        }
    }
}

/// Posterior of one survival model: priors from a [`ModelSpec`], likelihood from data.
#[derive(Debug, Clone)]
pub struct SurvivalTarget {
    family: FamilyKind,
    params: Vec<FreeParameter>,
    beta: Slot,
    alpha: Slot,
    gamma: Option<Slot>,
    data: CompressedData,
}

impl SurvivalTarget {
    pub fn new(model: &ModelSpec, data: &SurvivalDataset) -> Result<Self> {
        model.validate()?;
        let mut params = Vec::new();
        let slot = |name: &str, prior: &PriorSpec, params: &mut Vec<FreeParameter>| match prior {
            PriorSpec::Spike { value } => Slot::Fixed(*value),
            _ => {
                params.push(FreeParameter::new(name, *prior));
                Slot::Free(params.len() - 1)
            }
        };
        let beta = slot("beta", &model.prior_beta, &mut params);
        let alpha = slot("alpha", &model.prior_alpha, &mut params);
        let gamma = model.prior_gamma.as_ref().map(|g| slot("gamma", g, &mut params));
        Ok(Self { family: model.family, params, beta, alpha, gamma, data: CompressedData::new(data) })
    }

    pub fn family(&self) -> FamilyKind {
        self.family
    }

    /// Full parameter vector (spiked values filled in) for the given free values.
    pub fn param_vector(&self, theta: &[f64]) -> ParamVector {
        ParamVector {
            beta: self.beta.get(theta),
            alpha: self.alpha.get(theta),
            gamma: self.gamma.map(|g| g.get(theta)),
        }
    }
}

impl Target for SurvivalTarget {
    fn parameters(&self) -> &[FreeParameter] {
        &self.params
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let gamma = self.gamma.map_or(f64::NAN, |g| g.get(theta));
        if self.gamma.is_some() && !(gamma > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.data.log_likelihood(self.family, self.beta.get(theta), self.alpha.get(theta), gamma)
    }
}

/// Normal random-effects model for study-level estimates:
/// `estimate_k ~ Normal(mu, se_k^2 + tau^2)`.
#[derive(Debug, Clone)]
pub struct RandomEffectsTarget {
    estimates: Vec<f64>,
    variances: Vec<f64>,
    params: Vec<FreeParameter>,
    mu: Slot,
    tau: Slot,
}

impl RandomEffectsTarget {
    pub fn new(estimates: &[(f64, f64)], prior_mu: PriorSpec, prior_tau: PriorSpec) -> Result<Self> {
        if estimates.is_empty() {
            return Err(Error::Contract("random-effects model needs at least one study".into()));
        }
        if let Some(&(_, se)) = estimates.iter().find(|(e, se)| !(e.is_finite() && *se > 0.0 && se.is_finite())) {
            return Err(Error::Domain(format!("study standard errors must be positive, got {se}")));
        }
        prior_mu.validate()?;
        prior_tau.validate()?;
        if prior_tau.support().0 < 0.0 {
            return Err(Error::Specification("heterogeneity prior must be supported on [0, inf)".into()));
        }
        let mut params = Vec::new();
        let mut slot = |name: &str, prior: PriorSpec| match prior {
            PriorSpec::Spike { value } => Slot::Fixed(value),
            _ => {
                params.push(FreeParameter::new(name, prior));
                Slot::Free(params.len() - 1)
            }
        };
        let mu = slot("mu", prior_mu);
        let tau = slot("tau", prior_tau);
        Ok(Self {
            estimates: estimates.iter().map(|e| e.0).collect(),
            variances: estimates.iter().map(|e| e.1 * e.1).collect(),
            params,
            mu,
            tau,
        })
    }
}

impl Target for RandomEffectsTarget {
    fn parameters(&self) -> &[FreeParameter] {
        &self.params
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let mu = self.mu.get(theta);
        let tau = self.tau.get(theta);
        let tau2 = tau * tau;
        self.estimates
            .iter()
            .zip(&self.variances)
            .map(|(&y, &v)| {
                let s2 = v + tau2;
                -0.5 * ((y - mu) * (y - mu) / s2 + s2.ln()) - crate::special::LN_SQRT_2PI
            })
            .sum()
    }
}
