//! Componentwise adaptive random-walk Metropolis on the unconstrained scale.
//!
//! Each free parameter gets its own Gaussian proposal. During burn-in the log step
//! size follows a Robbins–Monro recursion towards the target acceptance rate; the
//! step sizes are frozen for the kept iterations. Chains use independent streams
//! derived from `(seed, chain)` and may run in parallel.

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{ParamVector, SurvivalDataset};
use crate::priors::ModelSpec;
use crate::seeding::stream;
use crate::target::{SurvivalTarget, Target};

/// R-hat above this attaches a convergence warning to the fit.
pub const RHAT_WARNING: f64 = 1.05;

const MAX_INIT_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSettings {
    pub chains: usize,
    pub burnin_iterations: usize,
    pub sampling_iterations: usize,
    pub adapt_target_acceptance: f64,
    pub seed: u64,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self { chains: 2, burnin_iterations: 1000, sampling_iterations: 5000, adapt_target_acceptance: 0.44, seed: 1 }
    }
}

impl SamplerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.chains < 2 {
            return Err(Error::Config(format!("at least 2 chains are required, got {}", self.chains)));
        }
        if self.burnin_iterations == 0 || self.sampling_iterations == 0 {
            return Err(Error::Config("burn-in and sampling iterations must be positive".into()));
        }
        if !(self.adapt_target_acceptance > 0.0 && self.adapt_target_acceptance < 1.0) {
            return Err(Error::Config(format!(
                "target acceptance must lie in (0, 1), got {}",
                self.adapt_target_acceptance
            )));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn total_kept(&self) -> usize {
        self.chains * self.sampling_iterations
    }
}

/// Posterior draws of one model with diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorFit {
    pub free_parameter_names: Vec<String>,
    /// Kept draws on the constrained scale, chain after chain; one row per iteration.
    pub draws: Vec<Vec<f64>>,
    pub chains: usize,
    pub draws_per_chain: usize,
    pub rhat: Vec<f64>,
    pub ess: Vec<f64>,
    pub acceptance_rates: Vec<f64>,
    /// Unnormalized log posterior (unconstrained scale, including the log-Jacobian) per kept draw.
    pub log_posterior_values: Vec<f64>,
    /// Bridge-sampling estimate, filled in by the marginal-likelihood step.
    pub log_marglik: Option<f64>,
    pub warnings: Vec<String>,
    /// The survival model that produced the fit, if any.
    pub model: Option<ModelSpec>,
}

impl PosteriorFit {
    pub fn dimension(&self) -> usize {
        self.free_parameter_names.len()
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.free_parameter_names.iter().position(|n| n == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[j]).collect()
    }

    pub fn mean(&self, j: usize) -> f64 {
        self.draws.iter().map(|d| d[j]).sum::<f64>() / self.draws.len() as f64
    }

    pub fn sd(&self, j: usize) -> f64 {
        let m = self.mean(j);
        let n = self.draws.len() as f64;
        (self.draws.iter().map(|d| (d[j] - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    }

    /// Monte-Carlo standard error of the posterior mean.
    pub fn mcse_mean(&self, j: usize) -> f64 {
        self.sd(j) / self.ess[j].sqrt()
    }

    /// Monte-Carlo standard error of the posterior standard deviation (delta method on the
    /// variance, using the effective sample size of the parameter).
    pub fn mcse_sd(&self, j: usize) -> f64 {
        let m = self.mean(j);
        let n = self.draws.len() as f64;
        let var = self.draws.iter().map(|d| (d[j] - m).powi(2)).sum::<f64>() / n;
        let m4 = self.draws.iter().map(|d| (d[j] - m).powi(4)).sum::<f64>() / n;
        let sq: Vec<f64> = self.draws.iter().map(|d| (d[j] - m).powi(2)).collect();
        let ess_sq = effective_sample_size(&split_into(&sq, self.chains));
        ((m4 - var * var) / ess_sq).sqrt() / (2.0 * var.sqrt())
    }

    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().copied().fold(1.0, f64::max)
    }

    /// The full parameter vector at kept draw `i` (spiked values filled in).
    pub fn param_vector(&self, i: usize) -> Option<ParamVector> {
        let model = self.model.as_ref()?;
        let row = self.draws.get(i).map(Vec::as_slice).unwrap_or(&[]);
        let get = |name: &str, prior: &crate::priors::PriorSpec| match prior.spike_value() {
            Some(v) => Some(v),
            None => self.index_of(name).and_then(|j| row.get(j).copied()),
        };
        Some(ParamVector {
            beta: get("beta", &model.prior_beta)?,
            alpha: get("alpha", &model.prior_alpha)?,
            gamma: match &model.prior_gamma {
                Some(g) => Some(get("gamma", g)?),
                None => None,
            },
        })
    }

    /// Number of rows `param_vector` can be queried at; a zero-dimensional fit has one.
    pub fn parameter_draw_count(&self) -> usize {
        if self.dimension() == 0 {
            1
        } else {
            self.draws.len()
        }
    }
}

/// Samples the posterior of a survival model. An empty dataset samples the prior.
pub fn sample_posterior(model: &ModelSpec, data: &SurvivalDataset, settings: &SamplerSettings) -> Result<PosteriorFit> {
    let target = SurvivalTarget::new(model, data)?;
    let mut fit = sample_target(&target, settings)?;
    fit.model = Some(model.clone());
    Ok(fit)
}

struct ChainOutput {
    draws: Vec<Vec<f64>>,
    log_post: Vec<f64>,
    acceptance: Vec<f64>,
}

/// Runs the sampler on any [`Target`].
pub fn sample_target<T: Target + ?Sized>(target: &T, settings: &SamplerSettings) -> Result<PosteriorFit> {
    settings.validate()?;
    let names: Vec<String> = target.parameters().iter().map(|p| p.name.clone()).collect();
    if target.dimension() == 0 {
        let lp = target.log_likelihood(&[]);
        return Ok(PosteriorFit {
            free_parameter_names: names,
            draws: Vec::new(),
            chains: settings.chains,
            draws_per_chain: 0,
            rhat: Vec::new(),
            ess: Vec::new(),
            acceptance_rates: Vec::new(),
            log_posterior_values: vec![lp],
            log_marglik: None,
            warnings: Vec::new(),
            model: None,
        });
    }

    let outputs: Vec<Result<ChainOutput>> =
        (0..settings.chains).into_par_iter().map(|c| run_chain(target, settings, c)).collect();
    let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;

    let dim = target.dimension();
    let per_chain: Vec<Vec<Vec<f64>>> = (0..dim)
        .map(|j| outputs.iter().map(|o| o.draws.iter().map(|d| d[j]).collect()).collect())
        .collect();
    let rhat: Vec<f64> = per_chain.iter().map(|c| split_rhat(c)).collect();
    let ess: Vec<f64> = per_chain.iter().map(|c| effective_sample_size(c)).collect();
    let acceptance_rates =
        (0..dim).map(|j| outputs.iter().map(|o| o.acceptance[j]).sum::<f64>() / outputs.len() as f64).collect();

    let mut warnings = Vec::new();
    for (name, r) in names.iter().zip(&rhat) {
        if !(*r <= RHAT_WARNING) {
            let msg = format!("R-hat for {name} is {r:.3} (> {RHAT_WARNING})");
            warn!("{msg}");
            warnings.push(msg);
        }
    }

    let mut draws = Vec::with_capacity(settings.total_kept());
    let mut log_posterior_values = Vec::with_capacity(settings.total_kept());
    for o in outputs {
        draws.extend(o.draws);
        log_posterior_values.extend(o.log_post);
    }
    Ok(PosteriorFit {
        free_parameter_names: names,
        draws,
        chains: settings.chains,
        draws_per_chain: settings.sampling_iterations,
        rhat,
        ess,
        acceptance_rates,
        log_posterior_values,
        log_marglik: None,
        warnings,
        model: None,
    })
}

/// Initial proposal scale on the unconstrained axis.
fn initial_step(p: &crate::target::FreeParameter) -> f64 {
    use crate::priors::{PriorSpec, Transform};
    let s = match (p.transform, p.prior) {
        (Transform::Identity, PriorSpec::Normal { sigma, .. }) => sigma,
        (Transform::Identity, PriorSpec::Cauchy { scale, .. }) => scale,
        (_, PriorSpec::LogNormal { sigma_log, .. }) => sigma_log,
        _ => 1.0,
    };
    0.5 * s
}

fn run_chain<T: Target + ?Sized>(target: &T, settings: &SamplerSettings, chain: usize) -> Result<ChainOutput> {
    let dim = target.dimension();
    let mut rng = stream(settings.seed, &[chain as u64]);
    let params = target.parameters();
    let mut scratch = vec![0.0; dim];

    // initial values drawn from the priors, clamped away from the extreme tails
    let mut u = vec![0.0; dim];
    let mut lp = f64::NEG_INFINITY;
    for _ in 0..MAX_INIT_ATTEMPTS {
        let theta: Vec<f64> = params
            .iter()
            .map(|p| {
                let (lo, hi) = p.prior.init_bounds();
                let (slo, shi) = p.prior.support();
                let x = p.prior.sample(&mut rng).clamp(lo, hi);
                // keep strictly inside open supports so the transform stays finite
                if x <= slo || x >= shi {
                    let width = if (shi - slo).is_finite() { shi - slo } else { 1.0 };
                    x.clamp(slo + 1e-6 * width, shi - 1e-6 * width)
                } else {
                    x
                }
            })
            .collect();
        target.unconstrain(&theta, &mut u);
        lp = target.log_density_unconstrained(&u, &mut scratch);
        if lp.is_finite() {
            break;
        }
    }
    if !lp.is_finite() {
        return Err(Error::Initialization(format!(
            "no finite log posterior after {MAX_INIT_ATTEMPTS} prior draws (chain {chain})"
        )));
    }

    let target_acc = settings.adapt_target_acceptance;
    let mut log_step: Vec<f64> = params.iter().map(|p| initial_step(p).ln()).collect();
    let mut accepted = vec![0usize; dim];
    let total = settings.burnin_iterations + settings.sampling_iterations;
    let mut draws = Vec::with_capacity(settings.sampling_iterations);
    let mut log_post = Vec::with_capacity(settings.sampling_iterations);

    for iter in 0..total {
        let adapting = iter < settings.burnin_iterations;
        if iter == settings.burnin_iterations {
            accepted.iter_mut().for_each(|a| *a = 0);
        }
        for j in 0..dim {
            let old = u[j];
            let z: f64 = rng.sample(StandardNormal);
            u[j] = old + log_step[j].exp() * z;
            let prop = target.log_density_unconstrained(&u, &mut scratch);
            let log_ratio = prop - lp;
            let accept_prob = if log_ratio >= 0.0 { 1.0 } else { log_ratio.exp() };
            let uniform: f64 = rng.gen();
            if uniform < accept_prob {
                lp = prop;
                accepted[j] += 1;
            } else {
                u[j] = old;
            }
            if adapting {
                let gain = ((iter + 1) as f64).powf(-0.6);
                log_step[j] += gain * (accept_prob - target_acc);
            }
        }
        if !adapting {
            target.constrain(&u, &mut scratch);
            draws.push(scratch.clone());
            log_post.push(lp);
        }
    }
    let acceptance = accepted.iter().map(|&a| a as f64 / settings.sampling_iterations as f64).collect();
    Ok(ChainOutput { draws, log_post, acceptance })
}

fn split_into(values: &[f64], chains: usize) -> Vec<Vec<f64>> {
    let n = values.len() / chains.max(1);
    values.chunks(n.max(1)).map(|c| c.to_vec()).collect()
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Split-R-hat: each chain is halved and the classic between/within ratio is computed
/// over the halves.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| {
            let h = c.len() / 2;
            [&c[..h], &c[c.len() - h..]]
        })
        .collect();
    let n = halves[0].len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let stats: Vec<(f64, f64)> = halves.iter().map(|h| mean_var(h)).collect();
    let m = stats.len() as f64;
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m;
    let b = n / (m - 1.0) * stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m;
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

/// Multi-chain effective sample size with Geyer's initial monotone sequence.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if n < 4 {
        return (m * n) as f64;
    }
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(&c[..n])).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m as f64;
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m as f64;
    let b = if m > 1 {
        n as f64 / (m as f64 - 1.0) * stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>()
    } else {
        0.0
    };
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    if var_plus <= 0.0 {
        return (m * n) as f64;
    }
    let rho = |t: usize| -> f64 {
        let mut v = 0.0;
        for c in chains {
            for i in 0..n - t {
                let d = c[i + t] - c[i];
                v += d * d;
            }
        }
        v /= (m * (n - t)) as f64;
        1.0 - v / (2.0 * var_plus)
    };
    let mut sum = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let pair = if t == 0 { 1.0 + rho(1) } else { rho(t) + rho(t + 1) };
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        sum += pair;
        prev_pair = pair;
        t += 2;
    }
    let tau = (-1.0 + 2.0 * sum).max(1.0 / ((m * n) as f64).log10());
    (m * n) as f64 / tau
}
