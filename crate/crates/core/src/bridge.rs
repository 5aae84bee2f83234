//! Marginal likelihood by bridge sampling with the optimal bridge function.
//!
//! The kept draws of every chain are split in half. The first halves fit a
//! multivariate normal proposal on the unconstrained scale; the second halves and an
//! equal number of proposal draws enter the Meng–Wong fixed-point iteration, carried
//! out entirely in log space.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::SurvivalDataset;
use crate::priors::ModelSpec;
use crate::sampler::PosteriorFit;
use crate::seeding::stream;
use crate::special::{log_add_exp, log_sum_exp, LN_SQRT_2PI};
use crate::target::{SurvivalTarget, Target};

pub const TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 1000;
/// Fewest kept draws accepted for a fit with free parameters.
pub const MIN_DRAWS: usize = 1000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BridgeResult {
    pub log_marglik: f64,
    pub iterations_used: usize,
    pub relative_change_at_stop: f64,
    pub proposal_mean: Vec<f64>,
    pub proposal_covariance: Vec<Vec<f64>>,
}

/// Bridge estimate for a survival model fit.
pub fn bridge_marglik(fit: &PosteriorFit, model: &ModelSpec, data: &SurvivalDataset, seed: u64) -> Result<BridgeResult> {
    let target = SurvivalTarget::new(model, data)?;
    bridge_sampling(fit, &target, seed)
}

struct MvnProposal {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    chol_inv: DMatrix<f64>,
    log_norm: f64,
}

impl MvnProposal {
    fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = DVector::zeros(d);
        for r in rows {
            for j in 0..d {
                mean[j] += r[j];
            }
        }
        mean /= n;
        let mut cov = DMatrix::zeros(d, d);
        for r in rows {
            for a in 0..d {
                for b in 0..d {
                    cov[(a, b)] += (r[a] - mean[a]) * (r[b] - mean[b]);
                }
            }
        }
        cov /= n - 1.0;
        let chol = cov.clone().cholesky().ok_or_else(|| {
            Error::Numerical(
                "proposal covariance is singular; draw more posterior samples".into(),
            )
        })?;
        let l = chol.l();
        let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::Numerical("proposal covariance is singular; draw more posterior samples".into()));
        }
        let chol_inv = l.clone().try_inverse().ok_or_else(|| {
            Error::Numerical("proposal covariance is singular; draw more posterior samples".into())
        })?;
        Ok(Self { mean, chol: l, chol_inv, log_norm: -(d as f64) * LN_SQRT_2PI - 0.5 * log_det })
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(x) - &self.mean;
        let z = &self.chol_inv * diff;
        self.log_norm - 0.5 * z.norm_squared()
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.mean.len();
        let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        (&self.mean + &self.chol * z).iter().copied().collect()
    }
}

/// Bridge estimate for any target whose posterior draws are in `fit`.
pub fn bridge_sampling<T: Target + ?Sized>(fit: &PosteriorFit, target: &T, seed: u64) -> Result<BridgeResult> {
    let dim = target.dimension();
    if dim == 0 {
        return Ok(BridgeResult {
            log_marglik: target.log_likelihood(&[]),
            iterations_used: 0,
            relative_change_at_stop: 0.0,
            proposal_mean: Vec::new(),
            proposal_covariance: Vec::new(),
        });
    }
    if fit.dimension() != dim {
        return Err(Error::Contract(format!(
            "fit has {} free parameters but the target has {dim}",
            fit.dimension()
        )));
    }
    if fit.len() < MIN_DRAWS {
        return Err(Error::Contract(format!(
            "bridge sampling needs at least {MIN_DRAWS} posterior draws, got {}",
            fit.len()
        )));
    }

    // unconstrained draws, split per chain into fitting and estimation halves
    let per_chain = fit.draws_per_chain;
    let half = per_chain / 2;
    let mut fit_rows = Vec::new();
    let mut est_rows = Vec::new();
    for c in 0..fit.chains {
        for i in 0..per_chain {
            let theta = &fit.draws[c * per_chain + i];
            let mut u = vec![0.0; dim];
            target.unconstrain(theta, &mut u);
            if i < half {
                fit_rows.push(u);
            } else {
                est_rows.push(u);
            }
        }
    }
    let proposal = MvnProposal::fit(&fit_rows)?;
    let mut rng = stream(seed, &[0xB81D6E]);

    let n1 = est_rows.len();
    let n2 = n1;
    let mut scratch = vec![0.0; dim];
    let l1: Vec<f64> = est_rows
        .iter()
        .map(|u| target.log_density_unconstrained(u, &mut scratch) - proposal.log_density(u))
        .collect();
    let l2: Vec<f64> = (0..n2)
        .map(|_| {
            let u = proposal.sample(&mut rng);
            target.log_density_unconstrained(&u, &mut scratch) - proposal.log_density(&u)
        })
        .collect();
    if l1.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("posterior draws have non-finite log density".into()));
    }

    // shift by the median of l1 for numerical stability
    let mut sorted = l1.clone();
    sorted.sort_by(f64::total_cmp);
    let lstar = sorted[sorted.len() / 2];
    let l1: Vec<f64> = l1.iter().map(|v| v - lstar).collect();
    let l2: Vec<f64> = l2.iter().map(|v| v - lstar).collect();

    let ln_s1 = (n1 as f64 / (n1 + n2) as f64).ln();
    let ln_s2 = (n2 as f64 / (n1 + n2) as f64).ln();
    let ln_n1 = (n1 as f64).ln();
    let ln_n2 = (n2 as f64).ln();

    // start from the importance-sampling estimate with the proposal
    let mut log_r = log_sum_exp(&l2) - ln_n2;
    if !log_r.is_finite() {
        log_r = 0.0;
    }
    let mut num = vec![0.0; n2];
    let mut den = vec![0.0; n1];
    let mut rel_change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        for (o, &v) in num.iter_mut().zip(&l2) {
            *o = v - log_add_exp(ln_s1 + v, ln_s2 + log_r);
        }
        for (o, &v) in den.iter_mut().zip(&l1) {
            *o = -log_add_exp(ln_s1 + v, ln_s2 + log_r);
        }
        let new_log_r = (log_sum_exp(&num) - ln_n2) - (log_sum_exp(&den) - ln_n1);
        if !new_log_r.is_finite() {
            return Err(Error::Numerical("bridge iteration produced a non-finite estimate".into()));
        }
        // |r_new - r_old| / r_new
        rel_change = (-(log_r - new_log_r).exp_m1()).abs();
        log_r = new_log_r;
        if rel_change < TOLERANCE {
            break;
        }
    }
    if rel_change >= TOLERANCE {
        return Err(Error::BridgeNonConvergence { iterations, relative_change: rel_change });
    }
    let cov = &proposal.chol * proposal.chol.transpose();
    Ok(BridgeResult {
        log_marglik: log_r + lstar,
        iterations_used: iterations,
        relative_change_at_stop: rel_change,
        proposal_mean: proposal.mean.iter().copied().collect(),
        proposal_covariance: (0..dim).map(|a| (0..dim).map(|b| cov[(a, b)]).collect()).collect(),
    })
}
