//! Maximum-likelihood fits of the survival families, used as frequentist comparators
//! and as the first stage of meta-analytic prior construction.
//!
//! Optimization runs on the unconstrained vector `(beta?, alpha, ln gamma?)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{CompressedData, FamilyKind, ParamVector, SurvivalDataset};
use crate::seeding::stream;
use crate::special::normal_quantile;

pub const RESTARTS: usize = 5;
/// Stationarity tolerance on the unconstrained gradient.
pub const GRADIENT_TOLERANCE: f64 = 1e-4;
const RESTART_SEED: u64 = 0x4D4C_4531;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardErrors {
    pub beta: Option<f64>,
    pub alpha: f64,
    pub gamma: Option<f64>,
    pub log_gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub family: FamilyKind,
    pub include_treatment: bool,
    pub estimates: ParamVector,
    /// Absent when the Hessian is not positive definite.
    pub standard_errors: Option<StandardErrors>,
    pub log_lik: f64,
    pub aic: f64,
    pub bic: f64,
    pub converged: bool,
    pub n_params: usize,
    pub n_obs: usize,
}

struct Objective<'a> {
    family: FamilyKind,
    treatment: bool,
    data: &'a CompressedData,
}

impl Objective<'_> {
    fn dim(&self) -> usize {
        1 + self.treatment as usize + self.family.has_auxiliary() as usize
    }

    fn unpack(&self, u: &[f64]) -> ParamVector {
        let mut i = 0;
        let beta = if self.treatment {
            i += 1;
            u[0]
        } else {
            0.0
        };
        let alpha = u[i];
        let gamma = self.family.has_auxiliary().then(|| u[i + 1].exp());
        ParamVector { beta, alpha, gamma }
    }

    fn log_lik(&self, u: &[f64]) -> f64 {
        let p = self.unpack(u);
        let v = self.data.log_likelihood(self.family, p.beta, p.alpha, p.gamma.unwrap_or(f64::NAN));
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    fn neg(&self, u: &[f64]) -> f64 {
        -self.log_lik(u)
    }
}

fn fd_step(x: f64) -> f64 {
    1e-5f64.max(1e-5 * x.abs())
}

/// Central-difference gradient with step `max(1e-5, 1e-5 |x|)`.
pub fn numerical_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = fd_step(x[i]);
            y[i] = x[i] + h;
            let fp = f(&y);
            y[i] = x[i] - h;
            let fm = f(&y);
            y[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian with the same step rule.
pub fn numerical_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let mut h = DMatrix::zeros(d, d);
    let f0 = f(x);
    let mut y = x.to_vec();
    for i in 0..d {
        let hi = fd_step(x[i]);
        y[i] = x[i] + hi;
        let fp = f(&y);
        y[i] = x[i] - hi;
        let fm = f(&y);
        y[i] = x[i];
        h[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in 0..i {
            let hj = fd_step(x[j]);
            let mut g = |si: f64, sj: f64| {
                y[i] = x[i] + si * hi;
                y[j] = x[j] + sj * hj;
                let v = f(&y);
                y[i] = x[i];
                y[j] = x[j];
                v
            };
            let v = (g(1.0, 1.0) - g(1.0, -1.0) - g(-1.0, 1.0) + g(-1.0, -1.0)) / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// Nelder–Mead minimization; returns the best vertex and its value.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let d = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = eval(&x);
        simplex.push((x, v));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[d].1);
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= 1e-12 * (1.0 + best.abs()) && size < 1e-9 {
            break;
        }
        let centroid: Vec<f64> =
            (0..d).map(|j| simplex[..d].iter().map(|(x, _)| x[j]).sum::<f64>() / d as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[d].0).map(|(c, w)| c + t * (c - w)).collect()
        };
        let xr = along(1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let x = along(0.5);
                let v = eval(&x);
                (x, v)
            } else {
                let x = along(-0.5);
                let v = eval(&x);
                (x, v)
            };
            if fc < fr.min(worst) {
                simplex[d] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for (x, v) in simplex[1..].iter_mut() {
                    for (xi, bi) in x.iter_mut().zip(&x0) {
                        *xi = bi + 0.5 * (*xi - bi);
                    }
                    *v = eval(x);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Damped Newton iterations on finite-difference derivatives.
fn newton_polish(f: &impl Fn(&[f64]) -> f64, mut x: Vec<f64>, mut fx: f64) -> (Vec<f64>, f64) {
    for _ in 0..50 {
        let g = DVector::from_vec(numerical_gradient(f, &x));
        if g.amax() < GRADIENT_TOLERANCE * 1e-2 {
            break;
        }
        let h = numerical_hessian(f, &x);
        let Some(chol) = h.cholesky() else { break };
        let dir = chol.solve(&g);
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-8 {
            let y: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, b)| a - t * b).collect();
            let fy = f(&y);
            if fy <= fx {
                x = y;
                fx = fy;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (x, fx)
}

/// Maximum-likelihood fit of `family`, optionally with the treatment coefficient.
pub fn fit_mle(family: FamilyKind, data: &SurvivalDataset, include_treatment: bool) -> Result<MleFit> {
    let events = data.event_count();
    if events == 0 {
        return Err(Error::Domain("maximum likelihood needs at least one event".into()));
    }
    let (n0, n1) = data.arm_counts();
    if include_treatment && (n0 == 0 || n1 == 0) {
        return Err(Error::Domain("treatment effect needs both arms present".into()));
    }
    let compressed = CompressedData::new(data);
    let obj = Objective { family, treatment: include_treatment, data: &compressed };
    let d = obj.dim();
    let f = |u: &[f64]| obj.neg(u);

    // exponential closed form seeds alpha
    let mut x0 = vec![0.0; d];
    x0[include_treatment as usize] = (data.total_time() / events as f64).ln();

    let mut rng = stream(RESTART_SEED, &[family.index() as u64]);
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for _ in 0..=RESTARTS {
        let start: Vec<f64> = match &best {
            None => x0.clone(),
            Some((b, _, _)) => b.iter().map(|v| v + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect(),
        };
        let (x, fx) = nelder_mead(f, &start, 0.5, 2000 * d);
        let (x, fx) = newton_polish(&f, x, fx);
        let ok = fx.is_finite() && stationary(&f, &x) && positive_definite(&numerical_hessian(f, &x));
        let better = best.as_ref().map_or(true, |(_, bf, bok)| (ok && !bok) || (ok == *bok && fx < *bf));
        if better {
            best = Some((x, fx, ok));
        }
        if best.as_ref().is_some_and(|b| b.2) {
            break;
        }
    }
    let (x, fx, converged) = best.expect("at least one attempt");
    let estimates = obj.unpack(&x);
    let standard_errors = standard_errors(&obj, &x);
    let log_lik = -fx;
    let k = d as f64;
    let n = data.len() as f64;
    Ok(MleFit {
        family,
        include_treatment,
        estimates,
        standard_errors,
        log_lik,
        aic: 2.0 * k - 2.0 * log_lik,
        bic: k * n.ln() - 2.0 * log_lik,
        converged,
        n_params: d,
        n_obs: data.len(),
    })
}

fn stationary(f: &impl Fn(&[f64]) -> f64, x: &[f64]) -> bool {
    numerical_gradient(f, x).iter().all(|g| g.abs() < GRADIENT_TOLERANCE)
}

fn positive_definite(h: &DMatrix<f64>) -> bool {
    h.iter().all(|v| v.is_finite()) && h.clone().symmetric_eigenvalues().iter().all(|&e| e > 0.0)
}

fn standard_errors(obj: &Objective, x: &[f64]) -> Option<StandardErrors> {
    let h = numerical_hessian(|u: &[f64]| obj.neg(u), x);
    if !positive_definite(&h) {
        return None;
    }
    let cov = h.cholesky()?.inverse();
    let se = |i: usize| cov[(i, i)].sqrt();
    let off = obj.treatment as usize;
    let log_gamma = obj.family.has_auxiliary().then(|| se(off + 1));
    Some(StandardErrors {
        beta: obj.treatment.then(|| se(0)),
        alpha: se(off),
        gamma: log_gamma.map(|s| s * x[off + 1].exp()),
        log_gamma,
    })
}

/// Gradient of the log-likelihood on the unconstrained scale at `fit`'s estimates.
pub fn score_at_optimum(fit: &MleFit, data: &SurvivalDataset) -> Vec<f64> {
    let compressed = CompressedData::new(data);
    let obj = Objective { family: fit.family, treatment: fit.include_treatment, data: &compressed };
    let mut u = Vec::new();
    if fit.include_treatment {
        u.push(fit.estimates.beta);
    }
    u.push(fit.estimates.alpha);
    if let Some(g) = fit.estimates.gamma {
        u.push(g.ln());
    }
    numerical_gradient(|v: &[f64]| obj.log_lik(v), &u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Bic,
}

/// Index of the fit minimizing the criterion; ties go to the earliest family in canonical order.
pub fn select_model(fits: &[MleFit], criterion: Criterion) -> Result<usize> {
    if fits.is_empty() {
        return Err(Error::Contract("model selection needs at least one fit".into()));
    }
    let score = |f: &MleFit| match criterion {
        Criterion::Aic => f.aic,
        Criterion::Bic => f.bic,
    };
    let mut best = 0;
    for i in 1..fits.len() {
        let (a, b) = (score(&fits[i]), score(&fits[best]));
        if a < b || (a == b && fits[i].family.index() < fits[best].family.index()) {
            best = i;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldTest {
    pub z: f64,
    pub critical: f64,
    pub reject: bool,
}

/// One-sided Wald test of beta > 0 at level `alpha`.
pub fn wald_one_sided(fit: &MleFit, alpha: f64) -> Result<WaldTest> {
    let se = fit
        .standard_errors
        .and_then(|s| s.beta)
        .ok_or_else(|| Error::Contract("Wald test needs a fit with a treatment standard error".into()))?;
    let z = fit.estimates.beta / se;
    let critical = normal_quantile(1.0 - alpha);
    Ok(WaldTest { z, critical, reject: z > critical })
}
