//! Accelerated-failure-time parametric families and the right-censored likelihood.
//!
//! Every family is written as `T = exp(eta) * T0` where `T0` has a unit-scale
//! baseline distribution:
//!
//! | family       | baseline `T0`                                  |
//! |--------------|------------------------------------------------|
//! | exponential  | `S0(z) = exp(-z)`                              |
//! | Weibull      | `S0(z) = exp(-z^gamma)`                        |
//! | log-normal   | `ln T0 ~ Normal(0, gamma)` (gamma is the sd)   |
//! | log-logistic | `S0(z) = 1 / (1 + z^gamma)`                    |
//! | gamma        | shape `gamma`, rate 1                          |
//!
//! so that `S(t | eta, gamma) = S0(t * exp(-eta) | gamma)` and
//! `h(t | eta, gamma) = exp(-eta) * h0(t * exp(-eta) | gamma)`.
//! The linear predictor is `eta = alpha + beta * x` with `x` the treatment dummy.

use std::collections::BTreeMap;
use std::fmt;

use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{incomplete_gamma, ln_gamma, ln_normal_pdf, ln_normal_sf, normal_quantile, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Exponential,
    Weibull,
    LogNormal,
    LogLogistic,
    Gamma,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 5] = [
        FamilyKind::Exponential,
        FamilyKind::Weibull,
        FamilyKind::LogNormal,
        FamilyKind::LogLogistic,
        FamilyKind::Gamma,
    ];

    /// Whether the family carries the auxiliary (shape/scale) parameter gamma.
    pub fn has_auxiliary(self) -> bool {
        !matches!(self, FamilyKind::Exponential)
    }

    /// Position in the canonical family order.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Exponential => "exponential",
            FamilyKind::Weibull => "weibull",
            FamilyKind::LogNormal => "lognormal",
            FamilyKind::LogLogistic => "loglogistic",
            FamilyKind::Gamma => "gamma",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One participant: observed (or censoring) time in days, event flag, treatment arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub time: f64,
    /// `true` when the event was observed, `false` when right-censored.
    pub event: bool,
    /// Dummy-coded treatment: `true` for the experimental arm.
    pub treated: bool,
}

impl SurvivalRecord {
    pub fn new(time: f64, event: bool, treated: bool) -> Self {
        Self { time, event, treated }
    }

    #[inline]
    pub fn covariate(&self) -> f64 {
        if self.treated {
            1.0
        } else {
            0.0
        }
    }
}

/// Right-censored survival data with a binary treatment covariate.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SurvivalDataset {
    records: Vec<SurvivalRecord>,
}

impl SurvivalDataset {
    /// Validates that every time is finite and strictly positive.
    pub fn new(records: Vec<SurvivalRecord>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if !(r.time.is_finite() && r.time > 0.0) {
                return Err(Error::Data {
                    row: i + 1,
                    message: format!("time must be positive and finite, got {}", r.time),
                });
            }
        }
        Ok(Self { records })
    }

    pub fn empty() -> Self {
        Self { records: Vec::new() }
    }

    pub fn records(&self) -> &[SurvivalRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    /// (comparator, treated) participant counts.
    pub fn arm_counts(&self) -> (usize, usize) {
        let treated = self.records.iter().filter(|r| r.treated).count();
        (self.records.len() - treated, treated)
    }

    pub fn max_time(&self) -> Option<f64> {
        self.records.iter().map(|r| r.time).reduce(f64::max)
    }

    pub fn total_time(&self) -> f64 {
        self.records.iter().map(|r| r.time).sum()
    }

    /// Records of `self` followed by those of `other`.
    pub fn concat(&self, other: &SurvivalDataset) -> SurvivalDataset {
        let mut records = self.records.clone();
        records.extend_from_slice(&other.records);
        SurvivalDataset { records }
    }

    /// Keeps the records for which `keep` returns true.
    pub fn filter(&self, keep: impl Fn(&SurvivalRecord) -> bool) -> SurvivalDataset {
        SurvivalDataset { records: self.records.iter().copied().filter(|r| keep(r)).collect() }
    }
}

impl FromIterator<SurvivalRecord> for SurvivalDataset {
    /// Collects without validation; callers are expected to produce positive times.
    fn from_iter<I: IntoIterator<Item = SurvivalRecord>>(iter: I) -> Self {
        SurvivalDataset { records: iter.into_iter().collect() }
    }
}

/// Parameters of one AFT model: treatment effect, intercept, optional auxiliary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    /// Log acceleration factor.
    pub beta: f64,
    /// Log-time intercept (log days).
    pub alpha: f64,
    /// Auxiliary parameter, absent for the exponential family.
    pub gamma: Option<f64>,
}

impl ParamVector {
    pub fn new(beta: f64, alpha: f64, gamma: Option<f64>) -> Self {
        Self { beta, alpha, gamma }
    }

    #[inline]
    pub fn eta(&self, treated: bool) -> f64 {
        if treated {
            self.alpha + self.beta
        } else {
            self.alpha
        }
    }
}

/// Checks that `gamma` is present and positive exactly when the family needs it.
pub fn check_auxiliary(family: FamilyKind, gamma: Option<f64>) -> Result<f64> {
    match (family.has_auxiliary(), gamma) {
        (false, None) => Ok(f64::NAN),
        (false, Some(_)) => Err(Error::Specification(format!(
            "{family} family takes no auxiliary parameter"
        ))),
        (true, None) => Err(Error::Specification(format!(
            "{family} family requires an auxiliary parameter"
        ))),
        (true, Some(g)) if g > 0.0 && g.is_finite() => Ok(g),
        (true, Some(g)) => Err(Error::Domain(format!("auxiliary parameter must be > 0, got {g}"))),
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be positive and finite, got {t}")))
    }
}

/// ln S0 at `ln z`, parameters already validated.
#[inline]
pub(crate) fn ln_baseline_sf(family: FamilyKind, ln_z: f64, gamma: f64) -> f64 {
    match family {
        FamilyKind::Exponential => -ln_z.exp(),
        FamilyKind::Weibull => -(gamma * ln_z).exp(),
        FamilyKind::LogNormal => ln_normal_sf(ln_z / gamma),
        FamilyKind::LogLogistic => -softplus(gamma * ln_z),
        FamilyKind::Gamma => incomplete_gamma(gamma, ln_z.exp()).ln_q,
    }
}

/// ln f0 at `ln z` (density of `T0` with respect to z). `ln_gamma_fn` is ln Gamma(gamma),
/// only read by the gamma family.
#[inline]
pub(crate) fn ln_baseline_pdf(family: FamilyKind, ln_z: f64, gamma: f64, ln_gamma_fn: f64) -> f64 {
    match family {
        FamilyKind::Exponential => -ln_z.exp(),
        FamilyKind::Weibull => gamma.ln() + (gamma - 1.0) * ln_z - (gamma * ln_z).exp(),
        FamilyKind::LogNormal => {
            let w = ln_z / gamma;
            ln_normal_pdf(w) - gamma.ln() - ln_z
        }
        FamilyKind::LogLogistic => {
            let gz = gamma * ln_z;
            gamma.ln() + (gamma - 1.0) * ln_z - 2.0 * softplus(gz)
        }
        FamilyKind::Gamma => (gamma - 1.0) * ln_z - ln_z.exp() - ln_gamma_fn,
    }
}

/// ln S(t | eta, gamma).
pub fn log_survival(family: FamilyKind, t: f64, eta: f64, gamma: Option<f64>) -> Result<f64> {
    check_time(t)?;
    let g = check_auxiliary(family, gamma)?;
    Ok(ln_baseline_sf(family, t.ln() - eta, g))
}

/// ln f(t | eta, gamma).
pub fn log_density(family: FamilyKind, t: f64, eta: f64, gamma: Option<f64>) -> Result<f64> {
    check_time(t)?;
    let g = check_auxiliary(family, gamma)?;
    let lg = if family == FamilyKind::Gamma { ln_gamma(g) } else { 0.0 };
    Ok(ln_baseline_pdf(family, t.ln() - eta, g, lg) - eta)
}

/// ln h(t | eta, gamma) = ln f - ln S. Fails when S underflows to zero.
pub fn log_hazard(family: FamilyKind, t: f64, eta: f64, gamma: Option<f64>) -> Result<f64> {
    check_time(t)?;
    let g = check_auxiliary(family, gamma)?;
    let ln_z = t.ln() - eta;
    let ln_h0 = match family {
        FamilyKind::Exponential => 0.0,
        FamilyKind::Weibull => g.ln() + (g - 1.0) * ln_z,
        FamilyKind::LogLogistic => g.ln() + (g - 1.0) * ln_z - softplus(g * ln_z),
        FamilyKind::LogNormal | FamilyKind::Gamma => {
            let ln_s = ln_baseline_sf(family, ln_z, g);
            if ln_s == f64::NEG_INFINITY {
                return Err(Error::Domain(format!(
                    "survival underflows at t = {t} for the {family} family"
                )));
            }
            let lg = if family == FamilyKind::Gamma { ln_gamma(g) } else { 0.0 };
            ln_baseline_pdf(family, ln_z, g, lg) - ln_s
        }
    };
    Ok(ln_h0 - eta)
}

/// Time `t` with `1 - S(t) = p`.
pub fn quantile(family: FamilyKind, p: f64, eta: f64, gamma: Option<f64>) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability must lie in (0, 1), got {p}")));
    }
    let g = check_auxiliary(family, gamma)?;
    let ln_z = match family {
        FamilyKind::Exponential => (-(-p).ln_1p()).ln(),
        FamilyKind::Weibull => (-(-p).ln_1p()).ln() / g,
        FamilyKind::LogNormal => g * normal_quantile(p),
        FamilyKind::LogLogistic => (p.ln() - (-p).ln_1p()) / g,
        FamilyKind::Gamma => gamma_baseline_ln_quantile(p, g),
    };
    Ok((ln_z + eta).exp())
}

/// ln z with P(shape, z) = p, by bracketed bisection in ln z and a Newton polish.
fn gamma_baseline_ln_quantile(p: f64, shape: f64) -> f64 {
    // Match whichever tail is smaller to keep relative accuracy.
    let upper = p > 0.5;
    let target = if upper { (-p).ln_1p() } else { p.ln() };
    let lg = ln_gamma(shape);
    // increasing in u = ln z; negative means u is too small
    let r = |u: f64| {
        let ig = incomplete_gamma(shape, u.exp());
        if upper {
            target - ig.ln_q
        } else {
            ig.ln_p - target
        }
    };

    // small-z approximation P ~ z^a / Gamma(a + 1) as a starting point
    let guess = if upper { shape.max(1.0).ln() } else { (p.ln() + ln_gamma(shape + 1.0)) / shape };
    let mut lo = guess.min(shape.ln()) - 1.0;
    let mut hi = guess.max(shape.ln()) + 1.0;
    while r(lo) > 0.0 {
        lo -= 2.0 * (hi - lo);
    }
    while r(hi) < 0.0 {
        hi += hi - lo;
    }
    for _ in 0..200 {
        if hi - lo < 1e-7 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if r(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Newton on ln P (or ln Q) as a function of u = ln z.
    let mut u = 0.5 * (lo + hi);
    for _ in 0..8 {
        let ig = incomplete_gamma(shape, u.exp());
        // d ln P / du = f0(z) z / P ; d ln Q / du = -f0(z) z / Q
        let ln_fz = ln_baseline_pdf(FamilyKind::Gamma, u, shape, lg) + u;
        let (val, slope) = if upper {
            (ig.ln_q - target, -(ln_fz - ig.ln_q).exp())
        } else {
            (ig.ln_p - target, (ln_fz - ig.ln_p).exp())
        };
        if !(slope.is_finite() && slope != 0.0) {
            break;
        }
        let next = u - val / slope;
        if !(next > lo - 1e-7 && next < hi + 1e-7) {
            break;
        }
        let step = next - u;
        u = next;
        if step.abs() < 1e-14 * u.abs().max(1.0) {
            break;
        }
    }
    u
}

/// Draws one time by inverting the CDF at an open-interval uniform.
pub fn sample_time<R: Rng + ?Sized>(
    family: FamilyKind,
    eta: f64,
    gamma: Option<f64>,
    rng: &mut R,
) -> Result<f64> {
    check_auxiliary(family, gamma)?;
    let u: f64 = rng.sample(Open01);
    quantile(family, u, eta, gamma)
}

/// Right-censored log-likelihood: events contribute ln h + ln S, censored records ln S.
pub fn log_likelihood(data: &SurvivalDataset, family: FamilyKind, params: &ParamVector) -> Result<f64> {
    let g = check_auxiliary(family, params.gamma)?;
    let lg = if family == FamilyKind::Gamma { ln_gamma(g) } else { 0.0 };
    let mut total = 0.0;
    for r in data.records() {
        let eta = params.eta(r.treated);
        let ln_z = r.time.ln() - eta;
        total += if r.event {
            // ln h + ln S = ln f
            ln_baseline_pdf(family, ln_z, g, lg) - eta
        } else {
            ln_baseline_sf(family, ln_z, g)
        };
    }
    Ok(total)
}

/// Dataset collapsed to unique `(time, event, arm)` cells with multiplicities.
///
/// Used on the sampler's hot path: after administrative censoring most records
/// share a single censoring time, so the number of cells is often far below n.
#[derive(Debug, Clone)]
pub struct CompressedData {
    cells: Vec<Cell>,
    /// Per arm (comparator, treated): event count and total time, for the exponential shortcut.
    events: [f64; 2],
    exposure: [f64; 2],
    n: usize,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    ln_t: f64,
    event: bool,
    treated: bool,
    count: f64,
}

impl CompressedData {
    pub fn new(data: &SurvivalDataset) -> Self {
        let mut map: BTreeMap<(bool, bool, u64), usize> = BTreeMap::new();
        let mut events = [0.0; 2];
        let mut exposure = [0.0; 2];
        for r in data.records() {
            *map.entry((r.treated, r.event, r.time.to_bits())).or_default() += 1;
            let arm = r.treated as usize;
            exposure[arm] += r.time;
            if r.event {
                events[arm] += 1.0;
            }
        }
        let cells = map
            .into_iter()
            .map(|((treated, event, bits), count)| Cell {
                ln_t: f64::from_bits(bits).ln(),
                event,
                treated,
                count: count as f64,
            })
            .collect();
        Self { cells, events, exposure, n: data.len() }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn unique_cells(&self) -> usize {
        self.cells.len()
    }

    /// Log-likelihood without validation; `gamma` is ignored for the exponential family.
    pub fn log_likelihood(&self, family: FamilyKind, beta: f64, alpha: f64, gamma: f64) -> f64 {
        if family == FamilyKind::Exponential {
            // sum over events of -eta  minus  sum of t * exp(-eta)
            let e0 = alpha;
            let e1 = alpha + beta;
            return -(self.events[0] * e0 + self.events[1] * e1)
                - self.exposure[0] * (-e0).exp()
                - self.exposure[1] * (-e1).exp();
        }
        let lg = if family == FamilyKind::Gamma { ln_gamma(gamma) } else { 0.0 };
        let mut total = 0.0;
        for c in &self.cells {
            let eta = if c.treated { alpha + beta } else { alpha };
            let ln_z = c.ln_t - eta;
            let v = if c.event {
                ln_baseline_pdf(family, ln_z, gamma, lg) - eta
            } else {
                ln_baseline_sf(family, ln_z, gamma)
            };
            total += c.count * v;
        }
        total
    }
}
