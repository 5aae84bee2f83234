//! Independent reference computations shared by the integration suites.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use survbma::families::{SurvivalDataset, SurvivalRecord};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (v, err) = gk15(f, a, b);
    // panels at rounding level stop refining
    if err <= tol.max(1e-14 * v.abs()) || depth == 0 {
        return v;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
}

/// Adaptive Gauss-Kronrod (7/15) integral of `f` over `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    adapt(&f, a, b, tol, 30)
}

/// Interval outside of which `log_f` stays more than 40 nats below its maximum on a scan of `[lo, hi]`.
pub fn effective_support(log_f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64, f64) {
    const N: usize = 600;
    let xs: Vec<f64> = (0..=N).map(|i| lo + (hi - lo) * i as f64 / N as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| log_f(x)).collect();
    let max = vals.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let first = vals.iter().position(|&v| v > max - 40.0).unwrap();
    let last = vals.iter().rposition(|&v| v > max - 40.0).unwrap();
    (xs[first.saturating_sub(1)], xs[(last + 1).min(N)], max)
}

/// ln of the integral of `exp(log_f)` over `[lo, hi]`.
pub fn log_integrate(log_f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (a, b, m) = effective_support(&log_f, lo, hi);
    let v = integrate(|x| (log_f(x) - m).exp(), a, b, 1e-12);
    m + v.ln()
}

/// Normalizing constant and first two moments of the density proportional to `exp(log_f)`.
pub fn moments(log_f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64, f64) {
    let (a, b, m) = effective_support(&log_f, lo, hi);
    let z = integrate(|x| (log_f(x) - m).exp(), a, b, 1e-11);
    let e1 = integrate(|x| x * (log_f(x) - m).exp(), a, b, 1e-11) / z;
    let e2 = integrate(|x| (x - e1).powi(2) * (log_f(x) - m).exp(), a, b, 1e-11) / z;
    (m + z.ln(), e1, e2.sqrt())
}

pub fn ln_normal(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Exponential AFT log-likelihood in closed form.
pub fn exponential_loglik(data: &SurvivalDataset, beta: f64, alpha: f64) -> f64 {
    data.records()
        .iter()
        .map(|r| {
            let eta = alpha + if r.treated { beta } else { 0.0 };
            let rate = (-eta).exp();
            let d = if r.event { rate.ln() } else { 0.0 };
            d - rate * r.time
        })
        .sum()
}

/// Weibull AFT log-likelihood: hazard `gamma / lambda (t / lambda)^(gamma - 1)` with `lambda = e^eta`.
pub fn weibull_loglik(data: &SurvivalDataset, beta: f64, alpha: f64, gamma: f64) -> f64 {
    data.records()
        .iter()
        .map(|r| {
            let lambda = (alpha + if r.treated { beta } else { 0.0 }).exp();
            let cum = (r.time / lambda).powf(gamma);
            let h = gamma / lambda * (r.time / lambda).powf(gamma - 1.0);
            if r.event {
                h.ln() - cum
            } else {
                -cum
            }
        })
        .sum()
}

/// Fixed synthetic trial: Weibull survival times with shape 1.2, scale e^7 (e^7.3 treated),
/// uniform censoring on [500, 2500], 50 participants.
pub fn synthetic_n50() -> SurvivalDataset {
    let mut rng = ChaCha20Rng::seed_from_u64(50);
    let recs = (0..50)
        .map(|i| {
            let treated = i % 2 == 1;
            let scale = if treated { 7.3f64.exp() } else { 7.0f64.exp() };
            let u: f64 = rng.gen_range(1e-12..1.0);
            let t = scale * (-u.ln()).powf(1.0 / 1.2);
            let c = rng.gen_range(500.0..2500.0);
            SurvivalRecord::new(t.min(c), t <= c, treated)
        })
        .collect();
    SurvivalDataset::new(recs).unwrap()
}
