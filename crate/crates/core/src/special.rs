//! Special functions used by the survival families.
//!
//! Log-gamma and the complementary error function come from `libm`; the
//! regularized incomplete gamma function is evaluated here in log space so that
//! far-tail survival probabilities of the gamma family do not underflow.

use libm::erfc;

/// ln Gamma(x) for x > 0.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

const MAX_ITER: usize = 10_000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Regularized incomplete gamma values at one point.
#[derive(Debug, Clone, Copy)]
pub struct IncompleteGamma {
    /// Lower regularized P(a, x).
    pub p: f64,
    /// Upper regularized Q(a, x) = 1 - P(a, x).
    pub q: f64,
    /// ln Q(a, x), accurate even when Q underflows.
    pub ln_q: f64,
    /// ln P(a, x).
    pub ln_p: f64,
}

/// Regularized incomplete gamma functions for shape `a > 0` and `x >= 0`.
///
/// Series expansion below `x = a + 1`, modified Lentz continued fraction above.
pub fn incomplete_gamma(a: f64, x: f64) -> IncompleteGamma {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return IncompleteGamma { p: 0.0, q: 1.0, ln_q: 0.0, ln_p: f64::NEG_INFINITY };
    }
    if x.is_infinite() {
        return IncompleteGamma { p: 1.0, q: 0.0, ln_q: f64::NEG_INFINITY, ln_p: 0.0 };
    }
    let ln_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // P = x^a e^-x / Gamma(a+1) * sum_n x^n / ((a+1)...(a+n))
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        let ln_p = ln_prefix + sum.ln();
        let p = ln_p.exp();
        let ln_q = (-p).ln_1p();
        IncompleteGamma { p, q: 1.0 - p, ln_q, ln_p }
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        let ln_q = ln_prefix + h.ln();
        let q = ln_q.exp();
        let ln_p = (-q).ln_1p();
        IncompleteGamma { p: 1.0 - q, q, ln_q, ln_p }
    }
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    incomplete_gamma(a, x).p
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    incomplete_gamma(a, x).q
}

#[inline]
pub fn ln_normal_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// ln(1 - Phi(z)), stable in both tails.
pub fn ln_normal_sf(z: f64) -> f64 {
    if z < -1.0 {
        (-0.5 * erfc(-z / std::f64::consts::SQRT_2)).ln_1p()
    } else if z < 10.0 {
        (0.5 * erfc(z / std::f64::consts::SQRT_2)).ln()
    } else {
        ln_normal_pdf(z) + mills_ratio_cf(z).ln()
    }
}

/// ln Phi(z), stable in both tails.
pub fn ln_normal_cdf(z: f64) -> f64 {
    ln_normal_sf(-z)
}

/// Mills ratio (1 - Phi(z)) / phi(z) via Laplace's continued fraction, for large z.
fn mills_ratio_cf(z: f64) -> f64 {
    let mut acc = z;
    for k in (1..=80).rev() {
        acc = z + k as f64 / acc;
    }
    1.0 / acc
}

/// Inverse of the standard normal CDF (Wichura's AS 241, PPND16) with one Halley step.
pub fn normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    let z = if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        q * (((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r + 67265.770_927_008_7) * r
            + 45921.953_931_549_87)
            * r
            + 13731.693_765_509_461)
            * r
            + 1971.590_950_306_551_3)
            * r
            + 133.141_667_891_784_38)
            * r
            + 3.387_132_872_796_366_5)
            / (((((((5226.495_278_852_545 * r + 28729.085_735_721_943) * r + 39307.895_800_092_71) * r
                + 21213.794_301_586_597)
                * r
                + 5394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_91)
                * r
                + 1.0)
    } else {
        let tail = if q < 0.0 { p } else { 1.0 - p };
        let mut r = (-tail.ln()).sqrt();
        let v = if r <= 5.0 {
            r -= 1.6;
            (((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_184) * r + 0.241_780_725_177_450_6) * r
                + 1.270_458_252_452_368_4)
                * r
                + 3.647_848_324_763_204_5)
                * r
                + 5.769_497_221_460_691)
                * r
                + 4.630_337_846_156_546)
                * r
                + 1.423_437_110_749_683_5)
                / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
                    + 0.015_198_666_563_616_457)
                    * r
                    + 0.148_103_976_427_480_08)
                    * r
                    + 0.689_767_334_985_1)
                    * r
                    + 1.676_384_830_183_803_8)
                    * r
                    + 2.053_191_626_637_759)
                    * r
                    + 1.0)
        } else {
            r -= 5.0;
            (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
                + 1.242_660_947_388_078_4e-3)
                * r
                + 0.026_532_189_526_576_124)
                * r
                + 0.296_560_571_828_504_9)
                * r
                + 1.784_826_539_917_291_3)
                * r
                + 5.463_784_911_164_114)
                * r
                + 6.657_904_643_501_103)
                / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
                    + 1.846_318_317_510_054_8e-5)
                    * r
                    + 7.868_691_311_456_133e-4)
                    * r
                    + 0.014_875_361_290_850_615)
                    * r
                    + 0.136_929_880_922_735_8)
                    * r
                    + 0.599_832_206_555_888)
                    * r
                    + 1.0)
        };
        if q < 0.0 {
            -v
        } else {
            v
        }
    };
    // Halley refinement against the lower-tail CDF
    let e = normal_cdf(z) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * z * z).exp();
    if u.is_finite() {
        z - u / (1.0 + 0.5 * z * u)
    } else {
        z
    }
}

/// ln(e^a + e^b).
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// ln(sum_i e^{x_i}) with max-subtraction.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// ln(1 + e^x) without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x + (-x).exp()
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}
