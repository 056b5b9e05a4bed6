//! Float helpers backed by `libm`, since `core` has no transcendental functions.

pub(crate) use libm::{ceil, cos, exp, fabs as abs, log as ln, pow as powf, sqrt};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub(crate) fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * exp(-0.5 * x * x)
}

pub(crate) fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

/// `ln Φ(x)`, accurate in the far lower tail where Φ underflows.
pub(crate) fn ln_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        ln(norm_cdf(x))
    } else {
        // Mills-ratio asymptote.
        let x2 = x * x;
        -0.5 * x2 - ln(-x) - LN_SQRT_2PI + ln(1.0 - 1.0 / x2 + 3.0 / (x2 * x2))
    }
}

/// φ(x)/Φ(x), stable for large negative x.
pub(crate) fn inverse_mills(x: f64) -> f64 {
    if x > -30.0 {
        norm_pdf(x) / norm_cdf(x)
    } else {
        let x2 = x * x;
        -x / (1.0 - 1.0 / x2 + 3.0 / (x2 * x2))
    }
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(exp(-x))
    } else {
        libm::log1p(exp(x))
    }
}

pub(crate) fn logit(p: f64) -> f64 {
    ln(p / (1.0 - p))
}
