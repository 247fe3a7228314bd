//! Scalar special functions used by the likelihoods and activations.

use statrs::function::erf::erfc;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Below this argument `log Φ` switches from `erfc` to the asymptotic series.
const LOG_NDTR_SERIES_CUTOFF: f64 = -20.0;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn log_norm_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal CDF Φ.
pub fn ndtr(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `log Φ(x)`, finite for every finite `x`.
///
/// `erfc` keeps full relative accuracy down to about -37, but the result
/// underflows there, so the far tail uses the asymptotic Mills-ratio series
/// `log φ(x) - log(-x) + log(1 - 1/x² + 3/x⁴ - 15/x⁶ + 105/x⁸)`.
pub fn log_ndtr(x: f64) -> f64 {
    if x > 6.0 {
        // Φ(x) = 1 - Φ(-x); log1p keeps the tiny complement.
        -ndtr(-x)
    } else if x > LOG_NDTR_SERIES_CUTOFF {
        ndtr(x).ln()
    } else {
        let z = 1.0 / (x * x);
        let series = 1.0 - z * (1.0 - z * (3.0 - z * (15.0 - 105.0 * z)));
        log_norm_pdf(x) - (-x).ln() + series.ln()
    }
}

/// `φ(x) / Φ(x)` evaluated in the log domain.
pub fn mills_ratio_inv(x: f64) -> f64 {
    (log_norm_pdf(x) - log_ndtr(x)).exp()
}

/// Numerically stable `log(1 + exp(x))`.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log Σ exp(v_i)`; `-inf` for an empty slice or all `-inf` entries.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `log((1/n) Σ exp(v_i))`.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + (sum / values.len() as f64).ln()
}
