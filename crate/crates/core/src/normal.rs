//! Standard normal helpers.

use libm::erfc;

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF, accurate in both tails.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[inline]
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Undiscounted Bachelier put in moneyness units: `E[(x - Z*sigma)^+]` with `x = (K-F)/F`.
#[inline]
pub fn bachelier_put(x: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return x.max(0.0);
    }
    let d = x / sigma;
    x * cdf(d) + sigma * pdf(d)
}
