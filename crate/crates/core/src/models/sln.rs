//! Shifted log-normal prices.
//!
//! With `x = (K-F)/F`, `s = q * sigma_bar` and
//! `d2 = -ln(1 + q x)/s - s/2`, `d1 = d2 + s`:
//!
//! ```text
//! Call = D V F [ -x N(d2) + (N(d1) - N(d2)) / q ]
//! Put  = D V F [  x N(-d2) + (N(-d2) - N(-d1)) / q ]
//! CDF  = N(-d2)
//! ```
//!
//! For `|s| < 1e-8` the model is Bachelier with normal volatility `sigma_bar * F`,
//! plus the first-order skew term so the switch is continuous to `O(s^2)`.

use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};
use crate::normal;

/// Below this `|q * sigma_bar|` the Bachelier limit is used.
pub const SKEW_SERIES_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlnParams {
    /// Total volatility `sigma_q * sqrt(T - t)`.
    pub sigma_bar: f64,
    pub q: f64,
}

impl SlnParams {
    pub fn new(sigma_bar: f64, q: f64) -> Result<Self> {
        let p = Self { sigma_bar, q };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_bar.is_finite() && self.sigma_bar > 0.0) {
            return Err(PricingError::InvalidParameter(format!(
                "sigma_bar must be positive, got {}",
                self.sigma_bar
            )));
        }
        if !self.q.is_finite() {
            return Err(PricingError::InvalidParameter(format!(
                "q must be finite, got {}",
                self.q
            )));
        }
        Ok(())
    }

    /// `s = q * sigma_bar`
    pub fn skew(&self) -> f64 {
        self.q * self.sigma_bar
    }

    fn is_bachelier(&self) -> bool {
        self.skew().abs() < SKEW_SERIES_THRESHOLD
    }

    /// Open support bounds in moneyness. Negative `q` caps the underlying from
    /// above at `x = 1/|q|`, positive `q` floors it at `x = -1/q`.
    pub fn support_x(&self) -> (Option<f64>, Option<f64>) {
        if self.is_bachelier() {
            (None, None)
        } else if self.q < 0.0 {
            (None, Some(-1.0 / self.q))
        } else {
            (Some(-1.0 / self.q), None)
        }
    }

    /// `(d1, d2)` at moneyness `x`.
    fn d12(&self, x: f64, strike: f64) -> Result<(f64, f64)> {
        let qx = self.q * x;
        if qx <= -1.0 {
            return Err(PricingError::domain(
                strike,
                format!("SLN log argument 1 + q x = {} is not positive", 1.0 + qx),
            ));
        }
        let s = self.skew();
        let d2 = -qx.ln_1p() / s - 0.5 * s;
        Ok((d2 + s, d2))
    }

    /// `d/ds` of the unit put at `s = 0`: `x phi(x/sigma_bar) / 2`.
    fn skew_slope(&self, x: f64) -> f64 {
        0.5 * x * normal::pdf(x / self.sigma_bar)
    }

    /// Undiscounted call in units of F.
    fn unit_call(&self, x: f64, strike: f64) -> Result<f64> {
        if self.is_bachelier() {
            return Ok(normal::bachelier_put(-x, self.sigma_bar) + self.skew() * self.skew_slope(x));
        }
        let (_, d2) = self.d12(x, strike)?;
        Ok(-x * normal::cdf(d2) + normal_mass(d2, self.skew()) / self.q)
    }

    /// Undiscounted put in units of F.
    fn unit_put(&self, x: f64, strike: f64) -> Result<f64> {
        if self.is_bachelier() {
            return Ok(normal::bachelier_put(x, self.sigma_bar) + self.skew() * self.skew_slope(x));
        }
        let (d1, d2) = self.d12(x, strike)?;
        Ok(x * normal::cdf(-d2) + normal_mass(-d1, self.skew()) / self.q)
    }
}

const GL_NODES: [f64; 5] = [
    0.0,
    0.538_469_310_105_683,
    -0.538_469_310_105_683,
    0.906_179_845_938_664,
    -0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// `N(a + w) - N(a)`, without cancellation when the width `w` is small.
pub(crate) fn normal_mass(a: f64, w: f64) -> f64 {
    if w.abs() > 0.02 {
        return normal::cdf(a + w) - normal::cdf(a);
    }
    let mid = a + 0.5 * w;
    let half = 0.5 * w;
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS.iter())
        .map(|(n, wt)| wt * normal::pdf(mid + half * n))
        .sum::<f64>()
        * half
}

/// Call price. The OTM side (`K > F`) is evaluated directly and the ITM side
/// through parity, so `Call - Put = D V (F - K)` holds to rounding.
pub fn sln_call(p: &SlnParams, f: f64, k: f64, d: f64, v: f64) -> Result<f64> {
    let x = (k - f) / f;
    let unit = if x > 0.0 {
        p.unit_call(x, k)?
    } else {
        p.unit_put(x, k)? - x
    };
    Ok(d * v * f * unit)
}

pub fn sln_put(p: &SlnParams, f: f64, k: f64, d: f64, v: f64) -> Result<f64> {
    let x = (k - f) / f;
    let unit = if x > 0.0 {
        p.unit_call(x, k)? + x
    } else {
        p.unit_put(x, k)?
    };
    Ok(d * v * f * unit)
}

/// `P(S_T <= K) = N(-d2)`.
pub fn sln_cdf(p: &SlnParams, f: f64, k: f64) -> Result<f64> {
    let x = (k - f) / f;
    if p.is_bachelier() {
        let z = x / p.sigma_bar;
        return Ok(normal::cdf(z) + 0.5 * p.skew() * normal::pdf(z) * (1.0 - z * z));
    }
    let (_, d2) = p.d12(x, k)?;
    Ok(normal::cdf(-d2))
}

/// Closed-form density `phi(d2) / (F sigma_bar (1 + q x))`.
pub fn sln_pdf(p: &SlnParams, f: f64, k: f64) -> Result<f64> {
    let x = (k - f) / f;
    if p.is_bachelier() {
        let z = x / p.sigma_bar;
        let skew = 0.5 * p.skew() * z * (z * z - 3.0);
        return Ok(normal::pdf(z) * (1.0 + skew) / (f * p.sigma_bar));
    }
    let (_, d2) = p.d12(x, k)?;
    Ok(normal::pdf(d2) / (f * p.sigma_bar * (1.0 + p.q * x)))
}
