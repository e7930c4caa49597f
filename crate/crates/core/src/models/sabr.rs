//! SABR through the Hagan normal-volatility expansion.
//!
//! `sigma_N = sigma1 * xi / H(xi)` with
//! `xi = (nu sqrt(T) / sigma1) * ((1+x)^(1-beta) - 1) / (1-beta)` (log for beta = 1)
//! and `H(xi) = -ln((sqrt(1 + 2 rho xi + xi^2) - xi - rho) / (1 - rho))`.
//! Prices are Bachelier at `sigma_N`.

use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};
use crate::normal;

pub const XI_SERIES_THRESHOLD: f64 = 1e-6;
/// Relative step for the `d sigma_N / dK` central difference.
pub const FD_REL_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SabrParams {
    pub sigma1: f64,
    pub rho: f64,
    pub nu: f64,
    pub beta: f64,
}

impl SabrParams {
    pub fn new(sigma1: f64, rho: f64, nu: f64, beta: f64) -> Result<Self> {
        let p = Self {
            sigma1,
            rho,
            nu,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PricingError::InvalidParameter(m));
        if !(self.sigma1.is_finite() && self.sigma1 > 0.0) {
            return bad(format!("sigma1 must be positive, got {}", self.sigma1));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [-1, 1], got {}", self.rho));
        }
        if !(self.nu.is_finite() && self.nu >= 0.0) {
            return bad(format!("nu must be non-negative, got {}", self.nu));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        Ok(())
    }

    /// `((1+x)^(1-beta) - 1) / (1-beta)`, continuous through beta = 1.
    fn backbone(&self, x: f64, strike: f64) -> Result<f64> {
        if self.beta == 0.0 {
            return Ok(x);
        }
        if x <= -1.0 {
            return Err(PricingError::domain(
                strike,
                format!("non-positive strike with beta = {}", self.beta),
            ));
        }
        let l = x.ln_1p();
        let e = 1.0 - self.beta;
        if e * l.abs() < 1e-12 {
            Ok(l * (1.0 + 0.5 * e * l))
        } else {
            Ok((e * l).exp_m1() / e)
        }
    }

    pub fn xi(&self, x: f64, t: f64, strike: f64) -> Result<f64> {
        Ok(self.nu * t.sqrt() / self.sigma1 * self.backbone(x, strike)?)
    }

    /// Open upper support bound in moneyness, present only for `rho = -1` where
    /// `H` is defined for `xi < 1` only.
    pub fn upper_x(&self, t: f64) -> Option<f64> {
        if self.rho > -1.0 || self.nu == 0.0 {
            return None;
        }
        let c = self.sigma1 / (self.nu * t.sqrt());
        let e = 1.0 - self.beta;
        Some(if self.beta == 0.0 {
            c
        } else if e < 1e-12 {
            c.exp_m1()
        } else {
            (1.0 + e * c).powf(1.0 / e) - 1.0
        })
    }

    /// Lower support bound in moneyness; the backbone needs `K > 0` when beta > 0.
    pub fn lower_x(&self) -> Option<f64> {
        (self.beta > 0.0).then_some(-1.0)
    }
}

/// Ratio `xi / H(xi)`.
pub fn xi_over_h(xi: f64, rho: f64, strike: f64) -> Result<f64> {
    if xi.abs() < XI_SERIES_THRESHOLD {
        return Ok(1.0 + 0.5 * rho * xi + (2.0 - 3.0 * rho * rho) * xi * xi / 12.0);
    }
    let root = (1.0 + 2.0 * rho * xi + xi * xi).sqrt();
    // root - 1 without cancellation
    let root_m1 = (2.0 * rho * xi + xi * xi) / (root + 1.0);
    // (root + xi + rho)(root - xi - rho) = 1 - rho^2; take the larger factor
    // relative to its value at xi = 0 and expand around it.
    let h = if xi + rho >= 0.0 {
        if 1.0 + rho <= 0.0 {
            f64::NAN
        } else {
            ((root_m1 + xi) / (1.0 + rho)).ln_1p()
        }
    } else if 1.0 - rho <= 0.0 {
        f64::NAN
    } else {
        -((root_m1 - xi) / (1.0 - rho)).ln_1p()
    };
    let r = xi / h;
    if !(r.is_finite() && r > 0.0) {
        return Err(PricingError::domain(
            strike,
            format!("H(xi) undefined for xi = {xi}, rho = {rho}"),
        ));
    }
    Ok(r)
}

/// Normal volatility at moneyness `x`.
pub fn sabr_vol_x(p: &SabrParams, x: f64, t: f64, strike: f64) -> Result<f64> {
    if p.nu == 0.0 {
        return Ok(p.sigma1);
    }
    let xi = p.xi(x, t, strike)?;
    Ok(p.sigma1 * xi_over_h(xi, p.rho, strike)?)
}

pub fn sabr_vol(p: &SabrParams, f: f64, k: f64, t: f64) -> Result<f64> {
    sabr_vol_x(p, (k - f) / f, t, k)
}

pub fn sabr_put(p: &SabrParams, f: f64, k: f64, t: f64, d: f64, v: f64) -> Result<f64> {
    let x = (k - f) / f;
    let s = sabr_vol_x(p, x, t, k)?;
    let unit = if x > 0.0 {
        normal::bachelier_put(-x, s) + x
    } else {
        normal::bachelier_put(x, s)
    };
    Ok(d * v * f * unit)
}

pub fn sabr_call(p: &SabrParams, f: f64, k: f64, t: f64, d: f64, v: f64) -> Result<f64> {
    let x = (k - f) / f;
    let s = sabr_vol_x(p, x, t, k)?;
    let unit = if x > 0.0 {
        normal::bachelier_put(-x, s)
    } else {
        normal::bachelier_put(x, s) - x
    };
    Ok(d * v * f * unit)
}

/// `N(x/sigma_N) + phi(x/sigma_N) * d sigma_N/dx`, clamped to [0, 1].
pub fn sabr_cdf(p: &SabrParams, f: f64, k: f64, t: f64) -> Result<f64> {
    let x = (k - f) / f;
    let s = sabr_vol_x(p, x, t, k)?;
    let h = FD_REL_STEP;
    let slope = if p.nu == 0.0 {
        0.0
    } else {
        let up = sabr_vol_x(p, x + h, t, k + h * f)?;
        let dn = sabr_vol_x(p, x - h, t, k - h * f)?;
        (up - dn) / (2.0 * h)
    };
    let z = x / s;
    Ok((normal::cdf(z) + normal::pdf(z) * slope).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atm_vol_is_sigma1() {
        let p = SabrParams::new(0.05, -0.85, 2.37, 1.0).unwrap();
        assert_eq!(sabr_vol(&p, 100.0, 100.0, 0.1).unwrap(), 0.05);
    }

    #[test]
    fn xi_closed_forms() {
        let p0 = SabrParams::new(0.1, -0.5, 0.8, 0.0).unwrap();
        let t: f64 = 0.5;
        let x = -0.2;
        let want = x * 0.8 * t.sqrt() / 0.1;
        assert!((p0.xi(x, t, 80.0).unwrap() - want).abs() < 1e-15);

        let p1 = SabrParams { beta: 1.0, ..p0 };
        let want = (1.0f64 + x).ln() * 0.8 * t.sqrt() / 0.1;
        assert!((p1.xi(x, t, 80.0).unwrap() - want).abs() < 1e-15);

        // beta close to one joins the log form continuously
        let pn = SabrParams {
            beta: 1.0 - 1e-9,
            ..p0
        };
        assert!((pn.xi(x, t, 80.0).unwrap() - want).abs() < 1e-8);
    }

    #[test]
    fn series_joins_closed_form() {
        for &rho in &[-0.99, -0.5, 0.0, 0.7] {
            let a = xi_over_h(0.999e-6, rho, 1.0).unwrap();
            let b = xi_over_h(1.001e-6, rho, 1.0).unwrap();
            assert!((a - b).abs() < 1e-9, "rho {rho}: {a} {b}");
            let a = xi_over_h(-0.999e-6, rho, 1.0).unwrap();
            let b = xi_over_h(-1.001e-6, rho, 1.0).unwrap();
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn negative_rho_gives_negative_skew() {
        let p = SabrParams::new(0.1, -0.7, 1.0, 0.0).unwrap();
        let lo = sabr_vol(&p, 100.0, 80.0, 1.0).unwrap();
        let hi = sabr_vol(&p, 100.0, 120.0, 1.0).unwrap();
        assert!(lo > 0.1 && hi < 0.1);
    }

    #[test]
    fn perfect_correlation_domain() {
        // rho = -1: H(xi) = -ln(1 - xi), undefined from xi = 1 on
        let p = SabrParams::new(0.1, -1.0, 1.0, 0.0).unwrap();
        let xi = 0.5;
        let want = xi / -(1.0f64 - xi).ln();
        assert!((xi_over_h(xi, -1.0, 1.0).unwrap() - want).abs() < 1e-14);
        assert!(sabr_vol(&p, 100.0, 111.0, 1.0).unwrap_err().is_domain());
        assert!((p.upper_x(1.0).unwrap() - 0.1).abs() < 1e-15);
        let p = SabrParams::new(0.1, 1.0, 1.0, 0.0).unwrap();
        assert!(sabr_vol(&p, 100.0, 89.0, 1.0).unwrap_err().is_domain());
    }

    #[test]
    fn zero_vol_of_vol_is_bachelier() {
        let p = SabrParams::new(0.12, -0.6, 0.0, 1.0).unwrap();
        for &k in &[70.0, 100.0, 140.0] {
            let x = (k - 100.0) / 100.0;
            let want = 100.0 * normal::bachelier_put(x, 0.12);
            assert!((sabr_put(&p, 100.0, k, 2.0, 1.0, 1.0).unwrap() - want).abs() < 1e-12);
        }
        assert!((sabr_cdf(&p, 100.0, 100.0, 2.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn deep_itm_put_tends_to_intrinsic() {
        let p = SabrParams::new(0.05, -0.3, 0.5, 0.0).unwrap();
        let put = sabr_put(&p, 100.0, 200.0, 0.25, 0.95, 1.0).unwrap();
        assert!((put - 95.0).abs() < 1e-9);
    }

    #[test]
    fn cdf_matches_put_slope() {
        let p = SabrParams::new(0.0508, -0.85, 2.37, 1.0).unwrap();
        let t = 32.0 / 365.0;
        let h = 1e-4 * 100.0;
        for &k in &[85.0, 95.0, 100.0, 103.0, 110.0] {
            let fd = (sabr_put(&p, 100.0, k + h, t, 1.0, 1.0).unwrap()
                - sabr_put(&p, 100.0, k - h, t, 1.0, 1.0).unwrap())
                / (2.0 * h);
            let cdf = sabr_cdf(&p, 100.0, k, t).unwrap();
            assert!((cdf - fd).abs() < 1e-5, "{k}: {cdf} vs {fd}");
        }
    }

    #[test]
    fn strong_skew_cdf_monotone() {
        let p = SabrParams::new(0.1464, -0.99, 0.58, 1.0).unwrap();
        let t = 228.0 / 365.0;
        let mut prev = 0.0;
        for i in 0..=200 {
            let k = 50.0 + i as f64 * 0.5;
            let c = sabr_cdf(&p, 100.0, k, t).unwrap();
            assert!(c >= prev - 1e-12, "{k}: {c} < {prev}");
            prev = c;
        }
    }

    #[test]
    fn parity() {
        let p = SabrParams::new(0.08, -0.4, 1.2, 0.5).unwrap();
        for &k in &[60.0, 100.0, 150.0] {
            let c = sabr_call(&p, 100.0, k, 0.7, 0.98, 1.0).unwrap();
            let q = sabr_put(&p, 100.0, k, 0.7, 0.98, 1.0).unwrap();
            let fwd = 0.98 * (100.0 - k);
            assert!((c - q - fwd).abs() <= 1e-12 * fwd.abs().max(c));
        }
    }
}
