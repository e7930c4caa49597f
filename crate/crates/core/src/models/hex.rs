//! HEX tail extrapolation on top of an SLN or SABR base.
//!
//! Base prices are mapped to `chi = ln(2^(P/pi_atm) - 1)`, a cubic tail term
//! damped by `exp(-a/x^2)` is added, and the result is mapped back through
//! `P = (pi_atm/ln 2) ln(1 + e^chi)`. The damping makes the correction vanish
//! to all orders at the money.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use super::sabr::{self, SabrParams};
use super::sln::{self, SlnParams};
use crate::error::{PricingError, Result};

/// Base model underneath the HEX tails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseParams {
    Sln(SlnParams),
    Sabr(SabrParams),
}

impl BaseParams {
    pub fn validate(&self) -> Result<()> {
        match self {
            BaseParams::Sln(p) => p.validate(),
            BaseParams::Sabr(p) => p.validate(),
        }
    }

    pub fn put(&self, f: f64, k: f64, t: f64, d: f64, v: f64) -> Result<f64> {
        match self {
            BaseParams::Sln(p) => sln::sln_put(p, f, k, d, v),
            BaseParams::Sabr(p) => sabr::sabr_put(p, f, k, t, d, v),
        }
    }

    pub fn call(&self, f: f64, k: f64, t: f64, d: f64, v: f64) -> Result<f64> {
        match self {
            BaseParams::Sln(p) => sln::sln_call(p, f, k, d, v),
            BaseParams::Sabr(p) => sabr::sabr_call(p, f, k, t, d, v),
        }
    }

    pub fn cdf(&self, f: f64, k: f64, t: f64) -> Result<f64> {
        match self {
            BaseParams::Sln(p) => sln::sln_cdf(p, f, k),
            BaseParams::Sabr(p) => sabr::sabr_cdf(p, f, k, t),
        }
    }

    /// Open support bounds in moneyness.
    pub fn support_x(&self, t: f64) -> (Option<f64>, Option<f64>) {
        match self {
            BaseParams::Sln(p) => p.support_x(),
            BaseParams::Sabr(p) => (p.lower_x(), p.upper_x(t)),
        }
    }

    /// Undiscounted ATM price, the natural `pi_atm`.
    pub fn atm_price(&self, f: f64, t: f64) -> Result<f64> {
        self.put(f, f, t, 1.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HexParams {
    pub base: BaseParams,
    #[serde(rename = "theta_L")]
    pub theta_left: [f64; 3],
    #[serde(rename = "theta_R")]
    pub theta_right: [f64; 3],
    pub a: f64,
    pub pi_atm: f64,
}

/// Initial damping constant.
pub const DEFAULT_DAMPING: f64 = 0.01;

impl HexParams {
    /// Zero tails, `pi_atm` set from the base ATM price.
    pub fn from_base(base: BaseParams, f: f64, t: f64) -> Result<Self> {
        let pi_atm = base.atm_price(f, t)?;
        let p = Self {
            base,
            theta_left: [0.0; 3],
            theta_right: [0.0; 3],
            a: DEFAULT_DAMPING,
            pi_atm,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(PricingError::InvalidParameter(format!(
                "damping constant a must be positive, got {}",
                self.a
            )));
        }
        if !(self.pi_atm.is_finite() && self.pi_atm > 0.0) {
            return Err(PricingError::InvalidParameter(format!(
                "pi_atm must be positive, got {}",
                self.pi_atm
            )));
        }
        if self
            .theta_left
            .iter()
            .chain(self.theta_right.iter())
            .any(|c| !c.is_finite())
        {
            return Err(PricingError::InvalidParameter(
                "tail coefficients must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Damped tail correction at moneyness `x`; exactly zero at `x = 0`.
    pub fn correction(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        let c = if x < 0.0 {
            &self.theta_left
        } else {
            &self.theta_right
        };
        let damp = (-self.a / (x * x)).exp();
        if damp == 0.0 {
            return 0.0;
        }
        x * (c[0] + x * (c[1] + x * c[2])) * damp
    }

    /// `chi_P` on the put wing.
    pub fn chi_put(&self, f: f64, k: f64, t: f64) -> Result<f64> {
        let x = (k - f) / f;
        let base = self.base.put(f, k, t, 1.0, 1.0)?;
        Ok(chi_from_price(base, self.pi_atm, k)? + self.correction(x))
    }

    /// `chi_C` on the call wing; the call is `price_from_chi(-chi_C)`.
    pub fn chi_call(&self, f: f64, k: f64, t: f64) -> Result<f64> {
        let x = (k - f) / f;
        let base = self.base.call(f, k, t, 1.0, 1.0)?;
        Ok(-chi_from_price(base, self.pi_atm, k)? + self.correction(x))
    }

    /// Undiscounted OTM price: put for `K <= F`, call above.
    fn otm(&self, f: f64, k: f64, t: f64) -> Result<f64> {
        if k <= f {
            Ok(price_from_chi(self.chi_put(f, k, t)?, self.pi_atm))
        } else {
            Ok(price_from_chi(-self.chi_call(f, k, t)?, self.pi_atm))
        }
    }
}

/// `ln(2^(p/pi) - 1)`; a zero price maps to `-inf`.
pub fn chi_from_price(price: f64, pi_atm: f64, strike: f64) -> Result<f64> {
    if !(price >= 0.0) {
        return Err(PricingError::domain(
            strike,
            format!("base price {price} is not positive"),
        ));
    }
    let y = price * LN_2 / pi_atm;
    Ok(if y > 30.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    })
}

/// `(pi/ln 2) ln(1 + e^chi)`, the inverse of [`chi_from_price`].
pub fn price_from_chi(chi: f64, pi_atm: f64) -> f64 {
    let softplus = if chi > 0.0 {
        chi + (-chi).exp().ln_1p()
    } else {
        chi.exp().ln_1p()
    };
    pi_atm / LN_2 * softplus
}

pub fn hex_put(p: &HexParams, f: f64, k: f64, t: f64, d: f64, v: f64) -> Result<f64> {
    let otm = p.otm(f, k, t)?;
    let unit = if k <= f { otm } else { otm + (k - f) };
    Ok(d * v * unit)
}

pub fn hex_call(p: &HexParams, f: f64, k: f64, t: f64, d: f64, v: f64) -> Result<f64> {
    let otm = p.otm(f, k, t)?;
    let unit = if k <= f { otm - (k - f) } else { otm };
    Ok(d * v * unit)
}
