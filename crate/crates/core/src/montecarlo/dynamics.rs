//! Path dynamics of the normalised underlying `X = S/S0`, `X_0 = 1`.
//!
//! * SLN: `dX = sigma_t (1 + q_t (X - 1)) dW`
//! * SABR: `dX = sigma_t X^beta exp(nu V_t - nu^2 t / 2) (rho dV + sqrt(1-rho^2) dW)`

use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};

/// Instantaneous volatility `sigma_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolCurve {
    Flat {
        sigma: f64,
    },
    /// `sigma_A t^alpha`
    Power {
        #[serde(rename = "sigma_A")]
        sigma_a: f64,
        alpha: f64,
    },
}

impl VolCurve {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            VolCurve::Flat { sigma } => sigma,
            VolCurve::Power { sigma_a, alpha } => sigma_a * t.powf(alpha),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            VolCurve::Flat { sigma } => sigma.is_finite() && sigma >= 0.0,
            VolCurve::Power { sigma_a, alpha } => sigma_a.is_finite() && sigma_a > 0.0 && alpha.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(PricingError::InvalidParameter(format!("invalid volatility curve {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    SlnStatic {
        vol: VolCurve,
        q: f64,
    },
    /// `q_t = -|q_B| t^beta_exp`; the magnitude of `q_B` is used whatever its sign.
    SlnDynamic {
        vol: VolCurve,
        #[serde(rename = "q_B")]
        q_b: f64,
        beta_exp: f64,
    },
    Sabr {
        sigma0: f64,
        rho: f64,
        nu: f64,
        beta: f64,
    },
}

/// Default monitoring frequency.
pub const DAILY_STEPS: u32 = 250;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSpec {
    pub dynamics: Dynamics,
    /// Horizon in years.
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(default = "default_steps")]
    pub steps_per_year: u32,
}

fn default_steps() -> u32 {
    DAILY_STEPS
}

impl DynamicsSpec {
    pub fn new(dynamics: Dynamics, t: f64) -> Self {
        Self {
            dynamics,
            t,
            steps_per_year: DAILY_STEPS,
        }
    }

    pub fn with_steps(mut self, steps_per_year: u32) -> Self {
        self.steps_per_year = steps_per_year;
        self
    }

    pub fn n_steps(&self) -> usize {
        ((self.t * f64::from(self.steps_per_year)).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(PricingError::InvalidParameter(format!("horizon must be positive, got {}", self.t)));
        }
        if self.steps_per_year == 0 {
            return Err(PricingError::InvalidParameter("steps_per_year must be positive".into()));
        }
        match self.dynamics {
            Dynamics::SlnStatic { vol, q } => {
                vol.validate()?;
                if !q.is_finite() {
                    return Err(PricingError::InvalidParameter(format!("q must be finite, got {q}")));
                }
            }
            Dynamics::SlnDynamic { vol, q_b, beta_exp } => {
                vol.validate()?;
                if !(q_b.is_finite() && beta_exp.is_finite()) {
                    return Err(PricingError::InvalidParameter("q_B and beta_exp must be finite".into()));
                }
            }
            Dynamics::Sabr { sigma0, rho, nu, beta } => {
                if !(sigma0.is_finite() && sigma0 >= 0.0) {
                    return Err(PricingError::InvalidParameter(format!("sigma0 must be non-negative, got {sigma0}")));
                }
                if !(-1.0..=1.0).contains(&rho) || !(0.0..=1.0).contains(&beta) || !(nu >= 0.0) {
                    return Err(PricingError::InvalidParameter(format!(
                        "SABR needs rho in [-1,1], beta in [0,1], nu >= 0; got rho={rho}, beta={beta}, nu={nu}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_sabr(&self) -> bool {
        matches!(self.dynamics, Dynamics::Sabr { .. })
    }

    /// Per-step coefficients, time-dependent ones taken at the step's right
    /// end `(i+1) dt` so `t = 0` is never evaluated.
    pub(crate) fn grid(&self) -> StepGrid {
        let n = self.n_steps();
        let dt = self.t / n as f64;
        let right = |i: usize| (i + 1) as f64 * dt;
        let (sigma, q): (Vec<f64>, Vec<f64>) = match self.dynamics {
            Dynamics::SlnStatic { vol, q } => (0..n).map(|i| (vol.at(right(i)), q)).unzip(),
            Dynamics::SlnDynamic { vol, q_b, beta_exp } => (0..n)
                .map(|i| (vol.at(right(i)), -q_b.abs() * right(i).powf(beta_exp)))
                .unzip(),
            Dynamics::Sabr { sigma0, .. } => (0..n).map(|_| (sigma0, 0.0)).unzip(),
        };
        StepGrid { dt, sigma, q }
    }
}

pub(crate) struct StepGrid {
    pub dt: f64,
    pub sigma: Vec<f64>,
    pub q: Vec<f64>,
}
