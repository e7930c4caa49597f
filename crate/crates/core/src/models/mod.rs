//! Closed-form smile models and the densities they imply.

pub mod density;
pub mod hex;
pub mod sabr;
pub mod sln;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::market_data::SliceContext;

pub use density::{density_from_model, density_on_strikes, Density, GridSpec};
pub use hex::{hex_call, hex_put, BaseParams, HexParams};
pub use sabr::{sabr_call, sabr_cdf, sabr_put, sabr_vol, SabrParams};
pub use sln::{sln_call, sln_cdf, sln_pdf, sln_put, SlnParams};

/// Calibrated parameters of any supported model, serialized as
/// `{"sln": {...}}`, `{"sabr": {...}}` or `{"hex": {...}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelParams {
    Sln(SlnParams),
    Sabr(SabrParams),
    Hex(HexParams),
}

impl From<BaseParams> for ModelParams {
    fn from(b: BaseParams) -> Self {
        match b {
            BaseParams::Sln(p) => ModelParams::Sln(p),
            BaseParams::Sabr(p) => ModelParams::Sabr(p),
        }
    }
}

impl ModelParams {
    pub fn name(&self) -> &'static str {
        match self {
            ModelParams::Sln(_) => "sln",
            ModelParams::Sabr(_) => "sabr",
            ModelParams::Hex(_) => "hex",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelParams::Sln(p) => p.validate(),
            ModelParams::Sabr(p) => p.validate(),
            ModelParams::Hex(p) => p.validate(),
        }
    }

    pub fn put(&self, ctx: &SliceContext, k: f64) -> Result<f64> {
        let (f, t, d, v) = (ctx.forward, ctx.t, ctx.discount, ctx.volume);
        match self {
            ModelParams::Sln(p) => sln_put(p, f, k, d, v),
            ModelParams::Sabr(p) => sabr_put(p, f, k, t, d, v),
            ModelParams::Hex(p) => hex_put(p, f, k, t, d, v),
        }
    }

    pub fn call(&self, ctx: &SliceContext, k: f64) -> Result<f64> {
        let (f, t, d, v) = (ctx.forward, ctx.t, ctx.discount, ctx.volume);
        match self {
            ModelParams::Sln(p) => sln_call(p, f, k, d, v),
            ModelParams::Sabr(p) => sabr_call(p, f, k, t, d, v),
            ModelParams::Hex(p) => hex_call(p, f, k, t, d, v),
        }
    }

    /// Price of the out-of-the-money option: put for `K <= F`, call above.
    pub fn otm_price(&self, ctx: &SliceContext, k: f64) -> Result<f64> {
        if k <= ctx.forward {
            self.put(ctx, k)
        } else {
            self.call(ctx, k)
        }
    }

    /// `P(S_T <= K)` under the forward measure.
    pub fn cdf(&self, ctx: &SliceContext, k: f64) -> Result<f64> {
        let (f, t) = (ctx.forward, ctx.t);
        match self {
            ModelParams::Sln(p) => sln_cdf(p, f, k),
            ModelParams::Sabr(p) => sabr_cdf(p, f, k, t),
            ModelParams::Hex(p) => {
                let h = sabr::FD_REL_STEP * f;
                let dn = hex_put(p, f, k - h, t, 1.0, 1.0)?;
                let up = hex_put(p, f, k + h, t, 1.0, 1.0)?;
                Ok(((up - dn) / (2.0 * h)).clamp(0.0, 1.0))
            }
        }
    }

    /// Open support bounds in strike space, `None` when unbounded.
    pub fn support(&self, ctx: &SliceContext) -> (Option<f64>, Option<f64>) {
        let (lo, hi) = match self {
            ModelParams::Sln(p) => p.support_x(),
            ModelParams::Sabr(p) => (p.lower_x(), p.upper_x(ctx.t)),
            ModelParams::Hex(p) => p.base.support_x(ctx.t),
        };
        (lo.map(|x| ctx.strike_at(x)), hi.map(|x| ctx.strike_at(x)))
    }

    /// Undiscounted put extended beyond the support by its limits: zero below
    /// the lower bound, intrinsic `K - F` above the upper one.
    pub fn forward_put_extended(&self, ctx: &SliceContext, k: f64) -> Result<f64> {
        let (lo, hi) = self.support(ctx);
        if lo.is_some_and(|l| k <= l) {
            return Ok(0.0);
        }
        if hi.is_some_and(|u| k >= u) {
            return Ok(k - ctx.forward);
        }
        let unit = SliceContext::new(ctx.forward, 1.0, 1.0, ctx.t);
        self.put(&unit, k)
    }

    /// Undiscounted call with the same extension.
    pub fn forward_call_extended(&self, ctx: &SliceContext, k: f64) -> Result<f64> {
        let (lo, hi) = self.support(ctx);
        if lo.is_some_and(|l| k <= l) {
            return Ok(ctx.forward - k);
        }
        if hi.is_some_and(|u| k >= u) {
            return Ok(0.0);
        }
        let unit = SliceContext::new(ctx.forward, 1.0, 1.0, ctx.t);
        self.call(&unit, k)
    }

    /// CDF extended beyond the support by 0 and 1.
    pub fn cdf_extended(&self, ctx: &SliceContext, k: f64) -> Result<f64> {
        let (lo, hi) = self.support(ctx);
        if lo.is_some_and(|l| k <= l) {
            return Ok(0.0);
        }
        if hi.is_some_and(|u| k >= u) {
            return Ok(1.0);
        }
        self.cdf(ctx, k)
    }
}
