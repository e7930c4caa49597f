//! Per-maturity calibration and term-structure interpolation of parameters.

pub mod nelder_mead;
pub mod objective;
pub mod term_structure;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};
use crate::market_data::{MarketSlice, OptionQuote, SliceContext};
use crate::models::{BaseParams, HexParams, ModelParams, SabrParams, SlnParams};
use crate::normal;
use nelder_mead::{minimize, NelderMeadOptions};
use objective::{objective_lenient, otm_quotes, OtmQuote};

pub use objective::objective_e2;
pub use term_structure::{build_term_structure, interpolate_params, Interpolated, Knot, TermStructure};

/// SABR correlation is kept inside this bound during fits.
pub const RHO_BOUND: f64 = 0.99;

pub const INIT_Q: f64 = -2.0;
pub const INIT_RHO: f64 = -0.7;
pub const INIT_NU: f64 = 1.0;

/// Base model under HEX tails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BaseKind {
    Sln,
    Sabr { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelKind {
    Sln,
    /// `beta: None` fits beta as a fourth parameter.
    Sabr { beta: Option<f64> },
    Hex { base: BaseKind },
}

impl ModelKind {
    /// Fewest usable quotes accepted for a fit.
    pub fn min_quotes(&self) -> usize {
        match self {
            ModelKind::Sln => 4,
            ModelKind::Sabr { .. } => 8,
            ModelKind::Hex { .. } => 12,
        }
    }

    fn base_kind(base: BaseKind) -> ModelKind {
        match base {
            BaseKind::Sln => ModelKind::Sln,
            BaseKind::Sabr { beta } => ModelKind::Sabr { beta: Some(beta) },
        }
    }
}

impl FromStr for ModelKind {
    type Err = PricingError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sln" => ModelKind::Sln,
            "sabr" => ModelKind::Sabr { beta: None },
            "sabr0" => ModelKind::Sabr { beta: Some(0.0) },
            "sabr1" => ModelKind::Sabr { beta: Some(1.0) },
            "hex" | "hex-sln" => ModelKind::Hex { base: BaseKind::Sln },
            "hex-sabr0" => ModelKind::Hex {
                base: BaseKind::Sabr { beta: 0.0 },
            },
            "hex-sabr1" => ModelKind::Hex {
                base: BaseKind::Sabr { beta: 1.0 },
            },
            other => {
                return Err(PricingError::Config(format!(
                    "unknown model '{other}' (expected sln, sabr, sabr0, sabr1, hex, hex-sabr0, hex-sabr1)"
                )))
            }
        })
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::Sln => "sln".to_string(),
            ModelKind::Sabr { beta: None } => "sabr".to_string(),
            ModelKind::Sabr { beta: Some(b) } if *b == 0.0 => "sabr0".to_string(),
            ModelKind::Sabr { beta: Some(b) } if *b == 1.0 => "sabr1".to_string(),
            ModelKind::Sabr { beta: Some(b) } => format!("sabr(beta={b})"),
            ModelKind::Hex { base: BaseKind::Sln } => "hex".to_string(),
            ModelKind::Hex {
                base: BaseKind::Sabr { beta },
            } => format!("hex-sabr{beta}"),
        };
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ModelParams,
    /// `E^2` at `params`.
    pub objective: f64,
    pub n_quotes: usize,
    pub converged: bool,
    pub iterations: usize,
    /// `E^2` at the starting point.
    pub initial_objective: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CalibrationOptions {
    pub nelder_mead: NelderMeadOptions,
    /// Jittered starting points, the given or default one included.
    pub starts: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            nelder_mead: NelderMeadOptions::default(),
            starts: 3,
        }
    }
}

/// Normal ATM volatility implied by the quote nearest the forward, by
/// inverting the Bachelier price.
pub fn atm_normal_vol(slice: &MarketSlice) -> Option<f64> {
    let quotes = otm_quotes(slice);
    let ctx = slice.context();
    let q = quotes.iter().min_by(|a, b| {
        (a.strike - ctx.forward)
            .abs()
            .total_cmp(&(b.strike - ctx.forward).abs())
    })?;
    let x = ctx.moneyness(q.strike);
    let target = q.price / (ctx.scale() * ctx.forward);
    let price = |s: f64| {
        if q.is_put {
            normal::bachelier_put(x, s)
        } else {
            normal::bachelier_put(-x, s)
        }
    };
    let (mut lo, mut hi) = (1e-8, 10.0);
    if !(price(lo) <= target && target <= price(hi)) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if price(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Fit `kind` to the out-of-the-money quotes of `slice`.
pub fn calibrate(slice: &MarketSlice, kind: ModelKind, init: Option<&ModelParams>) -> Result<FitResult> {
    calibrate_with(slice, kind, init, &CalibrationOptions::default())
}

pub fn calibrate_with(
    slice: &MarketSlice,
    kind: ModelKind,
    init: Option<&ModelParams>,
    opts: &CalibrationOptions,
) -> Result<FitResult> {
    slice.validate()?;
    let quotes = otm_quotes(slice);
    let required = kind.min_quotes();
    if quotes.len() < required {
        return Err(PricingError::InsufficientQuotes {
            required,
            available: quotes.len(),
        });
    }
    let ctx = slice.context();
    let sigma0 = atm_normal_vol(slice).unwrap_or(0.2 * ctx.t.sqrt());

    match kind {
        ModelKind::Hex { base } => {
            let base_init = match init {
                Some(ModelParams::Hex(h)) => Some(ModelParams::from(h.base)),
                other => other.copied(),
            };
            let stage1 = fit_base(&ctx, &quotes, ModelKind::base_kind(base), base_init.as_ref(), sigma0, opts)?;
            let base_params = match stage1.params {
                ModelParams::Sln(p) => BaseParams::Sln(p),
                ModelParams::Sabr(p) => BaseParams::Sabr(p),
                ModelParams::Hex(_) => unreachable!("base fit returns a base model"),
            };
            let mut tails = fit_tails(&ctx, &quotes, base_params, init, opts)?;
            tails.iterations += stage1.iterations;
            tails.initial_objective = stage1.initial_objective;
            Ok(tails)
        }
        _ => fit_base(&ctx, &quotes, kind, init, sigma0, opts),
    }
}

/// Maps unconstrained optimiser coordinates to parameters and back.
trait Coords {
    fn decode(&self, u: &[f64]) -> Option<ModelParams>;
    fn encode(&self, p: &ModelParams) -> Option<Vec<f64>>;
    fn steps(&self) -> Vec<f64>;
}

struct SlnCoords;

impl Coords for SlnCoords {
    fn decode(&self, u: &[f64]) -> Option<ModelParams> {
        SlnParams::new(u[0].exp(), u[1]).ok().map(ModelParams::Sln)
    }
    fn encode(&self, p: &ModelParams) -> Option<Vec<f64>> {
        match p {
            ModelParams::Sln(p) => Some(vec![p.sigma_bar.ln(), p.q]),
            _ => None,
        }
    }
    fn steps(&self) -> Vec<f64> {
        vec![0.3, 1.0]
    }
}

struct SabrCoords {
    beta: Option<f64>,
}

impl Coords for SabrCoords {
    fn decode(&self, u: &[f64]) -> Option<ModelParams> {
        let beta = self.beta.unwrap_or_else(|| u[3].clamp(0.0, 1.0));
        SabrParams::new(u[0].exp(), u[1].clamp(-RHO_BOUND, RHO_BOUND), u[2].exp(), beta)
            .ok()
            .map(ModelParams::Sabr)
    }
    fn encode(&self, p: &ModelParams) -> Option<Vec<f64>> {
        match p {
            ModelParams::Sabr(p) => {
                let mut v = vec![
                    p.sigma1.ln(),
                    p.rho.clamp(-RHO_BOUND, RHO_BOUND),
                    p.nu.max(1e-8).ln(),
                ];
                if self.beta.is_none() {
                    v.push(p.beta);
                }
                Some(v)
            }
            _ => None,
        }
    }
    fn steps(&self) -> Vec<f64> {
        let mut s = vec![0.3, 0.3, 0.5];
        if self.beta.is_none() {
            s.push(0.3);
        }
        s
    }
}

struct TailCoords {
    base: BaseParams,
    pi_atm: f64,
}

impl Coords for TailCoords {
    fn decode(&self, u: &[f64]) -> Option<ModelParams> {
        let h = HexParams {
            base: self.base,
            theta_left: [u[0], u[1], u[2]],
            theta_right: [u[3], u[4], u[5]],
            a: u[6].exp(),
            pi_atm: self.pi_atm,
        };
        h.validate().ok().map(|_| ModelParams::Hex(h))
    }
    fn encode(&self, p: &ModelParams) -> Option<Vec<f64>> {
        match p {
            ModelParams::Hex(h) => {
                let mut v: Vec<f64> = h.theta_left.iter().chain(h.theta_right.iter()).copied().collect();
                v.push(h.a.ln());
                Some(v)
            }
            _ => None,
        }
    }
    fn steps(&self) -> Vec<f64> {
        vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]
    }
}

/// Deterministic jitter of start `i > 0`: alternate half-steps per coordinate.
fn jittered(x0: &[f64], steps: &[f64], i: usize) -> Vec<f64> {
    x0.iter()
        .zip(steps)
        .enumerate()
        .map(|(j, (x, s))| {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            x + sign * 0.5 * s
        })
        .collect()
}

fn run_fit(
    coords: &dyn Coords,
    ctx: &SliceContext,
    quotes: &[OtmQuote],
    x0: Vec<f64>,
    opts: &CalibrationOptions,
) -> Result<FitResult> {
    let score = |u: &[f64]| match coords.decode(u) {
        Some(m) => objective_lenient(&m, ctx, quotes),
        None => 1e6,
    };
    let steps = coords.steps();
    let initial_objective = score(&x0);

    let mut best: Option<nelder_mead::NelderMeadResult> = None;
    let mut iterations = 0;
    for i in 0..opts.starts.max(1) {
        let start = if i == 0 { x0.clone() } else { jittered(&x0, &steps, i) };
        let r = minimize(score, &start, &steps, &opts.nelder_mead);
        iterations += r.iterations;
        if best.as_ref().is_none_or(|b| r.fx < b.fx) {
            best = Some(r);
        }
    }
    let mut best = best.expect("at least one start");
    // Restart from the best point with a fresh, smaller simplex until it stops
    // improving; plain Nelder-Mead can stall on a collapsed simplex.
    let small: Vec<f64> = steps.iter().map(|s| 0.1 * s).collect();
    for _ in 0..20 {
        let r = minimize(score, &best.x, &small, &opts.nelder_mead);
        iterations += r.iterations;
        let gain = best.fx - r.fx;
        let done = opts.nelder_mead.settled(gain, r.fx.min(best.fx));
        if r.fx <= best.fx {
            best = r;
        }
        if done {
            break;
        }
    }
    if best.fx > initial_objective {
        // never report a point worse than the start
        best.x = x0;
        best.fx = initial_objective;
    }
    let params = coords
        .decode(&best.x)
        .ok_or_else(|| PricingError::InvalidParameter("optimiser left the parameter domain".into()))?;
    Ok(FitResult {
        params,
        objective: best.fx,
        n_quotes: quotes.len(),
        converged: best.converged,
        iterations,
        initial_objective,
    })
}

fn fit_base(
    ctx: &SliceContext,
    quotes: &[OtmQuote],
    kind: ModelKind,
    init: Option<&ModelParams>,
    sigma0: f64,
    opts: &CalibrationOptions,
) -> Result<FitResult> {
    match kind {
        ModelKind::Sln => {
            let c = SlnCoords;
            let x0 = init
                .and_then(|p| c.encode(p))
                .unwrap_or_else(|| vec![sigma0.ln(), INIT_Q]);
            run_fit(&c, ctx, quotes, x0, opts)
        }
        ModelKind::Sabr { beta } => {
            let c = SabrCoords { beta };
            let x0 = init.and_then(|p| c.encode(p)).unwrap_or_else(|| {
                let mut v = vec![sigma0.ln(), INIT_RHO, INIT_NU.ln()];
                if beta.is_none() {
                    v.push(0.5);
                }
                v
            });
            run_fit(&c, ctx, quotes, x0, opts)
        }
        ModelKind::Hex { .. } => Err(PricingError::Config("HEX is not a base model".into())),
    }
}

fn fit_tails(
    ctx: &SliceContext,
    quotes: &[OtmQuote],
    base: BaseParams,
    init: Option<&ModelParams>,
    opts: &CalibrationOptions,
) -> Result<FitResult> {
    let h0 = HexParams::from_base(base, ctx.forward, ctx.t)?;
    let c = TailCoords {
        base,
        pi_atm: h0.pi_atm,
    };
    let x0 = match init {
        Some(ModelParams::Hex(h)) => c.encode(&ModelParams::Hex(HexParams { base, pi_atm: h0.pi_atm, ..*h })),
        _ => None,
    }
    .unwrap_or_else(|| c.encode(&ModelParams::Hex(h0)).expect("hex coordinates"));
    run_fit(&c, ctx, quotes, x0, opts)
}

/// Quotes generated by `model`: both sides at every strike where the model is
/// defined.
pub fn synthetic_slice(
    model: &ModelParams,
    pricing_date: NaiveDate,
    maturity_days: u32,
    forward: f64,
    discount: f64,
    volume: f64,
    strikes: &[f64],
) -> Result<MarketSlice> {
    let t = f64::from(maturity_days) / crate::market_data::DAYS_PER_YEAR;
    let ctx = SliceContext::new(forward, discount, volume, t);
    let quotes = strikes
        .iter()
        .filter_map(|&k| {
            let c = model.call(&ctx, k).ok()?;
            let p = model.put(&ctx, k).ok()?;
            Some(OptionQuote::new(k, Some(c), Some(p)))
        })
        .collect();
    MarketSlice::with_days(pricing_date, maturity_days, forward, discount, volume, quotes)
}

/// Evenly spaced strikes `F (1 + x)` for `x` in `[lo, hi]`.
pub fn moneyness_strikes(forward: f64, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| forward * (1.0 + lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .collect()
}
