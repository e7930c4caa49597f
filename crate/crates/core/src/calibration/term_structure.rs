//! Parameters across maturities: a capped-degree least-squares polynomial per
//! coordinate plus linear interpolation of its knot residuals, which keeps the
//! curve exact at the knots and continuous in between.

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

use super::{calibrate_with, moneyness_strikes, CalibrationOptions, FitResult, ModelKind};
use crate::error::{PricingError, Result};
use crate::market_data::{MarketSlice, OptionQuote, SliceContext};
use crate::models::{BaseParams, HexParams, ModelParams, SabrParams, SlnParams};

pub const MAX_DEGREE: usize = 5;

/// Abscissa a coordinate is fitted against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// `ln T`, for total volatilities.
    LogT,
    T,
}

impl Axis {
    fn at(self, t: f64) -> f64 {
        match self {
            Axis::LogT => t.ln(),
            Axis::T => t,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Knot {
    pub ctx: SliceContext,
    pub fit: FitResult,
}

/// Least-squares polynomial in a centred, scaled abscissa with residual
/// correction at the knots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoordinateFit {
    pub axis: Axis,
    pub centre: f64,
    pub half_width: f64,
    /// Coefficients in the scaled variable, lowest degree first.
    pub coefficients: Vec<f64>,
    abscissae: Vec<f64>,
    residuals: Vec<f64>,
}

impl CoordinateFit {
    fn new(axis: Axis, ts: &[f64], ys: &[f64]) -> Result<Self> {
        let us: Vec<f64> = ts.iter().map(|&t| axis.at(t)).collect();
        let (lo, hi) = (us[0], us[us.len() - 1]);
        let centre = 0.5 * (lo + hi);
        let half_width = (0.5 * (hi - lo)).max(f64::MIN_POSITIVE);
        let scaled: Vec<f64> = us.iter().map(|u| (u - centre) / half_width).collect();
        let degree = (ts.len() - 1).min(MAX_DEGREE);
        let coefficients = least_squares_poly(&scaled, ys, degree)?;
        let mut fit = Self {
            axis,
            centre,
            half_width,
            coefficients,
            abscissae: scaled.clone(),
            residuals: Vec::new(),
        };
        fit.residuals = scaled.iter().zip(ys).map(|(&s, &y)| y - fit.poly(s)).collect();
        Ok(fit)
    }

    fn poly(&self, s: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }

    fn residual(&self, s: f64) -> f64 {
        let xs = &self.abscissae;
        let n = xs.len();
        if s <= xs[0] {
            return self.residuals[0];
        }
        if s >= xs[n - 1] {
            return self.residuals[n - 1];
        }
        let j = xs.partition_point(|&x| x <= s).clamp(1, n - 1);
        let w = (s - xs[j - 1]) / (xs[j] - xs[j - 1]);
        self.residuals[j - 1] + w * (self.residuals[j] - self.residuals[j - 1])
    }

    pub fn eval(&self, t: f64) -> f64 {
        let s = (self.axis.at(t) - self.centre) / self.half_width;
        self.poly(s) + self.residual(s)
    }
}

/// Normal equations solved by Gaussian elimination with partial pivoting;
/// the abscissa is scaled to [-1, 1] and the degree is at most 5.
fn least_squares_poly(xs: &[f64], ys: &[f64], degree: usize) -> Result<Vec<f64>> {
    let m = degree + 1;
    let mut a = vec![vec![0.0; m + 1]; m];
    for (&x, &y) in xs.iter().zip(ys) {
        let powers: Vec<f64> = (0..m).map(|k| x.powi(k as i32)).collect();
        for r in 0..m {
            for c in 0..m {
                a[r][c] += powers[r] * powers[c];
            }
            a[r][m] += powers[r] * y;
        }
    }
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() < 1e-300 {
            return Err(PricingError::Validation(
                "singular term-structure fit (repeated maturities?)".into(),
            ));
        }
        a.swap(col, pivot);
        for r in 0..m {
            if r != col {
                let factor = a[r][col] / a[col][col];
                for c in col..=m {
                    a[r][c] -= factor * a[col][c];
                }
            }
        }
    }
    Ok((0..m).map(|r| a[r][m] / a[r][r]).collect())
}

/// Parameter coordinates and their axes, with the model's shape kept alongside.
fn to_coords(p: &ModelParams) -> Vec<(Axis, f64)> {
    fn base(b: &BaseParams) -> Vec<(Axis, f64)> {
        match b {
            BaseParams::Sln(p) => vec![(Axis::LogT, p.sigma_bar.ln()), (Axis::T, p.skew())],
            BaseParams::Sabr(p) => vec![
                (Axis::LogT, p.sigma1.ln()),
                (Axis::T, p.rho),
                (Axis::T, p.nu),
                (Axis::T, p.beta),
            ],
        }
    }
    match p {
        ModelParams::Sln(s) => base(&BaseParams::Sln(*s)),
        ModelParams::Sabr(s) => base(&BaseParams::Sabr(*s)),
        ModelParams::Hex(h) => {
            let mut v = base(&h.base);
            v.extend(h.theta_left.iter().chain(h.theta_right.iter()).map(|&c| (Axis::T, c)));
            v.push((Axis::T, h.a.ln()));
            v
        }
    }
}

fn from_coords(
    shape: &ModelParams,
    v: &[f64],
    ctx: &SliceContext,
    warnings: &mut Vec<String>,
) -> Result<ModelParams> {
    let mut clamp = |name: &str, x: f64, lo: f64, hi: f64| {
        let c = x.clamp(lo, hi);
        if c != x {
            let w = format!("interpolated {name} = {x} left [{lo}, {hi}]; clamped to {c}");
            warn!("{w}");
            warnings.push(w);
        }
        c
    };
    let mut base = |b: &BaseParams, v: &[f64]| -> BaseParams {
        match b {
            BaseParams::Sln(_) => {
                let sigma_bar = v[0].exp();
                BaseParams::Sln(SlnParams {
                    sigma_bar,
                    q: v[1] / sigma_bar,
                })
            }
            BaseParams::Sabr(_) => BaseParams::Sabr(SabrParams {
                sigma1: v[0].exp(),
                rho: clamp("rho", v[1], -1.0, 1.0),
                nu: clamp("nu", v[2], 0.0, f64::INFINITY),
                beta: clamp("beta", v[3], 0.0, 1.0),
            }),
        }
    };
    let out = match shape {
        ModelParams::Sln(s) => ModelParams::from(base(&BaseParams::Sln(*s), v)),
        ModelParams::Sabr(s) => ModelParams::from(base(&BaseParams::Sabr(*s), v)),
        ModelParams::Hex(h) => {
            let n = match h.base {
                BaseParams::Sln(_) => 2,
                BaseParams::Sabr(_) => 4,
            };
            let b = base(&h.base, &v[..n]);
            let t = &v[n..];
            ModelParams::Hex(HexParams {
                base: b,
                theta_left: [t[0], t[1], t[2]],
                theta_right: [t[3], t[4], t[5]],
                a: t[6].exp(),
                pi_atm: b.atm_price(ctx.forward, ctx.t)?,
            })
        }
    };
    out.validate()?;
    Ok(out)
}

fn same_shape(a: &ModelParams, b: &ModelParams) -> bool {
    match (a, b) {
        (ModelParams::Sln(_), ModelParams::Sln(_)) | (ModelParams::Sabr(_), ModelParams::Sabr(_)) => true,
        (ModelParams::Hex(x), ModelParams::Hex(y)) => matches!(
            (x.base, y.base),
            (BaseParams::Sln(_), BaseParams::Sln(_)) | (BaseParams::Sabr(_), BaseParams::Sabr(_))
        ),
        _ => false,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermStructure {
    knots: Vec<Knot>,
    coordinates: Vec<CoordinateFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpolated {
    pub params: ModelParams,
    pub ctx: SliceContext,
    pub warnings: Vec<String>,
}

impl TermStructure {
    /// Knots must share one model shape and have strictly ascending maturities.
    pub fn new(knots: Vec<Knot>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(PricingError::Validation(format!(
                "term structure needs at least 2 maturities, got {}",
                knots.len()
            )));
        }
        for w in knots.windows(2) {
            if w[1].ctx.t <= w[0].ctx.t {
                return Err(PricingError::Validation(format!(
                    "maturities must be strictly ascending: {} follows {}",
                    w[1].ctx.t, w[0].ctx.t
                )));
            }
            if !same_shape(&w[0].fit.params, &w[1].fit.params) {
                return Err(PricingError::Validation(format!(
                    "mixed models in term structure: {} and {}",
                    w[0].fit.params.name(),
                    w[1].fit.params.name()
                )));
            }
        }
        let ts: Vec<f64> = knots.iter().map(|k| k.ctx.t).collect();
        let rows: Vec<Vec<(Axis, f64)>> = knots.iter().map(|k| to_coords(&k.fit.params)).collect();
        let coordinates = (0..rows[0].len())
            .map(|j| {
                let ys: Vec<f64> = rows.iter().map(|r| r[j].1).collect();
                CoordinateFit::new(rows[0][j].0, &ts, &ys)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { knots, coordinates })
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn coordinates(&self) -> &[CoordinateFit] {
        &self.coordinates
    }

    pub fn maturities(&self) -> Vec<f64> {
        self.knots.iter().map(|k| k.ctx.t).collect()
    }

    fn range(&self) -> (f64, f64) {
        (self.knots[0].ctx.t, self.knots[self.knots.len() - 1].ctx.t)
    }

    fn check_range(&self, t: f64, allow_extrapolation: bool) -> Result<()> {
        let (lo, hi) = self.range();
        if !(t > 0.0 && t.is_finite()) {
            return Err(PricingError::Validation(format!("target maturity {t} is not positive")));
        }
        if !allow_extrapolation && (t < lo || t > hi) {
            return Err(PricingError::Validation(format!(
                "target maturity {t} outside calibrated range [{lo}, {hi}]; extrapolation not enabled"
            )));
        }
        Ok(())
    }

    /// Forward linear in `T`, discount log-linear, volume factor linear,
    /// between the bracketing knots.
    pub fn context_at(&self, t: f64) -> SliceContext {
        let n = self.knots.len();
        let j = self.knots.partition_point(|k| k.ctx.t <= t).clamp(1, n - 1);
        let (a, b) = (&self.knots[j - 1].ctx, &self.knots[j].ctx);
        let w = (t - a.t) / (b.t - a.t);
        let lin = |x: f64, y: f64| x + w * (y - x);
        SliceContext::new(
            lin(a.forward, b.forward),
            lin(a.discount.ln(), b.discount.ln()).exp(),
            lin(a.volume, b.volume),
            t,
        )
    }

    pub fn interpolate(&self, t: f64, allow_extrapolation: bool) -> Result<Interpolated> {
        self.check_range(t, allow_extrapolation)?;
        if let Some(k) = self.knots.iter().find(|k| k.ctx.t == t) {
            return Ok(Interpolated {
                params: k.fit.params,
                ctx: k.ctx,
                warnings: Vec::new(),
            });
        }
        let ctx = self.context_at(t);
        let values: Vec<f64> = self.coordinates.iter().map(|c| c.eval(t)).collect();
        let mut warnings = Vec::new();
        let (lo, hi) = self.range();
        if t < lo || t > hi {
            warnings.push(format!("extrapolating parameters to T = {t} outside [{lo}, {hi}]"));
        }
        let params = from_coords(&self.knots[0].fit.params, &values, &ctx, &mut warnings)?;
        Ok(Interpolated { params, ctx, warnings })
    }

    /// Price-space alternative: model prices of the two bracketing maturities
    /// are interpolated linearly in `T` on a moneyness grid and `kind` is
    /// recalibrated to them.
    pub fn bracket_by_prices(&self, target_days: u32, kind: ModelKind) -> Result<(FitResult, SliceContext)> {
        let t = f64::from(target_days) / crate::market_data::DAYS_PER_YEAR;
        self.check_range(t, false)?;
        let n = self.knots.len();
        let j = self.knots.partition_point(|k| k.ctx.t <= t).clamp(1, n - 1);
        let (a, b) = (&self.knots[j - 1], &self.knots[j]);
        let w = (t - a.ctx.t) / (b.ctx.t - a.ctx.t);
        let ctx = self.context_at(t);
        let xs = moneyness_strikes(1.0, -0.5, 0.5, 41);
        let otm = |knot: &Knot, k_rel: f64| -> Option<f64> {
            let c = SliceContext::new(1.0, 1.0, 1.0, knot.ctx.t);
            knot.fit.params.otm_price(&c, k_rel).ok()
        };
        let mut quotes = Vec::new();
        for &k_rel in &xs {
            let (Some(pa), Some(pb)) = (otm(a, k_rel), otm(b, k_rel)) else {
                continue;
            };
            let unit = pa + w * (pb - pa);
            let price = unit * ctx.forward * ctx.scale();
            let strike = k_rel * ctx.forward;
            let q = if strike <= ctx.forward {
                OptionQuote::new(strike, None, Some(price))
            } else {
                OptionQuote::new(strike, Some(price), None)
            };
            quotes.push(q);
        }
        let date = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        let slice = MarketSlice::with_days(date, target_days, ctx.forward, ctx.discount, ctx.volume, quotes)?;
        let init = if w < 0.5 { a.fit.params } else { b.fit.params };
        let fit = calibrate_with(&slice, kind, Some(&init), &CalibrationOptions::default())?;
        Ok((fit, slice.context()))
    }
}

/// Parameters at `target_t` inside the calibrated range.
pub fn interpolate_params(ts: &TermStructure, target_t: f64) -> Result<ModelParams> {
    Ok(ts.interpolate(target_t, false)?.params)
}

/// Calibrate every slice (in parallel) and assemble the term structure.
pub fn build_term_structure(slices: &[MarketSlice], kind: ModelKind) -> Result<TermStructure> {
    use rayon::prelude::*;
    let knots = slices
        .par_iter()
        .map(|s| {
            Ok(Knot {
                ctx: s.context(),
                fit: calibrate_with(s, kind, None, &CalibrationOptions::default())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TermStructure::new(knots)
}
