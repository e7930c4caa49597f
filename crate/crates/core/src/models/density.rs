//! Risk-neutral densities by finite differences of model prices.

use serde::{Deserialize, Serialize};

use super::ModelParams;
use crate::error::{PricingError, Result};
use crate::market_data::SliceContext;

/// Relative finite-difference step, `h = 1e-4 F`.
pub const FD_REL_STEP: f64 = 1e-4;
/// Most negative `F * pdf` accepted as rounding noise.
pub const PDF_TOLERANCE: f64 = 1e-8;

/// Uniform strike grid `[lo F, hi F]` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lo: 0.05,
            hi: 3.0,
            n: 2001,
        }
    }
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n }
    }

    /// Widen the default bounds until the model mass outside the grid falls
    /// below `tol` on each side (or the support edge is reached).
    pub fn covering(model: &ModelParams, ctx: &SliceContext, tol: f64, n: usize) -> Result<Self> {
        let f = ctx.forward;
        let (slo, shi) = model.support(ctx);
        let mut g = GridSpec { n, ..Self::default() };
        for _ in 0..400 {
            if let Some(l) = slo {
                if g.lo * f <= l {
                    g.lo = l / f;
                    break;
                }
            }
            if model.cdf_extended(ctx, g.lo * f)? < tol {
                break;
            }
            g.lo -= 0.25;
        }
        for _ in 0..400 {
            if let Some(u) = shi {
                if g.hi * f >= u {
                    g.hi = u / f;
                    break;
                }
            }
            if 1.0 - model.cdf_extended(ctx, g.hi * f)? < tol {
                break;
            }
            g.hi += 0.5;
        }
        // keep at least the default span
        g.hi = g.hi.max(3.0);
        g.lo = g.lo.min(0.2);
        Ok(g)
    }

    pub fn strikes(&self, forward: f64) -> Vec<f64> {
        let a = self.lo * forward;
        let step = (self.hi - self.lo) * forward / (self.n - 1) as f64;
        (0..self.n).map(|i| a + i as f64 * step).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(PricingError::Config(format!(
                "density grid needs at least 3 points, got {}",
                self.n
            )));
        }
        if !(self.lo <= 0.2 && self.hi >= 3.0 && self.lo < self.hi) {
            return Err(PricingError::Config(format!(
                "density grid [{}F, {}F] must span [0.2F, 3F]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

/// Terminal density of the underlying on a strike grid.
///
/// Mass and first moment outside the grid are kept from the endpoint prices,
/// so `total_mass` and `mean` account for tails the grid does not cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub grid: Vec<f64>,
    pub pdf: Vec<f64>,
    pub cdf: Vec<f64>,
    pub forward: f64,
    pub below_mass: f64,
    pub below_moment: f64,
    pub above_mass: f64,
    pub above_moment: f64,
}

impl Density {
    /// Trapezoid integral of the pdf over the grid.
    pub fn grid_mass(&self) -> f64 {
        trapezoid(&self.grid, |i| self.pdf[i])
    }

    pub fn grid_moment(&self) -> f64 {
        trapezoid(&self.grid, |i| self.grid[i] * self.pdf[i])
    }

    pub fn total_mass(&self) -> f64 {
        self.below_mass + self.grid_mass() + self.above_mass
    }

    pub fn mean(&self) -> f64 {
        self.below_moment + self.grid_moment() + self.above_moment
    }

    /// Linear interpolation of the CDF; 0 below the grid and 1 above it.
    pub fn cdf_at(&self, k: f64) -> f64 {
        interp(&self.grid, &self.cdf, k, 0.0, 1.0)
    }

    pub fn pdf_at(&self, k: f64) -> f64 {
        interp(&self.grid, &self.pdf, k, 0.0, 0.0)
    }
}

fn trapezoid(grid: &[f64], g: impl Fn(usize) -> f64) -> f64 {
    (1..grid.len())
        .map(|i| 0.5 * (grid[i] - grid[i - 1]) * (g(i) + g(i - 1)))
        .sum()
}

fn interp(xs: &[f64], ys: &[f64], x: f64, below: f64, above: f64) -> f64 {
    let n = xs.len();
    if x < xs[0] {
        return below;
    }
    if x > xs[n - 1] {
        return above;
    }
    let j = xs.partition_point(|&g| g <= x).clamp(1, n - 1);
    let w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    ys[j - 1] + w * (ys[j] - ys[j - 1])
}

/// Second-difference density: from puts at `K <= F`, from calls above.
pub fn density_from_model(
    model: &ModelParams,
    ctx: &SliceContext,
    grid: &GridSpec,
) -> Result<Density> {
    grid.validate()?;
    density_on_strikes(model, ctx, grid.strikes(ctx.forward))
}

/// Same construction on arbitrary ascending strikes, e.g. a grid with nodes
/// placed exactly on payoff kinks.
pub fn density_on_strikes(model: &ModelParams, ctx: &SliceContext, strikes: Vec<f64>) -> Result<Density> {
    ctx.validate()?;
    if strikes.len() < 3 || strikes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(PricingError::Config(
            "density strikes must be at least 3 strictly ascending values".into(),
        ));
    }
    let f = ctx.forward;
    let h = FD_REL_STEP * f;
    let mut pdf = Vec::with_capacity(strikes.len());
    let mut cdf = Vec::with_capacity(strikes.len());
    for &k in &strikes {
        let price = |s: f64| {
            if k <= f {
                model.forward_put_extended(ctx, s)
            } else {
                model.forward_call_extended(ctx, s)
            }
        };
        let (dn, mid, up) = (price(k - h)?, price(k)?, price(k + h)?);
        pdf.push((up - 2.0 * mid + dn) / (h * h));
        let slope = (up - dn) / (2.0 * h);
        cdf.push(if k <= f { slope } else { 1.0 + slope });
    }

    if let Some((lo, hi)) = first_run(&strikes, |i| f * pdf[i] < -PDF_TOLERANCE) {
        let worst = pdf.iter().cloned().fold(f64::INFINITY, f64::min);
        return Err(PricingError::Admissibility {
            lo,
            hi,
            message: format!("negative density (F*pdf down to {:.3e})", f * worst),
        });
    }
    if let Some((lo, hi)) = first_run(&strikes, |i| {
        !(-PDF_TOLERANCE..=1.0 + PDF_TOLERANCE).contains(&cdf[i])
    }) {
        return Err(PricingError::Admissibility {
            lo,
            hi,
            message: "cdf leaves [0, 1]".into(),
        });
    }
    if let Some((lo, hi)) = first_run(&strikes, |i| i > 0 && cdf[i] < cdf[i - 1] - PDF_TOLERANCE) {
        return Err(PricingError::Admissibility {
            lo,
            hi,
            message: "cdf decreasing".into(),
        });
    }
    // Remaining violations are rounding noise.
    let mut running = 0.0f64;
    for c in cdf.iter_mut() {
        running = running.max(c.clamp(0.0, 1.0));
        *c = running;
    }
    for p in pdf.iter_mut() {
        *p = p.max(0.0);
    }

    let (k0, kn) = (strikes[0], strikes[strikes.len() - 1]);
    let below_mass = cdf[0];
    let below_moment = k0 * below_mass - model.forward_put_extended(ctx, k0)?;
    let above_mass = 1.0 - cdf[cdf.len() - 1];
    let above_moment = kn * above_mass + model.forward_call_extended(ctx, kn)?;
    Ok(Density {
        grid: strikes,
        pdf,
        cdf,
        forward: f,
        below_mass,
        below_moment,
        above_mass,
        above_moment,
    })
}

/// Strike span of the first contiguous run of flagged grid points.
fn first_run(strikes: &[f64], flag: impl Fn(usize) -> bool) -> Option<(f64, f64)> {
    let start = (0..strikes.len()).find(|&i| flag(i))?;
    let end = (start..strikes.len())
        .take_while(|&i| flag(i))
        .last()
        .unwrap_or(start);
    Some((strikes[start], strikes[end]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{sln_pdf, HexParams, SabrParams, SlnParams};

    fn sln() -> (ModelParams, SlnParams) {
        let p = SlnParams::new(0.1464, -3.16).unwrap();
        (ModelParams::Sln(p), p)
    }

    #[test]
    fn sln_matches_closed_form_pdf() {
        let (m, p) = sln();
        let ctx = SliceContext::new(100.0, 0.98, 1.0, 228.0 / 365.0);
        let d = density_from_model(&m, &ctx, &GridSpec::default()).unwrap();
        let bound = 100.0 * (1.0 + 1.0 / 3.16);
        let mut worst = 0.0f64;
        for (k, v) in d.grid.iter().zip(&d.pdf) {
            let exact = if *k >= bound { 0.0 } else { sln_pdf(&p, 100.0, *k).unwrap() };
            worst = worst.max(100.0 * (exact - v).abs());
        }
        assert!(worst < 1e-5, "sup error {worst}");
    }

    #[test]
    fn mass_and_mean_include_tails() {
        let (m, _) = sln();
        let ctx = SliceContext::undiscounted(100.0, 228.0 / 365.0);
        let d = density_from_model(&m, &ctx, &GridSpec::default()).unwrap();
        assert!(d.below_mass > 1e-4, "left tail beyond 0.05F is not negligible");
        assert!((d.total_mass() - 1.0).abs() < 1e-4);
        assert!((d.mean() - 100.0).abs() < 1e-4 * 100.0);
    }

    #[test]
    fn covering_grid_holds_mass() {
        let (m, _) = sln();
        let ctx = SliceContext::undiscounted(100.0, 228.0 / 365.0);
        let g = GridSpec::covering(&m, &ctx, 1e-7, 4001).unwrap();
        assert!(g.lo < 0.05);
        let d = density_from_model(&m, &ctx, &g).unwrap();
        assert!((d.grid_mass() - 1.0).abs() < 1e-4);
        assert!((d.grid_moment() - 100.0).abs() < 1e-2);
    }

    #[test]
    fn sabr_density_admissible() {
        let m = ModelParams::Sabr(SabrParams::new(0.15, -0.4, 0.6, 0.0).unwrap());
        let ctx = SliceContext::undiscounted(100.0, 0.5);
        let d = density_from_model(&m, &ctx, &GridSpec::default()).unwrap();
        assert!(d.cdf.windows(2).all(|w| w[1] >= w[0]));
        assert!((d.total_mass() - 1.0).abs() < 1e-4);
        assert!((d.mean() - 100.0).abs() < 1e-2);
    }

    #[test]
    fn short_dated_hagan_wing_is_flagged() {
        // The expansion loses admissibility far in the put wing of a steep
        // one-month smile; the builder must say where rather than clip.
        let m = ModelParams::Sabr(SabrParams::new(0.0508, -0.85, 2.37, 1.0).unwrap());
        let ctx = SliceContext::undiscounted(100.0, 32.0 / 365.0);
        match density_from_model(&m, &ctx, &GridSpec::default()) {
            Err(PricingError::Admissibility { lo, hi, .. }) => assert!(lo < hi && hi < 100.0),
            other => panic!("expected admissibility error, got {other:?}"),
        }
    }

    #[test]
    fn aggressive_tails_rejected() {
        let (m, p) = sln();
        let ctx = SliceContext::undiscounted(100.0, 228.0 / 365.0);
        let _ = m;
        let mut h = HexParams::from_base(crate::models::BaseParams::Sln(p), 100.0, ctx.t).unwrap();
        h.theta_left = [0.0, 0.0, 400.0];
        let err = density_from_model(&ModelParams::Hex(h), &ctx, &GridSpec::default()).unwrap_err();
        match err {
            PricingError::Admissibility { lo, hi, .. } => assert!(lo <= hi && hi < 100.0),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn narrow_grid_rejected() {
        let (m, _) = sln();
        let ctx = SliceContext::undiscounted(100.0, 0.5);
        assert!(density_from_model(&m, &ctx, &GridSpec::new(0.5, 3.0, 101)).is_err());
    }

    #[test]
    fn cdf_interpolation_edges() {
        let (m, _) = sln();
        let ctx = SliceContext::undiscounted(100.0, 0.5);
        let d = density_from_model(&m, &ctx, &GridSpec::default()).unwrap();
        assert_eq!(d.cdf_at(1.0), 0.0);
        assert_eq!(d.cdf_at(1e6), 1.0);
        let k = d.grid[700];
        assert_eq!(d.cdf_at(k), d.cdf[700]);
    }
}
