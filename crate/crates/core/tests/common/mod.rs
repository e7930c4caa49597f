//! Helpers shared by the integration tests.

use barrier_core::market_data::SliceContext;
use barrier_core::models::{density_on_strikes, Density, GridSpec, ModelParams};
use barrier_core::products::{ProductKind, ProductSpec};

/// Density on a covering grid with extra nodes on the payoff kinks.
pub fn oracle_density(model: &ModelParams, ctx: &SliceContext, kinks: &[f64]) -> barrier_core::Result<Density> {
    let grid = GridSpec::covering(model, ctx, 1e-9, 200_001)?;
    let mut strikes = grid.strikes(ctx.forward);
    let h = 1e-9 * ctx.forward;
    for &k in kinks {
        strikes.retain(|s| (s - k).abs() > h);
        strikes.push(k);
    }
    strikes.sort_by(f64::total_cmp);
    density_on_strikes(model, ctx, strikes)
}

/// `D V E[payoff]`; the payoff is split at the barrier, which is a grid node.
pub fn integrate_payoff(spec: &ProductSpec, d: &Density, ctx: &SliceContext) -> f64 {
    let (b, level) = (spec.b, spec.reference_level());
    let intact = |s: f64| match spec.kind {
        ProductKind::BonusCertificate => s.max(level),
        ProductKind::BarrierReverseConvertible => level,
    };
    let mut sum = d.below_moment;
    for i in 0..d.grid.len() - 1 {
        let (k0, k1) = (d.grid[i], d.grid[i + 1]);
        let g = |s: f64| if k1 <= b { s } else { intact(s) };
        sum += 0.5 * (k1 - k0) * (g(k0) * d.pdf[i] + g(k1) * d.pdf[i + 1]);
    }
    sum += match spec.kind {
        ProductKind::BonusCertificate => d.above_moment,
        ProductKind::BarrierReverseConvertible => level * d.above_mass,
    };
    ctx.scale() * sum
}
