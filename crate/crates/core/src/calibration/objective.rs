//! Relative least-squares objective on out-of-the-money quotes.

use crate::error::{PricingError, Result};
use crate::market_data::{MarketSlice, SliceContext};
use crate::models::ModelParams;

/// One out-of-the-money market price used in the fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtmQuote {
    pub strike: f64,
    pub price: f64,
    pub is_put: bool,
}

/// Puts at `K <= F`, calls above; quotes without a positive price on the
/// relevant side are skipped.
pub fn otm_quotes(slice: &MarketSlice) -> Vec<OtmQuote> {
    slice
        .quotes
        .iter()
        .filter_map(|q| {
            let is_put = q.strike <= slice.forward;
            let price = if is_put { q.put_price } else { q.call_price }?;
            (price > 0.0).then_some(OtmQuote {
                strike: q.strike,
                price,
                is_put,
            })
        })
        .collect()
}

fn model_price(model: &ModelParams, ctx: &SliceContext, q: &OtmQuote) -> Result<f64> {
    if q.is_put {
        model.put(ctx, q.strike)
    } else {
        model.call(ctx, q.strike)
    }
}

/// `((mkt - mod)/(mkt + mod))^2`, symmetric in its arguments.
#[inline]
pub fn relative_term(market: f64, model: f64) -> f64 {
    let r = (market - model) / (market + model);
    r * r
}

/// `E^2` summed over the out-of-the-money quotes of `slice`.
pub fn objective_e2(model: &ModelParams, slice: &MarketSlice) -> Result<f64> {
    let ctx = slice.context();
    let mut total = 0.0;
    for q in otm_quotes(slice) {
        let m = model_price(model, &ctx, &q)?;
        if !(m > 0.0) {
            return Err(PricingError::domain(
                q.strike,
                format!("model price {m} is not positive"),
            ));
        }
        total += relative_term(q.price, m);
    }
    Ok(total)
}

/// Optimiser variant: a failed or zero model price scores the maximal 1.
pub(crate) fn objective_lenient(model: &ModelParams, ctx: &SliceContext, quotes: &[OtmQuote]) -> f64 {
    quotes
        .iter()
        .map(|q| match model_price(model, ctx, q) {
            Ok(m) if m > 0.0 => relative_term(q.price, m),
            _ => 1.0,
        })
        .sum()
}
