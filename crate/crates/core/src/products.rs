//! Bonus certificates and barrier reverse convertibles.
//!
//! All prices are assembled in forward terms and multiplied by `D V`:
//!
//! ```text
//! EBC   K  - (K-B) p                 + Call(K) - Put(B)
//! ABC   K  - (K-B)(2 + delta) p      + Call(K)
//! EBRC  C0 - (C0-B) p                - Put(B)
//! ABRC  C0 - (C0-B)(2 + delta) p
//! ```
//!
//! with `C0 = S0 + R` and `p = P(S_T <= B)`. The American forms drop paths
//! that touch the barrier and still finish above the strike; that remainder
//! can be supplied as `epsilon` and is then subtracted as its own term.

use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};
use crate::market_data::SliceContext;
use crate::models::{Density, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProductKind {
    BonusCertificate,
    BarrierReverseConvertible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BarrierStyle {
    European,
    American,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductSpec {
    pub kind: ProductKind,
    pub barrier_style: BarrierStyle,
    #[serde(rename = "S0")]
    pub s0: f64,
    #[serde(rename = "B")]
    pub b: f64,
    /// Bonus strike, certificates only.
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    /// Coupon in price units, reverse convertibles only.
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Maturity in years.
    #[serde(rename = "T")]
    pub t: f64,
}

impl ProductSpec {
    pub fn bonus(style: BarrierStyle, s0: f64, b: f64, k: f64, t: f64) -> Result<Self> {
        let s = Self {
            kind: ProductKind::BonusCertificate,
            barrier_style: style,
            s0,
            b,
            k: Some(k),
            r: None,
            t,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn reverse_convertible(style: BarrierStyle, s0: f64, b: f64, r: f64, t: f64) -> Result<Self> {
        let s = Self {
            kind: ProductKind::BarrierReverseConvertible,
            barrier_style: style,
            s0,
            b,
            k: None,
            r: Some(r),
            t,
        };
        s.validate()?;
        Ok(s)
    }

    /// The level the barrier term is measured against: `K` or `C0 = S0 + R`.
    pub fn reference_level(&self) -> f64 {
        match self.kind {
            ProductKind::BonusCertificate => self.k.unwrap_or(f64::NAN),
            ProductKind::BarrierReverseConvertible => self.s0 + self.r.unwrap_or(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PricingError::Validation(m));
        if !(self.t.is_finite() && self.t > 0.0) {
            return bad(format!("maturity must be positive, got {}", self.t));
        }
        if !(self.b > 0.0 && self.b < self.s0) {
            return bad(format!("need 0 < B < S0, got B = {}, S0 = {}", self.b, self.s0));
        }
        match self.kind {
            ProductKind::BonusCertificate => {
                let Some(k) = self.k else {
                    return bad("bonus certificate needs a strike K".into());
                };
                if k < self.s0 {
                    return bad(format!("need K >= S0, got K = {k}, S0 = {}", self.s0));
                }
                if self.r.is_some() {
                    return bad("bonus certificate takes no coupon R".into());
                }
            }
            ProductKind::BarrierReverseConvertible => {
                let Some(r) = self.r else {
                    return bad("reverse convertible needs a coupon R".into());
                };
                if r < 0.0 {
                    return bad(format!("coupon must be non-negative, got {r}"));
                }
                if self.b > 0.75 * (self.s0 + r) {
                    return bad(format!(
                        "need B <= 3/4 (S0 + R) = {}, got B = {}",
                        0.75 * (self.s0 + r),
                        self.b
                    ));
                }
                if self.k.is_some() {
                    return bad("reverse convertible takes no strike K".into());
                }
            }
        }
        Ok(())
    }
}

/// Forward-measure quantities a price is assembled from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricingInputs {
    pub p_h_minus: f64,
    /// Undiscounted `Call(K)`; unused for reverse convertibles.
    pub call_k: f64,
    /// Undiscounted `Put(B)`.
    pub put_b: f64,
    /// Breach-and-recover ratio, American styles only.
    pub delta: f64,
    /// Hit-and-finish-above remainder, undiscounted.
    pub epsilon: Option<f64>,
    /// One-year ATM volatility for the separation check.
    pub sigma_atm_1y: Option<f64>,
    pub ctx: SliceContext,
}

impl PricingInputs {
    /// `p` from the density, option prices from the model.
    pub fn from_model(
        spec: &ProductSpec,
        model: &ModelParams,
        ctx: &SliceContext,
        density: &Density,
    ) -> Result<Self> {
        spec.validate()?;
        let call_k = match spec.kind {
            ProductKind::BonusCertificate => model.forward_call_extended(ctx, spec.reference_level())?,
            ProductKind::BarrierReverseConvertible => 0.0,
        };
        let atm = model.forward_put_extended(ctx, ctx.forward)?;
        Ok(Self {
            p_h_minus: p_h_minus(density, spec.b),
            call_k,
            put_b: model.forward_put_extended(ctx, spec.b)?,
            delta: 0.0,
            epsilon: None,
            sigma_atm_1y: Some(atm * (2.0 * std::f64::consts::PI).sqrt() / ctx.forward / ctx.t.sqrt()),
            ctx: *ctx,
        })
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_epsilon(mut self, epsilon: Option<f64>) -> Self {
        self.epsilon = epsilon;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_h_minus) {
            return Err(PricingError::Validation(format!(
                "p_h_minus must lie in [0, 1], got {}",
                self.p_h_minus
            )));
        }
        if !(self.call_k >= 0.0 && self.put_b >= 0.0) {
            return Err(PricingError::Validation(format!(
                "option inputs must be non-negative, got Call(K) = {}, Put(B) = {}",
                self.call_k, self.put_b
            )));
        }
        if !self.delta.is_finite() {
            return Err(PricingError::Validation("delta must be finite".into()));
        }
        self.ctx.validate()
    }
}

/// Price terms, each already multiplied by `D V`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    /// `K` or `C0`.
    pub leading: f64,
    /// `-(K-B) p`, doubled for American styles.
    pub barrier: f64,
    /// `-delta (K-B) p`, the only path-dependent term.
    pub delta_correction: f64,
    /// `Call(K) - Put(B)`, `Call(K)`, `-Put(B)` or zero.
    pub option: f64,
    /// `-epsilon` when supplied.
    pub epsilon: f64,
}

impl Breakdown {
    pub fn sum(&self) -> f64 {
        self.leading + self.barrier + self.delta_correction + self.option + self.epsilon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceReport {
    pub price: f64,
    pub terms: Breakdown,
    pub warnings: Vec<String>,
}

/// `p_H- = P(S_T <= B)` read off the density; 0 below the grid.
pub fn p_h_minus(density: &Density, b: f64) -> f64 {
    density.cdf_at(b).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `1.5 (K-B)/K >= sigma sqrt(T)`; the strike is `C0` for reverse convertibles.
pub fn validate_separation(spec: &ProductSpec, sigma_atm_1y: f64) -> Result<Separation> {
    if !(sigma_atm_1y > 0.0) {
        return Err(PricingError::Validation(format!(
            "ATM volatility must be positive, got {sigma_atm_1y}"
        )));
    }
    let k = spec.reference_level();
    let lhs = 1.5 * (k - spec.b) / k;
    let rhs = sigma_atm_1y * spec.t.sqrt();
    Ok(Separation {
        lhs,
        rhs,
        pass: lhs >= rhs,
    })
}

fn check_kind(spec: &ProductSpec, kind: ProductKind, style: BarrierStyle) -> Result<()> {
    spec.validate()?;
    if spec.kind != kind || spec.barrier_style != style {
        return Err(PricingError::Validation(format!(
            "expected {style:?} {kind:?}, got {:?} {:?}",
            spec.barrier_style, spec.kind
        )));
    }
    Ok(())
}

fn assemble(terms: Breakdown, warnings: Vec<String>) -> PriceReport {
    PriceReport {
        price: terms.sum(),
        terms,
        warnings,
    }
}

fn separation_warnings(spec: &ProductSpec, inputs: &PricingInputs, out: &mut Vec<String>) {
    if let Some(sigma) = inputs.sigma_atm_1y {
        if let Ok(s) = validate_separation(spec, sigma) {
            if !s.pass {
                out.push(format!(
                    "barrier too close to strike for the breach-and-recover approximation: \
                     1.5 (K-B)/K = {:.4} < sigma sqrt(T) = {:.4}",
                    s.lhs, s.rhs
                ));
            }
        }
    }
}

fn epsilon_term(inputs: &PricingInputs, dv: f64, spec: &ProductSpec, out: &mut Vec<String>) -> f64 {
    let Some(eps) = inputs.epsilon else {
        return 0.0;
    };
    let additive = -dv * eps;
    match spec.kind {
        ProductKind::BonusCertificate => out.push(format!(
            "epsilon applied additively ({additive:.6}); read as a factor on Call(K) it would \
             contribute {:.6}",
            -dv * inputs.call_k * eps / spec.s0
        )),
        ProductKind::BarrierReverseConvertible => {
            out.push(format!("epsilon applied additively ({additive:.6})"))
        }
    }
    additive
}

pub fn price_ebc(spec: &ProductSpec, inputs: &PricingInputs) -> Result<PriceReport> {
    check_kind(spec, ProductKind::BonusCertificate, BarrierStyle::European)?;
    inputs.validate()?;
    let dv = inputs.ctx.scale();
    let k = spec.reference_level();
    let terms = Breakdown {
        leading: dv * k,
        barrier: -dv * (k - spec.b) * inputs.p_h_minus,
        delta_correction: 0.0,
        option: dv * (inputs.call_k - inputs.put_b),
        epsilon: 0.0,
    };
    Ok(assemble(terms, Vec::new()))
}

pub fn price_abc(spec: &ProductSpec, inputs: &PricingInputs) -> Result<PriceReport> {
    check_kind(spec, ProductKind::BonusCertificate, BarrierStyle::American)?;
    inputs.validate()?;
    let dv = inputs.ctx.scale();
    let k = spec.reference_level();
    let gap = (k - spec.b) * inputs.p_h_minus;
    let mut warnings = Vec::new();
    separation_warnings(spec, inputs, &mut warnings);
    let terms = Breakdown {
        leading: dv * k,
        barrier: -2.0 * dv * gap,
        delta_correction: -dv * inputs.delta * gap,
        option: dv * inputs.call_k,
        epsilon: epsilon_term(inputs, dv, spec, &mut warnings),
    };
    Ok(assemble(terms, warnings))
}

pub fn price_ebrc(spec: &ProductSpec, inputs: &PricingInputs) -> Result<PriceReport> {
    check_kind(spec, ProductKind::BarrierReverseConvertible, BarrierStyle::European)?;
    inputs.validate()?;
    let dv = inputs.ctx.scale();
    let c0 = spec.reference_level();
    let terms = Breakdown {
        leading: dv * c0,
        barrier: -dv * (c0 - spec.b) * inputs.p_h_minus,
        delta_correction: 0.0,
        option: -dv * inputs.put_b,
        epsilon: 0.0,
    };
    Ok(assemble(terms, Vec::new()))
}

pub fn price_abrc(spec: &ProductSpec, inputs: &PricingInputs) -> Result<PriceReport> {
    check_kind(spec, ProductKind::BarrierReverseConvertible, BarrierStyle::American)?;
    inputs.validate()?;
    let dv = inputs.ctx.scale();
    let c0 = spec.reference_level();
    let gap = (c0 - spec.b) * inputs.p_h_minus;
    let mut warnings = Vec::new();
    separation_warnings(spec, inputs, &mut warnings);
    let terms = Breakdown {
        leading: dv * c0,
        barrier: -2.0 * dv * gap,
        delta_correction: -dv * inputs.delta * gap,
        option: 0.0,
        epsilon: epsilon_term(inputs, dv, spec, &mut warnings),
    };
    Ok(assemble(terms, warnings))
}

/// Dispatch on kind and style.
pub fn price(spec: &ProductSpec, inputs: &PricingInputs) -> Result<PriceReport> {
    match (spec.kind, spec.barrier_style) {
        (ProductKind::BonusCertificate, BarrierStyle::European) => price_ebc(spec, inputs),
        (ProductKind::BonusCertificate, BarrierStyle::American) => price_abc(spec, inputs),
        (ProductKind::BarrierReverseConvertible, BarrierStyle::European) => price_ebrc(spec, inputs),
        (ProductKind::BarrierReverseConvertible, BarrierStyle::American) => price_abrc(spec, inputs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{density_from_model, sln_cdf, GridSpec, SlnParams};

    fn unit_inputs(p: f64, call_k: f64, put_b: f64) -> PricingInputs {
        PricingInputs {
            p_h_minus: p,
            call_k,
            put_b,
            delta: 0.0,
            epsilon: None,
            sigma_atm_1y: None,
            ctx: SliceContext::undiscounted(100.0, 1.0),
        }
    }

    #[test]
    fn no_breach_limits() {
        let ebc = ProductSpec::bonus(BarrierStyle::European, 100.0, 70.0, 110.0, 1.0).unwrap();
        let r = price_ebc(&ebc, &unit_inputs(0.0, 4.0, 0.0)).unwrap();
        assert_eq!(r.price, 114.0);
        let abc = ProductSpec { barrier_style: BarrierStyle::American, ..ebc };
        assert_eq!(price_abc(&abc, &unit_inputs(0.0, 4.0, 0.0)).unwrap().price, 114.0);
        let ebrc = ProductSpec::reverse_convertible(BarrierStyle::European, 100.0, 70.0, 8.0, 1.0).unwrap();
        assert_eq!(price_ebrc(&ebrc, &unit_inputs(0.0, 0.0, 0.0)).unwrap().price, 108.0);
        let abrc = ProductSpec { barrier_style: BarrierStyle::American, ..ebrc };
        assert_eq!(price_abrc(&abrc, &unit_inputs(0.0, 0.0, 0.0)).unwrap().price, 108.0);
    }

    #[test]
    fn breakdown_matches_formula() {
        let abc = ProductSpec::bonus(BarrierStyle::American, 100.0, 70.0, 105.0, 2.0).unwrap();
        let mut i = unit_inputs(0.12, 6.5, 1.1).with_delta(0.2);
        i.ctx = SliceContext::new(101.0, 0.96, 1.0, 2.0);
        let r = price_abc(&abc, &i).unwrap();
        let by_hand = 0.96 * (105.0 - 35.0 * 2.2 * 0.12 + 6.5);
        assert!((r.price - by_hand).abs() < 1e-12);
        assert!((r.terms.sum() - r.price).abs() < 1e-12);
        assert!((r.terms.delta_correction + 0.96 * 0.2 * 35.0 * 0.12).abs() < 1e-12);
    }

    #[test]
    fn epsilon_reports_both_readings() {
        let abc = ProductSpec::bonus(BarrierStyle::American, 100.0, 70.0, 100.0, 1.0).unwrap();
        let i = unit_inputs(0.1, 8.0, 0.5).with_epsilon(Some(0.05));
        let r = price_abc(&abc, &i).unwrap();
        assert_eq!(r.terms.epsilon, -0.05);
        assert!(r.warnings.iter().any(|w| w.contains("additively") && w.contains("factor")));
    }

    #[test]
    fn separation_examples() {
        let s = ProductSpec::bonus(BarrierStyle::American, 100.0, 70.0, 105.0, 2.0).unwrap();
        let v = validate_separation(&s, 0.20).unwrap();
        assert!((v.lhs - 0.5).abs() < 1e-15 && (v.rhs - 0.2 * 2f64.sqrt()).abs() < 1e-15);
        assert!(v.pass);
        let s = ProductSpec::bonus(BarrierStyle::American, 100.0, 90.0, 100.0, 1.0).unwrap();
        let v = validate_separation(&s, 0.30).unwrap();
        assert!((v.lhs - 0.15).abs() < 1e-15 && !v.pass);
        let mut s = s;
        s.b = 100.0;
        assert!(!validate_separation(&s, 0.01).unwrap().pass);
    }

    #[test]
    fn spec_invariants_enforced() {
        assert!(ProductSpec::bonus(BarrierStyle::European, 100.0, 70.0, 95.0, 1.0).is_err());
        assert!(ProductSpec::bonus(BarrierStyle::European, 100.0, 120.0, 130.0, 1.0).is_err());
        assert!(ProductSpec::reverse_convertible(BarrierStyle::European, 100.0, 80.0, 0.0, 1.0).is_err());
        let s = ProductSpec::reverse_convertible(BarrierStyle::European, 100.0, 75.0, 0.0, 1.0).unwrap();
        assert!(price_abrc(&s, &unit_inputs(0.1, 0.0, 0.1)).is_err());
    }

    #[test]
    fn p_h_minus_against_closed_form_cdf() {
        let p = SlnParams::new(0.25, -3.0).unwrap();
        let m = ModelParams::Sln(p);
        let ctx = SliceContext::undiscounted(100.0, 1.0);
        let d = density_from_model(&m, &ctx, &GridSpec::default()).unwrap();
        let want = sln_cdf(&p, 100.0, 70.0).unwrap();
        assert!((p_h_minus(&d, 70.0) - want).abs() < 1e-6);
        assert_eq!(p_h_minus(&d, 1.0), 0.0);
    }

    #[test]
    fn json_field_names() {
        let s = ProductSpec::bonus(BarrierStyle::American, 100.0, 70.0, 105.0, 2.0).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"S0\"") && j.contains("\"K\"") && !j.contains("\"R\""));
        let back: ProductSpec = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }
}
