//! Option chains, forwards and discount factors for one pricing date.
//!
//! The on-disk format is a headed CSV with one row per (maturity, strike):
//!
//! ```text
//! maturity_days,strike,call_price,put_price,forward,discount
//! 228,1600,412.5,18.25,1995.0,0.998
//! ```
//!
//! Empty cells mean "absent". A missing forward falls back to the configured
//! spot, a missing discount to 1.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};

pub const DAYS_PER_YEAR: f64 = 365.0;

pub const CSV_HEADER: [&str; 6] = [
    "maturity_days",
    "strike",
    "call_price",
    "put_price",
    "forward",
    "discount",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub strike: f64,
    pub call_price: Option<f64>,
    pub put_price: Option<f64>,
}

impl OptionQuote {
    pub fn new(strike: f64, call_price: Option<f64>, put_price: Option<f64>) -> Self {
        Self {
            strike,
            call_price,
            put_price,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return Err(PricingError::Validation(format!(
                "strike must be positive and finite, got {}",
                self.strike
            )));
        }
        for (side, price) in [("call", self.call_price), ("put", self.put_price)] {
            if let Some(p) = price {
                if !(p.is_finite() && p >= 0.0) {
                    return Err(PricingError::Validation(format!(
                        "{side} price at strike {} must be finite and >= 0, got {p}",
                        self.strike
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Forward-measure context shared by every strike of one maturity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceContext {
    pub forward: f64,
    pub discount: f64,
    pub volume: f64,
    /// Time to maturity in years.
    pub t: f64,
}

impl SliceContext {
    pub fn new(forward: f64, discount: f64, volume: f64, t: f64) -> Self {
        Self {
            forward,
            discount,
            volume,
            t,
        }
    }

    /// Unit discount and volume factor, the simplification used throughout the
    /// product formulas.
    pub fn undiscounted(forward: f64, t: f64) -> Self {
        Self::new(forward, 1.0, 1.0, t)
    }

    /// `x = (K - F) / F`
    #[inline]
    pub fn moneyness(&self, strike: f64) -> f64 {
        (strike - self.forward) / self.forward
    }

    #[inline]
    pub fn strike_at(&self, x: f64) -> f64 {
        self.forward * (1.0 + x)
    }

    /// `D * V`, the factor applied to forward-measure expectations.
    #[inline]
    pub fn scale(&self) -> f64 {
        self.discount * self.volume
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.forward.is_finite() && self.forward > 0.0) {
            return Err(PricingError::Validation(format!(
                "forward must be positive, got {}",
                self.forward
            )));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(PricingError::Validation(format!(
                "discount must lie in (0, 1], got {}",
                self.discount
            )));
        }
        if !(self.volume.is_finite() && self.volume > 0.0) {
            return Err(PricingError::Validation(format!(
                "volume factor must be positive, got {}",
                self.volume
            )));
        }
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(PricingError::Validation(format!(
                "time to maturity must be positive, got {}",
                self.t
            )));
        }
        Ok(())
    }
}

/// Observed option prices for one maturity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSlice {
    pub pricing_date: NaiveDate,
    pub maturity_date: NaiveDate,
    /// ACT/365 year fraction.
    pub time_to_maturity: f64,
    pub forward: f64,
    pub discount: f64,
    pub volume: f64,
    pub quotes: Vec<OptionQuote>,
}

impl MarketSlice {
    pub fn new(
        pricing_date: NaiveDate,
        maturity_date: NaiveDate,
        forward: f64,
        discount: f64,
        volume: f64,
        quotes: Vec<OptionQuote>,
    ) -> Result<Self> {
        let days = (maturity_date - pricing_date).num_days();
        let slice = Self {
            pricing_date,
            maturity_date,
            time_to_maturity: days as f64 / DAYS_PER_YEAR,
            forward,
            discount,
            volume,
            quotes,
        };
        slice.validate()?;
        Ok(slice)
    }

    /// Builds a slice `maturity_days` after `pricing_date`.
    pub fn with_days(
        pricing_date: NaiveDate,
        maturity_days: u32,
        forward: f64,
        discount: f64,
        volume: f64,
        quotes: Vec<OptionQuote>,
    ) -> Result<Self> {
        let maturity = pricing_date + Duration::days(i64::from(maturity_days));
        Self::new(pricing_date, maturity, forward, discount, volume, quotes)
    }

    pub fn maturity_days(&self) -> i64 {
        (self.maturity_date - self.pricing_date).num_days()
    }

    pub fn context(&self) -> SliceContext {
        SliceContext::new(self.forward, self.discount, self.volume, self.time_to_maturity)
    }

    pub fn validate(&self) -> Result<()> {
        if self.maturity_date <= self.pricing_date {
            return Err(PricingError::Validation(format!(
                "maturity {} is not after pricing date {}",
                self.maturity_date, self.pricing_date
            )));
        }
        self.context().validate()?;
        for q in &self.quotes {
            q.validate()?;
        }
        for pair in self.quotes.windows(2) {
            if pair[1].strike <= pair[0].strike {
                return Err(PricingError::Validation(format!(
                    "strikes must be strictly ascending in maturity {}: {} follows {}",
                    self.maturity_date, pair[1].strike, pair[0].strike
                )));
            }
        }
        Ok(())
    }
}

/// `(strike - F) / F`
pub fn moneyness(slice: &MarketSlice, strike: f64) -> f64 {
    (strike - slice.forward) / slice.forward
}

/// All maturities of one underlying on one pricing date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    slices: Vec<MarketSlice>,
}

impl Surface {
    pub fn new(slices: Vec<MarketSlice>) -> Result<Self> {
        for s in &slices {
            s.validate()?;
        }
        if let Some(first) = slices.first() {
            if slices.iter().any(|s| s.pricing_date != first.pricing_date) {
                return Err(PricingError::Validation(
                    "all slices must share one pricing date".into(),
                ));
            }
        }
        for pair in slices.windows(2) {
            if pair[1].maturity_date <= pair[0].maturity_date {
                return Err(PricingError::Validation(format!(
                    "maturities must be strictly ascending: {} follows {}",
                    pair[1].maturity_date, pair[0].maturity_date
                )));
            }
        }
        Ok(Self { slices })
    }

    pub fn slices(&self) -> &[MarketSlice] {
        &self.slices
    }

    pub fn pricing_date(&self) -> Option<NaiveDate> {
        self.slices.first().map(|s| s.pricing_date)
    }

    pub fn into_slices(self) -> Vec<MarketSlice> {
        self.slices
    }
}

/// Settings needed to turn a chain file into a [`Surface`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveConfig {
    pub pricing_date: NaiveDate,
    /// Fallback forward for maturities whose rows omit one.
    pub spot: Option<f64>,
    pub volume: f64,
}

impl CurveConfig {
    pub fn new(pricing_date: NaiveDate) -> Self {
        Self {
            pricing_date,
            spot: None,
            volume: 1.0,
        }
    }

    pub fn with_spot(mut self, spot: f64) -> Self {
        self.spot = Some(spot);
        self
    }
}

#[derive(Debug, Deserialize)]
struct ChainRow {
    maturity_days: u32,
    strike: f64,
    call_price: Option<f64>,
    put_price: Option<f64>,
    forward: Option<f64>,
    discount: Option<f64>,
}

#[derive(Default)]
struct SliceRows {
    forward: Option<f64>,
    discount: Option<f64>,
    quotes: Vec<OptionQuote>,
}

fn agree(slot: &mut Option<f64>, value: Option<f64>, what: &str, days: u32) -> Result<()> {
    if let Some(v) = value {
        match *slot {
            Some(prev) if prev != v => {
                return Err(PricingError::Validation(format!(
                    "inconsistent {what} for maturity {days}d: {prev} vs {v}"
                )))
            }
            _ => *slot = Some(v),
        }
    }
    Ok(())
}

/// Reads a chain CSV (see module docs) into a validated surface.
pub fn load_chain(path: &Path, config: &CurveConfig) -> Result<Surface> {
    let file = std::fs::File::open(path).map_err(|source| PricingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_chain(file, config)
}

pub fn read_chain<R: std::io::Read>(reader: R, config: &CurveConfig) -> Result<Surface> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| PricingError::Parse {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    if headers.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(PricingError::Parse {
            row: 0,
            message: format!(
                "expected header `{}`, got `{}`",
                CSV_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut by_maturity: BTreeMap<u32, SliceRows> = BTreeMap::new();
    for (i, record) in rdr.deserialize::<ChainRow>().enumerate() {
        // row 1 is the header
        let row_no = i + 2;
        let row = record.map_err(|e| PricingError::Parse {
            row: row_no,
            message: e.to_string(),
        })?;
        if row.maturity_days == 0 {
            return Err(PricingError::Parse {
                row: row_no,
                message: "maturity_days must be positive".into(),
            });
        }
        let entry = by_maturity.entry(row.maturity_days).or_default();
        agree(&mut entry.forward, row.forward, "forward", row.maturity_days)?;
        agree(&mut entry.discount, row.discount, "discount", row.maturity_days)?;
        if let Some(last) = entry.quotes.last() {
            if row.strike <= last.strike {
                let kind = if row.strike == last.strike {
                    "duplicate"
                } else {
                    "unsorted"
                };
                return Err(PricingError::Validation(format!(
                    "{kind} strike {} at row {row_no} (maturity {}d)",
                    row.strike, row.maturity_days
                )));
            }
        }
        entry
            .quotes
            .push(OptionQuote::new(row.strike, row.call_price, row.put_price));
    }

    let mut slices = Vec::with_capacity(by_maturity.len());
    for (days, rows) in by_maturity {
        let forward = rows.forward.or(config.spot).ok_or_else(|| {
            PricingError::Config(format!(
                "maturity {days}d has no forward and no spot fallback is configured"
            ))
        })?;
        let discount = rows.discount.unwrap_or(1.0);
        slices.push(MarketSlice::with_days(
            config.pricing_date,
            days,
            forward,
            discount,
            config.volume,
            rows.quotes,
        )?);
    }
    Surface::new(slices)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes a surface in the chain CSV schema. Floats use shortest round-trip
/// formatting so `load_chain(save_chain(s)) == s`.
pub fn write_chain<W: std::io::Write>(surface: &Surface, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| PricingError::Validation(format!("csv write failed: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for slice in surface.slices() {
        let days = slice.maturity_days().to_string();
        let fwd = slice.forward.to_string();
        let disc = slice.discount.to_string();
        for q in &slice.quotes {
            w.write_record([
                days.as_str(),
                &q.strike.to_string(),
                &fmt_opt(q.call_price),
                &fmt_opt(q.put_price),
                &fwd,
                &disc,
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| PricingError::Validation(format!("csv flush failed: {e}")))?;
    Ok(())
}

pub fn save_chain(surface: &Surface, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| PricingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_chain(surface, std::io::BufWriter::new(file))
}
