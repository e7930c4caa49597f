//! Pricing of barrier reverse convertibles and bonus certificates from
//! calibrated smile models, with Monte Carlo checks of the barrier-hit
//! correction.

pub mod calibration;
pub mod error;
pub mod market_data;
pub mod models;
pub mod montecarlo;
pub mod normal;
pub mod products;

pub use error::{PricingError, Result};
