use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pricing pipeline.
#[derive(Debug, Error)]
pub enum PricingError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error at strike {strike}: {message}")]
    Domain { strike: f64, message: String },

    #[error("inadmissible density on [{lo}, {hi}]: {message}")]
    Admissibility { lo: f64, hi: f64, message: String },

    #[error("insufficient quotes: need {required}, have {available}")]
    InsufficientQuotes { required: usize, available: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl PricingError {
    pub(crate) fn domain(strike: f64, message: impl Into<String>) -> Self {
        PricingError::Domain {
            strike,
            message: message.into(),
        }
    }

    /// True for errors caused by bad numerical input rather than IO or usage.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            PricingError::Domain { .. }
                | PricingError::Admissibility { .. }
                | PricingError::InsufficientQuotes { .. }
                | PricingError::InvalidParameter(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, PricingError>;
