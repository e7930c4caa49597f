//! On-disk formats: JSON for structured results, CSV for tables.

use std::fs;
use std::path::{Path, PathBuf};

use barrier_core::calibration::{FitResult, Knot};
use barrier_core::market_data::SliceContext;
use barrier_core::models::{Density, GridSpec, ModelParams};
use barrier_core::montecarlo::{DynamicsSpec, RunConfig, SimulationReport};
use barrier_core::products::{PriceReport, PricingInputs, ProductSpec, Separation};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

/// One calibrated maturity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceFit {
    pub maturity_days: i64,
    pub ctx: SliceContext,
    pub fit: FitResult,
}

impl SliceFit {
    pub fn knot(&self) -> Knot {
        Knot {
            ctx: self.ctx,
            fit: self.fit.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub model: String,
    pub pricing_date: chrono::NaiveDate,
    pub slices: Vec<SliceFit>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationFile {
    pub dynamics: DynamicsSpec,
    pub config: RunConfig,
    pub report: SimulationReport,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceFile {
    pub product: ProductSpec,
    pub model: String,
    pub params: ModelParams,
    pub ctx: SliceContext,
    pub inputs: PricingInputs,
    /// `flag`, `mc` or `none`.
    pub delta_source: String,
    pub report: PriceReport,
    pub separation: Option<Separation>,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityFile {
    pub params: ModelParams,
    pub ctx: SliceContext,
    pub grid: GridSpec,
    pub total_mass: f64,
    pub mean: f64,
    pub below_mass: f64,
    pub above_mass: f64,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
}

/// SHA-256 of every input file, keyed by role.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub seed: Option<u64>,
    pub inputs: Vec<InputHash>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

impl Provenance {
    pub fn new(seed: Option<u64>) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            inputs: Vec::new(),
        }
    }

    pub fn add(&mut self, role: &str, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputHash {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        });
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parsed file plus its raw bytes for hashing.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<(T, Vec<u8>), CliError> {
    let bytes = read_bytes(path)?;
    let value = serde_json::from_slice(&bytes).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((value, bytes))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact types serialize");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// A header plus rows, rendered with the csv crate.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }
}

/// Shortest representation that parses back to the same value.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

/// Dotted-key view of a JSON object, e.g. `sabr.rho`; used for wide CSVs.
pub fn flatten(value: &Value) -> Vec<(String, f64)> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, f64)>) {
        match v {
            Value::Object(map) => {
                for (k, v) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, v, out);
                }
            }
            Value::Array(items) => {
                for (i, v) in items.iter().enumerate() {
                    walk(&format!("{prefix}[{i}]"), v, out);
                }
            }
            Value::Number(n) => out.push((prefix.to_string(), n.as_f64().unwrap_or(f64::NAN))),
            _ => {}
        }
    }
    let mut out = Vec::new();
    walk("", value, &mut out);
    out
}

pub fn param_fields(params: &ModelParams) -> Vec<(String, f64)> {
    flatten(&serde_json::to_value(params).expect("params serialize"))
}

pub fn density_table(d: &Density) -> Table {
    let mut t = Table::new(&["strike", "moneyness", "pdf", "cdf"]);
    for i in 0..d.grid.len() {
        let k = d.grid[i];
        t.push(vec![num(k), num(k / d.forward - 1.0), num(d.pdf[i]), num(d.cdf[i])]);
    }
    t
}

/// `dir/name` unless an explicit path was given.
pub fn output_path(explicit: Option<&PathBuf>, dir: &Path, name: &str) -> PathBuf {
    explicit.cloned().unwrap_or_else(|| dir.join(name))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_nested_params() {
        let p = ModelParams::Sabr(barrier_core::models::SabrParams::new(0.2, -0.5, 0.7, 1.0).unwrap());
        let f = param_fields(&p);
        let keys: Vec<_> = f.iter().map(|(k, _)| k.as_str()).collect();
        assert_eq!(keys, ["sabr.sigma1", "sabr.rho", "sabr.nu", "sabr.beta"]);
        assert_eq!(f[1].1, -0.5);
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 123456.789] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::NAN), "");
    }

    #[test]
    fn table_quotes_commas() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["x,y".into(), "1".into()]);
        assert_eq!(t.render(), "a,b\n\"x,y\",1\n");
    }
}
