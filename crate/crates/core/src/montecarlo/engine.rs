//! Path generation shared by every Monte Carlo estimator.
//!
//! Path pairs are the unit of randomness: pair `i` draws its normals from
//! ChaCha8 stream `i` and its bridge uniforms from stream `i | 2^63`, so a
//! path is the same whichever thread simulates it. Pairs are grouped into
//! contiguous batches that are reduced in batch order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dynamics::{Dynamics, DynamicsSpec};
use crate::error::{PricingError, Result};

/// Fewer paths than this draw a statistical-quality warning.
pub const MIN_PATHS_FOR_STATISTICS: u64 = 10_000;
pub const DEFAULT_BATCHES: usize = 100;
const BRIDGE_STREAM_BIT: u64 = 1 << 63;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n_paths: u64,
    pub seed: u64,
    /// Barrier levels as fractions of `S0`.
    pub barriers: Vec<f64>,
    #[serde(default = "yes")]
    pub antithetic: bool,
    /// Brownian-bridge crossing probability between monitoring dates.
    #[serde(default)]
    pub bridge: bool,
    /// Draws summed per step; `k` substeps at `n` steps reuse the increments
    /// of a `k n`-step run, coupling the two discretisations.
    #[serde(default = "one")]
    pub brownian_substeps: u32,
    #[serde(default = "batches")]
    pub batches: usize,
}

fn yes() -> bool {
    true
}
fn one() -> u32 {
    1
}
fn batches() -> usize {
    DEFAULT_BATCHES
}

impl RunConfig {
    pub fn new(n_paths: u64, seed: u64, barriers: Vec<f64>) -> Self {
        Self {
            n_paths,
            seed,
            barriers,
            antithetic: true,
            bridge: false,
            brownian_substeps: 1,
            batches: DEFAULT_BATCHES,
        }
    }

    pub fn with_bridge(mut self, on: bool) -> Self {
        self.bridge = on;
        self
    }

    pub fn with_antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    pub fn with_substeps(mut self, k: u32) -> Self {
        self.brownian_substeps = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(PricingError::Config("n_paths must be positive".into()));
        }
        if self.barriers.is_empty() || self.barriers.len() > 64 {
            return Err(PricingError::Config(format!(
                "between 1 and 64 barrier levels required, got {}",
                self.barriers.len()
            )));
        }
        if let Some(b) = self.barriers.iter().find(|b| !(b.is_finite() && **b > 0.0 && **b < 1.0)) {
            return Err(PricingError::Config(format!("barrier fraction {b} outside (0, 1)")));
        }
        if self.brownian_substeps == 0 || self.batches == 0 {
            return Err(PricingError::Config("substeps and batches must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn n_pairs(&self) -> u64 {
        if self.antithetic {
            self.n_paths.div_ceil(2)
        } else {
            self.n_paths
        }
    }
}

/// What an estimator sees of one path.
#[derive(Debug, Clone, Copy)]
pub struct PathOutcome {
    pub x_t: f64,
    /// Bit `j` set when barrier `j` was hit.
    pub hits: u64,
    pub clamped: bool,
}

impl PathOutcome {
    #[inline]
    pub fn hit(&self, j: usize) -> bool {
        self.hits >> j & 1 == 1
    }
}

#[derive(Clone, Copy)]
struct Lane {
    x: f64,
    v: f64,
    hits: u64,
    clamped: bool,
}

/// Simulate all paths and fold them into one accumulator per batch; the
/// returned vector is in batch order.
pub fn run_batches<T, I, O>(dynamics: &DynamicsSpec, cfg: &RunConfig, init: I, observe: O) -> Result<Vec<T>>
where
    T: Send,
    I: Fn() -> T + Sync,
    O: Fn(&mut T, &PathOutcome) + Sync,
{
    dynamics.validate()?;
    cfg.validate()?;
    let grid = dynamics.grid();
    let n_pairs = cfg.n_pairs();
    let n_batches = (cfg.batches as u64).min(n_pairs) as usize;
    let lanes = if cfg.antithetic { 2 } else { 1 };

    let batches: Vec<T> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let start = n_pairs * b as u64 / n_batches as u64;
            let end = n_pairs * (b as u64 + 1) / n_batches as u64;
            let mut acc = init();
            for pair in start..end {
                let out = simulate_pair(dynamics, &grid, cfg, pair);
                for (lane, o) in out.iter().enumerate().take(lanes) {
                    let path = pair * lanes as u64 + lane as u64;
                    if path < cfg.n_paths {
                        observe(&mut acc, o);
                    }
                }
            }
            acc
        })
        .collect();
    Ok(batches)
}

fn simulate_pair(
    spec: &DynamicsSpec,
    grid: &super::dynamics::StepGrid,
    cfg: &RunConfig,
    pair: u64,
) -> [PathOutcome; 2] {
    let mut normals = ChaCha8Rng::seed_from_u64(cfg.seed);
    normals.set_stream(pair);
    let mut uniforms = ChaCha8Rng::seed_from_u64(cfg.seed);
    uniforms.set_stream(pair | BRIDGE_STREAM_BIT);

    let k = cfg.brownian_substeps;
    let norm_k = 1.0 / f64::from(k).sqrt();
    let dt = grid.dt;
    let sqrt_dt = dt.sqrt();
    let lanes = if cfg.antithetic { 2 } else { 1 };
    let mut state = [Lane {
        x: 1.0,
        v: 0.0,
        hits: 0,
        clamped: false,
    }; 2];
    let sabr = match spec.dynamics {
        Dynamics::Sabr { rho, nu, beta, .. } => Some((rho, (1.0 - rho * rho).max(0.0).sqrt(), nu, beta)),
        _ => None,
    };

    for i in 0..grid.sigma.len() {
        let (mut zw, mut zv) = (0.0, 0.0);
        for _ in 0..k {
            zw += normals.sample::<f64, _>(StandardNormal);
            if sabr.is_some() {
                zv += normals.sample::<f64, _>(StandardNormal);
            }
        }
        zw *= norm_k;
        zv *= norm_k;
        let u: f64 = if cfg.bridge { uniforms.random() } else { 1.0 };
        let t_left = i as f64 * dt;

        for (lane, sign) in state.iter_mut().take(lanes).zip([1.0, -1.0]) {
            let x = lane.x;
            let (lam, x_new) = match sabr {
                None => {
                    let q = grid.q[i];
                    let lam = grid.sigma[i] * (1.0 + q * (x - 1.0));
                    let mut x_new = x + lam * sqrt_dt * sign * zw;
                    // the shifted log-normal lives on one side of 1 - 1/q
                    if q != 0.0 {
                        let bound = 1.0 - 1.0 / q;
                        if (q < 0.0 && x_new > bound) || (q > 0.0 && x_new < bound) {
                            x_new = bound;
                            lane.clamped = true;
                        }
                    }
                    (lam, x_new)
                }
                Some((rho, rho_bar, nu, beta)) => {
                    let level = if beta == 0.0 { 1.0 } else { x.max(0.0).powf(beta) };
                    let lam = grid.sigma[i] * level * (nu * lane.v - 0.5 * nu * nu * t_left).exp();
                    let dw = sign * (rho * zv + rho_bar * zw);
                    lane.v += sign * zv * sqrt_dt;
                    let mut x_new = x + lam * sqrt_dt * dw;
                    if beta > 0.0 && x_new < 0.0 {
                        x_new = 0.0;
                        lane.clamped = true;
                    }
                    (lam, x_new)
                }
            };
            let u_lane = if sign > 0.0 { u } else { 1.0 - u };
            for (j, &b) in cfg.barriers.iter().enumerate() {
                let bit = 1u64 << j;
                if lane.hits & bit != 0 {
                    continue;
                }
                if x_new <= b {
                    lane.hits |= bit;
                } else if cfg.bridge {
                    // P(continuous path crossed b | both ends above b)
                    let a = (x - b) * (x_new - b);
                    let var = lam * lam * dt;
                    if var > 0.0 && a < 40.0 * var && u_lane < (-2.0 * a / var).exp() {
                        lane.hits |= bit;
                    }
                }
            }
            lane.x = x_new;
        }
    }
    state.map(|l| PathOutcome {
        x_t: l.x,
        hits: l.hits,
        clamped: l.clamped,
    })
}
