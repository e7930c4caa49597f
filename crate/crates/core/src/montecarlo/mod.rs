//! Monte Carlo estimates of the barrier-hit asymmetry `delta` and of the
//! terms the closed-form American prices neglect.

pub mod dynamics;
pub mod engine;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};
use crate::products::ProductSpec;
pub use dynamics::{Dynamics, DynamicsSpec, VolCurve, DAILY_STEPS};
pub use engine::{run_batches, PathOutcome, RunConfig, MIN_PATHS_FOR_STATISTICS};

/// Clamp rates above this draw a warning.
pub const CLAMP_WARN_RATE: f64 = 1e-3;

/// Barrier tallies in the layout of a hit table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierStats {
    pub n_paths: u64,
    pub barrier_frac: f64,
    pub hits: u64,
    pub ended_below: u64,
    pub ended_above: u64,
    /// `(above - below) / below`; absent when no path ended below.
    pub delta_hat: Option<f64>,
    pub std_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub n_paths: u64,
    pub n_steps: usize,
    pub stats: Vec<BarrierStats>,
    pub mean_terminal: f64,
    pub mean_terminal_std_err: f64,
    /// Fraction of paths clamped at the admissible boundary at least once.
    pub clamp_rate: f64,
    pub warnings: Vec<String>,
}

impl SimulationReport {
    /// `|mean X_T - 1|` in standard errors.
    pub fn martingale_z(&self) -> f64 {
        (self.mean_terminal - 1.0).abs() / self.mean_terminal_std_err
    }
}

#[derive(Clone)]
struct Tally {
    n: u64,
    sum_x: f64,
    clamped: u64,
    hits: Vec<u64>,
    below: Vec<u64>,
    above: Vec<u64>,
}

impl Tally {
    fn new(levels: usize) -> Self {
        Self {
            n: 0,
            sum_x: 0.0,
            clamped: 0,
            hits: vec![0; levels],
            below: vec![0; levels],
            above: vec![0; levels],
        }
    }

    fn observe(&mut self, o: &PathOutcome, barriers: &[f64]) {
        self.n += 1;
        self.sum_x += o.x_t;
        self.clamped += u64::from(o.clamped);
        for (j, &b) in barriers.iter().enumerate() {
            if o.hit(j) {
                self.hits[j] += 1;
                if o.x_t < b {
                    self.below[j] += 1;
                } else {
                    self.above[j] += 1;
                }
            }
        }
    }
}

/// Standard error of `sum(a)/sum(l)` from per-batch totals (ratio-estimator
/// linearisation).
pub fn ratio_std_err(a: &[f64], l: &[f64]) -> Option<f64> {
    let nb = a.len();
    let (sa, sl): (f64, f64) = (a.iter().sum(), l.iter().sum());
    if nb < 2 || sl <= 0.0 {
        return None;
    }
    let r = sa / sl;
    let ss: f64 = a.iter().zip(l).map(|(x, y)| (x - r * y).powi(2)).sum();
    Some((ss * nb as f64 / (nb - 1) as f64).sqrt() / sl)
}

/// Mean and standard error of per-batch means.
fn batch_mean(sums: &[f64], counts: &[f64]) -> (f64, f64) {
    let total: f64 = counts.iter().sum();
    let mean = sums.iter().sum::<f64>() / total;
    (mean, ratio_std_err(sums, counts).unwrap_or(f64::NAN))
}

fn quality_warnings(cfg: &RunConfig, clamp_rate: f64, warnings: &mut Vec<String>) {
    if cfg.n_paths < MIN_PATHS_FOR_STATISTICS {
        warnings.push(format!(
            "only {} paths; at least {} are needed for meaningful statistics",
            cfg.n_paths, MIN_PATHS_FOR_STATISTICS
        ));
    }
    if clamp_rate > CLAMP_WARN_RATE {
        warnings.push(format!(
            "{:.3}% of paths were clamped at the admissible boundary",
            100.0 * clamp_rate
        ));
    }
}

/// Hit, ended-below and ended-above counts with `delta` per barrier level.
pub fn simulate(dynamics: &DynamicsSpec, cfg: &RunConfig) -> Result<SimulationReport> {
    let levels = cfg.barriers.len();
    let batches = run_batches(dynamics, cfg, || Tally::new(levels), |t, o| t.observe(o, &cfg.barriers))?;

    let counts: Vec<f64> = batches.iter().map(|b| b.n as f64).collect();
    let sums: Vec<f64> = batches.iter().map(|b| b.sum_x).collect();
    let (mean_terminal, mean_terminal_std_err) = batch_mean(&sums, &counts);
    let clamped: u64 = batches.iter().map(|b| b.clamped).sum();
    let clamp_rate = clamped as f64 / cfg.n_paths as f64;

    let mut warnings = Vec::new();
    let stats = (0..levels)
        .map(|j| {
            let hits: u64 = batches.iter().map(|b| b.hits[j]).sum();
            let below: u64 = batches.iter().map(|b| b.below[j]).sum();
            let above: u64 = batches.iter().map(|b| b.above[j]).sum();
            let (delta_hat, std_err) = if below > 0 {
                let a: Vec<f64> = batches.iter().map(|b| b.above[j] as f64).collect();
                let l: Vec<f64> = batches.iter().map(|b| b.below[j] as f64).collect();
                (Some(delta_from_counts(above, below)), ratio_std_err(&a, &l))
            } else {
                warnings.push(format!("no path ended below barrier {}; delta undefined", cfg.barriers[j]));
                (None, None)
            };
            BarrierStats {
                n_paths: cfg.n_paths,
                barrier_frac: cfg.barriers[j],
                hits,
                ended_below: below,
                ended_above: above,
                delta_hat,
                std_err,
            }
        })
        .collect();
    quality_warnings(cfg, clamp_rate, &mut warnings);
    for w in &warnings {
        warn!("{w}");
    }
    Ok(SimulationReport {
        n_paths: cfg.n_paths,
        n_steps: dynamics.n_steps(),
        stats,
        mean_terminal,
        mean_terminal_std_err,
        clamp_rate,
        warnings,
    })
}

/// `(above - below) / below`
pub fn delta_from_counts(above: u64, below: u64) -> f64 {
    (above as f64 - below as f64) / below as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaBound {
    pub delta: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Half-width of the 95% interval.
    pub uncertainty: f64,
    /// Relative price impact of that uncertainty, `uncertainty / 20`.
    pub price_impact_bound: f64,
}

/// 95% interval on `delta` and the relative price impact it implies.
pub fn delta_and_bound(stats: &BarrierStats) -> Result<DeltaBound> {
    if stats.ended_below == 0 {
        return Err(PricingError::Validation(format!(
            "no path ended below barrier {}; delta undefined",
            stats.barrier_frac
        )));
    }
    let delta = delta_from_counts(stats.ended_above, stats.ended_below);
    let uncertainty = 1.96 * stats.std_err.unwrap_or(0.0);
    Ok(DeltaBound {
        delta,
        ci_low: delta - uncertainty,
        ci_high: delta + uncertainty,
        uncertainty,
        price_impact_bound: uncertainty / 20.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonEstimate {
    /// `E[(S_T - level)^+ ; barrier hit]` in price units, undiscounted.
    pub epsilon: f64,
    pub std_err: f64,
    /// `K` for certificates, `S0 + R` for reverse convertibles.
    pub level: f64,
    pub barrier: f64,
}

/// Monte Carlo estimate of the hit-and-finish-above-level remainder.
pub fn epsilon_terms(dynamics: &DynamicsSpec, cfg: &RunConfig, spec: &ProductSpec) -> Result<EpsilonEstimate> {
    spec.validate()?;
    let level = spec.reference_level();
    let k = level / spec.s0;
    let cfg = RunConfig {
        barriers: vec![spec.b / spec.s0],
        ..cfg.clone()
    };
    let batches = run_batches(
        dynamics,
        &cfg,
        || (0.0f64, 0.0f64),
        |acc, o| {
            acc.1 += 1.0;
            if o.hit(0) {
                acc.0 += (o.x_t - k).max(0.0);
            }
        },
    )?;
    let sums: Vec<f64> = batches.iter().map(|b| b.0).collect();
    let counts: Vec<f64> = batches.iter().map(|b| b.1).collect();
    let (mean, se) = batch_mean(&sums, &counts);
    Ok(EpsilonEstimate {
        epsilon: mean * spec.s0,
        std_err: se * spec.s0,
        level,
        barrier: spec.b,
    })
}

/// Histogram bins `[lo + i w, lo + (i+1) w)`; index 0 collects everything
/// below `lo` and the last index everything from `hi` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl HistogramSpec {
    pub fn index(&self, x: f64) -> usize {
        if x < self.lo {
            0
        } else if x >= self.hi {
            self.bins + 1
        } else {
            let w = (self.hi - self.lo) / self.bins as f64;
            let edge = |i: usize| self.lo + i as f64 * w;
            // agree with `edges()` exactly, not just up to rounding
            let mut i = (((x - self.lo) / w) as usize).min(self.bins - 1);
            if x < edge(i) {
                i -= 1;
            } else if i + 1 < self.bins && x >= edge(i + 1) {
                i += 1;
            }
            i + 1
        }
    }

    pub fn edges(&self) -> Vec<f64> {
        let w = (self.hi - self.lo) / self.bins as f64;
        (0..=self.bins).map(|i| self.lo + i as f64 * w).collect()
    }
}

/// Terminal histograms split by whether the barrier was hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDensities {
    pub barrier_frac: f64,
    pub histogram: HistogramSpec,
    pub total: Vec<u64>,
    pub not_hit: Vec<u64>,
    pub hit: Vec<u64>,
    pub n_hit: u64,
    /// Mean of `X_T` over hit paths; equals the barrier for a martingale
    /// under continuous monitoring.
    pub hit_mean: f64,
    pub hit_mean_std_err: f64,
}

pub fn conditional_densities(
    dynamics: &DynamicsSpec,
    cfg: &RunConfig,
    barrier_frac: f64,
    histogram: HistogramSpec,
) -> Result<ConditionalDensities> {
    if histogram.bins == 0 || !(histogram.hi > histogram.lo) {
        return Err(PricingError::Config(format!("invalid histogram {histogram:?}")));
    }
    let cfg = RunConfig {
        barriers: vec![barrier_frac],
        ..cfg.clone()
    };
    let n = histogram.bins + 2;
    struct Acc {
        total: Vec<u64>,
        not_hit: Vec<u64>,
        hit: Vec<u64>,
        n_hit: f64,
        sum_hit: f64,
    }
    let batches = run_batches(
        dynamics,
        &cfg,
        || Acc {
            total: vec![0; n],
            not_hit: vec![0; n],
            hit: vec![0; n],
            n_hit: 0.0,
            sum_hit: 0.0,
        },
        |acc, o| {
            let i = histogram.index(o.x_t);
            acc.total[i] += 1;
            if o.hit(0) {
                acc.hit[i] += 1;
                acc.n_hit += 1.0;
                acc.sum_hit += o.x_t;
            } else {
                acc.not_hit[i] += 1;
            }
        },
    )?;
    let merge = |f: fn(&Acc) -> &Vec<u64>| -> Vec<u64> {
        (0..n).map(|i| batches.iter().map(|b| f(b)[i]).sum()).collect()
    };
    let sums: Vec<f64> = batches.iter().map(|b| b.sum_hit).collect();
    let counts: Vec<f64> = batches.iter().map(|b| b.n_hit).collect();
    let n_hit = counts.iter().sum::<f64>() as u64;
    let (hit_mean, hit_mean_std_err) = if n_hit > 0 {
        batch_mean(&sums, &counts)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(ConditionalDensities {
        barrier_frac,
        histogram,
        total: merge(|a| &a.total),
        not_hit: merge(|a| &a.not_hit),
        hit: merge(|a| &a.hit),
        n_hit,
        hit_mean,
        hit_mean_std_err,
    })
}
