use std::path::PathBuf;

use barrier_core::calibration::{build_term_structure, calibrate, ModelKind, TermStructure};
use barrier_core::market_data::{read_chain, CurveConfig, SliceContext, DAYS_PER_YEAR};
use barrier_core::models::{density_from_model, GridSpec, ModelParams};
use barrier_core::montecarlo::{delta_and_bound, epsilon_terms, simulate, DynamicsSpec, RunConfig};
use barrier_core::products::{price, validate_separation, BarrierStyle, PricingInputs, ProductSpec};
use barrier_core::PricingError;
use chrono::NaiveDate;
use clap::Args;
use log::warn;
use serde::Serialize;

use crate::artifacts::*;
use crate::{CliError, Global};

/// What a command produced: files to write plus the stdout renderings.
pub struct Output {
    pub files: Vec<(PathBuf, String)>,
    pub json: String,
    pub csv: String,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Option chain CSV: maturity_days,strike,call_price,put_price,forward,discount
    #[arg(long)]
    pub chain: PathBuf,
    /// sln, sabr, sabr0, sabr1, hex, hex-sabr0 or hex-sabr1
    #[arg(long, default_value = "sln")]
    pub model: String,
    /// Only labels the output; maturities come from the chain.
    #[arg(long, default_value = "2000-01-01")]
    pub pricing_date: NaiveDate,
    /// Forward for maturities whose rows leave it empty.
    #[arg(long)]
    pub spot: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub volume: f64,
    /// Defaults to <out-dir>/params.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Defaults to <out-dir>/fit_report.csv.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

pub fn cmd_calibrate(g: &Global, a: &CalibrateArgs) -> Result<Output, CliError> {
    let bytes = read_bytes(&a.chain)?;
    let kind: ModelKind = a.model.parse()?;
    let mut config = CurveConfig::new(a.pricing_date);
    config.spot = a.spot;
    config.volume = a.volume;
    let surface = read_chain(bytes.as_slice(), &config)?;
    let slices = surface.slices();
    let fits: Vec<SliceFit> = match slices.len() {
        0 => return Err(PricingError::Validation(format!("{} holds no quotes", a.chain.display())).into()),
        1 => vec![SliceFit {
            maturity_days: slices[0].maturity_days(),
            ctx: slices[0].context(),
            fit: calibrate(&slices[0], kind, None)?,
        }],
        _ => {
            let ts = build_term_structure(slices, kind)?;
            slices
                .iter()
                .zip(ts.knots())
                .map(|(s, k)| SliceFit {
                    maturity_days: s.maturity_days(),
                    ctx: k.ctx,
                    fit: k.fit.clone(),
                })
                .collect()
        }
    };
    for f in fits.iter().filter(|f| !f.fit.converged) {
        warn!("fit for {}d did not converge (objective {})", f.maturity_days, f.fit.objective);
    }

    let mut provenance = Provenance::new(None);
    provenance.add("chain", &a.chain, &bytes);
    let file = ParamsFile {
        model: kind.to_string(),
        pricing_date: a.pricing_date,
        slices: fits,
        provenance,
    };

    let mut table = Table::new(&[
        "maturity_days",
        "t",
        "forward",
        "discount",
        "volume",
        "objective",
        "initial_objective",
        "n_quotes",
        "converged",
        "iterations",
    ]);
    let keys: Vec<String> = param_fields(&file.slices[0].fit.params).into_iter().map(|(k, _)| k).collect();
    table.header.extend(keys);
    for s in &file.slices {
        let mut row = vec![
            s.maturity_days.to_string(),
            num(s.ctx.t),
            num(s.ctx.forward),
            num(s.ctx.discount),
            num(s.ctx.volume),
            num(s.fit.objective),
            num(s.fit.initial_objective),
            s.fit.n_quotes.to_string(),
            s.fit.converged.to_string(),
            s.fit.iterations.to_string(),
        ];
        row.extend(param_fields(&s.fit.params).into_iter().map(|(_, v)| num(v)));
        table.push(row);
    }
    let json = to_json(&file);
    let csv = table.render();
    Ok(Output {
        files: vec![
            (output_path(a.out.as_ref(), &g.out_dir, "params.json"), json.clone()),
            (output_path(a.report.as_ref(), &g.out_dir, "fit_report.csv"), csv.clone()),
        ],
        json,
        csv,
    })
}

/// Parameters and context at `t`: a knot verbatim, or the term-structure
/// interpolation between knots.
pub fn model_at(
    file: &ParamsFile,
    t: f64,
    allow_extrapolation: bool,
) -> Result<(ModelParams, SliceContext, Vec<String>), CliError> {
    if let [only] = file.slices.as_slice() {
        if only.ctx.t == t {
            return Ok((only.fit.params, only.ctx, Vec::new()));
        }
        return Err(PricingError::Validation(format!(
            "params hold a single maturity (T = {}); cannot evaluate T = {t}",
            only.ctx.t
        ))
        .into());
    }
    let ts = TermStructure::new(file.slices.iter().map(SliceFit::knot).collect())?;
    let i = ts.interpolate(t, allow_extrapolation)?;
    Ok((i.params, i.ctx, i.warnings))
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[arg(long)]
    pub params: PathBuf,
    /// Maturity in years.
    #[arg(long, conflicts_with = "maturity_days", required_unless_present = "maturity_days")]
    pub t: Option<f64>,
    #[arg(long)]
    pub maturity_days: Option<u32>,
    #[arg(long)]
    pub allow_extrapolation: bool,
    /// Grid bounds as fractions of the forward.
    #[arg(long, default_value_t = GridSpec::default().lo)]
    pub grid_lo: f64,
    #[arg(long, default_value_t = GridSpec::default().hi)]
    pub grid_hi: f64,
    #[arg(long, default_value_t = GridSpec::default().n)]
    pub grid_n: usize,
    /// Defaults to <out-dir>/density.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Defaults to <out-dir>/density.json.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

pub fn cmd_density(g: &Global, a: &DensityArgs) -> Result<Output, CliError> {
    let (file, bytes): (ParamsFile, _) = read_json(&a.params)?;
    let t = match (a.t, a.maturity_days) {
        (Some(t), _) => t,
        (None, Some(d)) => f64::from(d) / DAYS_PER_YEAR,
        (None, None) => return Err(CliError::Usage("one of --t or --maturity-days is required".into())),
    };
    let (params, ctx, warnings) = model_at(&file, t, a.allow_extrapolation)?;
    let grid = GridSpec::new(a.grid_lo, a.grid_hi, a.grid_n);
    let d = density_from_model(&params, &ctx, &grid)?;
    for w in &warnings {
        warn!("{w}");
    }
    let mut provenance = Provenance::new(None);
    provenance.add("params", &a.params, &bytes);
    let summary = DensityFile {
        params,
        ctx,
        grid,
        total_mass: d.total_mass(),
        mean: d.mean(),
        below_mass: d.below_mass,
        above_mass: d.above_mass,
        warnings,
        provenance,
    };
    let json = to_json(&summary);
    let csv = density_table(&d).render();
    Ok(Output {
        files: vec![
            (output_path(a.out.as_ref(), &g.out_dir, "density.csv"), csv.clone()),
            (output_path(a.summary.as_ref(), &g.out_dir, "density.json"), json.clone()),
        ],
        json,
        csv,
    })
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    /// Product JSON with fields kind, barrier_style, S0, B, K or R, T.
    #[arg(long)]
    pub product: PathBuf,
    #[arg(long)]
    pub params: PathBuf,
    /// Breach-and-recover ratio for American barriers.
    #[arg(long, conflicts_with = "delta_from_mc")]
    pub delta: Option<f64>,
    /// Take delta from a `simulate` output at the product's barrier level.
    #[arg(long)]
    pub delta_from_mc: Option<PathBuf>,
    /// Estimate the hit-and-recover remainder by simulating these dynamics.
    #[arg(long)]
    pub epsilon_dynamics: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    pub epsilon_paths: u64,
    #[arg(long)]
    pub allow_extrapolation: bool,
    /// Defaults to <out-dir>/price.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_price(g: &Global, a: &PriceArgs) -> Result<Output, CliError> {
    let (spec, spec_bytes): (ProductSpec, _) = read_json(&a.product)?;
    spec.validate()?;
    let (file, params_bytes): (ParamsFile, _) = read_json(&a.params)?;
    let mut provenance = Provenance::new(a.epsilon_dynamics.as_ref().map(|_| g.seed));
    provenance.add("product", &a.product, &spec_bytes);
    provenance.add("params", &a.params, &params_bytes);

    let (params, ctx, mut warnings) = model_at(&file, spec.t, a.allow_extrapolation)?;
    let density = density_from_model(&params, &ctx, &GridSpec::default())?;
    let mut inputs = PricingInputs::from_model(&spec, &params, &ctx, &density)?;

    let american = spec.barrier_style == BarrierStyle::American;
    let delta_source = if let Some(d) = a.delta {
        inputs = inputs.with_delta(d);
        "flag"
    } else if let Some(path) = &a.delta_from_mc {
        let (mc, bytes): (SimulationFile, _) = read_json(path)?;
        provenance.add("mc", path, &bytes);
        let level = spec.b / spec.s0;
        let stats = mc
            .report
            .stats
            .iter()
            .find(|s| (s.barrier_frac - level).abs() < 1e-9)
            .ok_or_else(|| {
                let have: Vec<String> = mc.report.stats.iter().map(|s| s.barrier_frac.to_string()).collect();
                CliError::Usage(format!(
                    "{} has no barrier level {level} (B/S0); levels: {}",
                    path.display(),
                    have.join(", ")
                ))
            })?;
        let bound = delta_and_bound(stats)?;
        inputs = inputs.with_delta(bound.delta);
        "mc"
    } else {
        if american {
            warnings.push("no delta supplied; American barrier priced with delta = 0 (model-free)".into());
        }
        "none"
    };
    if !american && delta_source != "none" {
        warnings.push("delta ignored for a European barrier".into());
    }
    if let Some(path) = &a.epsilon_dynamics {
        let (dynamics, bytes): (DynamicsSpec, _) = read_json(path)?;
        provenance.add("epsilon_dynamics", path, &bytes);
        let cfg = RunConfig::new(a.epsilon_paths, g.seed, vec![spec.b / spec.s0]);
        let e = epsilon_terms(&dynamics, &cfg, &spec)?;
        inputs = inputs.with_epsilon(Some(e.epsilon));
    }

    let report = price(&spec, &inputs)?;
    let separation = inputs.sigma_atm_1y.map(|s| validate_separation(&spec, s)).transpose()?;
    warnings.extend(report.warnings.iter().cloned());
    for w in &warnings {
        warn!("{w}");
    }

    let out = PriceFile {
        product: spec,
        model: file.model.clone(),
        params,
        ctx,
        inputs,
        delta_source: delta_source.to_string(),
        report,
        separation,
        warnings,
        provenance,
    };
    let mut table = Table::new(&["term", "value"]);
    let t = &out.report.terms;
    for (name, v) in [
        ("leading", t.leading),
        ("barrier", t.barrier),
        ("delta_correction", t.delta_correction),
        ("option", t.option),
        ("epsilon", t.epsilon),
        ("price", out.report.price),
    ] {
        table.push(vec![name.to_string(), num(v)]);
    }
    let json = to_json(&out);
    Ok(Output {
        files: vec![(output_path(a.out.as_ref(), &g.out_dir, "price.json"), json.clone())],
        json,
        csv: table.render(),
    })
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Dynamics JSON, e.g. {"dynamics": {"sln_static": {...}}, "T": 1.0}.
    #[arg(long)]
    pub dynamics: PathBuf,
    #[arg(long, default_value_t = 1_000_000)]
    pub paths: u64,
    /// Barrier levels as fractions of S0.
    #[arg(long, value_delimiter = ',', default_value = "0.60,0.65,0.70,0.75,0.80,0.90")]
    pub barriers: Vec<f64>,
    /// Brownian-bridge crossing correction (continuous monitoring).
    #[arg(long)]
    pub bridge: bool,
    #[arg(long)]
    pub no_antithetic: bool,
    /// Brownian increments per monitoring step.
    #[arg(long, default_value_t = 1)]
    pub substeps: u32,
    #[arg(long, default_value_t = 100)]
    pub batches: usize,
    /// Defaults to <out-dir>/mc.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Defaults to <out-dir>/mc_table.csv.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

pub fn cmd_simulate(g: &Global, a: &SimulateArgs) -> Result<Output, CliError> {
    let (dynamics, bytes): (DynamicsSpec, _) = read_json(&a.dynamics)?;
    let mut config = RunConfig::new(a.paths, g.seed, a.barriers.clone())
        .with_bridge(a.bridge)
        .with_antithetic(!a.no_antithetic)
        .with_substeps(a.substeps);
    config.batches = a.batches;
    let report = simulate(&dynamics, &config)?;
    for w in &report.warnings {
        warn!("{w}");
    }
    let mut provenance = Provenance::new(Some(g.seed));
    provenance.add("dynamics", &a.dynamics, &bytes);

    let mut table = Table::new(&["barrier_level", "hits", "ended_below", "ended_above", "delta", "std_err"]);
    for s in &report.stats {
        table.push(vec![
            num(s.barrier_frac),
            s.hits.to_string(),
            s.ended_below.to_string(),
            s.ended_above.to_string(),
            s.delta_hat.map(num).unwrap_or_default(),
            s.std_err.map(num).unwrap_or_default(),
        ]);
    }
    let file = SimulationFile {
        dynamics,
        config,
        report,
        provenance,
    };
    let json = to_json(&file);
    let csv = table.render();
    Ok(Output {
        files: vec![
            (output_path(a.out.as_ref(), &g.out_dir, "mc.json"), json.clone()),
            (output_path(a.table.as_ref(), &g.out_dir, "mc_table.csv"), csv.clone()),
        ],
        json,
        csv,
    })
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub mc: Option<PathBuf>,
    #[arg(long)]
    pub price: Option<PathBuf>,
    /// Maturities (days) for the interpolated parameter curve; defaults to
    /// 25 points across the calibrated range.
    #[arg(long, value_delimiter = ',')]
    pub curve_days: Vec<u32>,
    /// Defaults to <out-dir>/report.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Defaults to <out-dir>/report_curve.csv.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Serialize)]
struct KnotSummary {
    maturity_days: i64,
    t: f64,
    forward: f64,
    objective: f64,
    converged: bool,
    atm_normal_vol: f64,
    params: ModelParams,
}

#[derive(Serialize)]
struct CurvePoint {
    t: f64,
    atm_normal_vol: f64,
    params: ModelParams,
}

#[derive(Serialize)]
struct BarrierSummary {
    barrier_level: f64,
    hits: u64,
    delta: f64,
    ci_low: f64,
    ci_high: f64,
    price_impact_bound: f64,
}

#[derive(Serialize)]
struct Report {
    model: String,
    knots: Vec<KnotSummary>,
    curve: Vec<CurvePoint>,
    mc: Option<Vec<BarrierSummary>>,
    price: Option<PriceFile>,
    provenance: Provenance,
}

/// Bachelier-equivalent ATM volatility per unit forward and root year.
fn atm_normal_vol(params: &ModelParams, ctx: &SliceContext) -> Result<f64, CliError> {
    let atm = params.put(ctx, ctx.forward)?;
    Ok(atm * (2.0 * std::f64::consts::PI).sqrt() / (ctx.scale() * ctx.forward * ctx.t.sqrt()))
}

pub fn cmd_report(g: &Global, a: &ReportArgs) -> Result<Output, CliError> {
    let (file, bytes): (ParamsFile, _) = read_json(&a.params)?;
    let mut provenance = Provenance::new(None);
    provenance.add("params", &a.params, &bytes);

    let knots = file
        .slices
        .iter()
        .map(|s| {
            Ok(KnotSummary {
                maturity_days: s.maturity_days,
                t: s.ctx.t,
                forward: s.ctx.forward,
                objective: s.fit.objective,
                converged: s.fit.converged,
                atm_normal_vol: atm_normal_vol(&s.fit.params, &s.ctx)?,
                params: s.fit.params,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let ts: Vec<f64> = if !a.curve_days.is_empty() {
        a.curve_days.iter().map(|&d| f64::from(d) / DAYS_PER_YEAR).collect()
    } else if file.slices.len() > 1 {
        let (lo, hi) = (file.slices[0].ctx.t, file.slices[file.slices.len() - 1].ctx.t);
        (0..25)
            .map(|i| {
                // exact at both ends, so the last point is the last knot
                let w = f64::from(i) / 24.0;
                lo * (1.0 - w) + hi * w
            })
            .collect()
    } else {
        vec![file.slices[0].ctx.t]
    };
    let curve = ts
        .iter()
        .map(|&t| {
            let (params, ctx, _) = model_at(&file, t, false)?;
            Ok(CurvePoint {
                t,
                atm_normal_vol: atm_normal_vol(&params, &ctx)?,
                params,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mc = match &a.mc {
        Some(path) => {
            let (mc, bytes): (SimulationFile, _) = read_json(path)?;
            provenance.add("mc", path, &bytes);
            let rows = mc
                .report
                .stats
                .iter()
                .filter(|s| s.ended_below > 0)
                .map(|s| {
                    let b = delta_and_bound(s)?;
                    Ok(BarrierSummary {
                        barrier_level: s.barrier_frac,
                        hits: s.hits,
                        delta: b.delta,
                        ci_low: b.ci_low,
                        ci_high: b.ci_high,
                        price_impact_bound: b.price_impact_bound,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Some(rows)
        }
        None => None,
    };
    let price = match &a.price {
        Some(path) => {
            let (p, bytes): (PriceFile, _) = read_json(path)?;
            provenance.add("price", path, &bytes);
            Some(p)
        }
        None => None,
    };

    let mut table = Table::new(&["t", "atm_normal_vol"]);
    if let Some(first) = curve.first() {
        table.header.extend(param_fields(&first.params).into_iter().map(|(k, _)| k));
    }
    for c in &curve {
        let mut row = vec![num(c.t), num(c.atm_normal_vol)];
        row.extend(param_fields(&c.params).into_iter().map(|(_, v)| num(v)));
        table.push(row);
    }
    let report = Report {
        model: file.model.clone(),
        knots,
        curve,
        mc,
        price,
        provenance,
    };
    let json = to_json(&report);
    let csv = table.render();
    Ok(Output {
        files: vec![
            (output_path(a.out.as_ref(), &g.out_dir, "report.json"), json.clone()),
            (output_path(a.curve.as_ref(), &g.out_dir, "report_curve.csv"), csv.clone()),
        ],
        json,
        csv,
    })
}
