use barrier_core::calibration::{
    build_term_structure, calibrate, moneyness_strikes, objective_e2, synthetic_slice, ModelKind,
};
use barrier_core::models::{HexParams, ModelParams, SabrParams, SlnParams};
use chrono::NaiveDate;

fn date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 3, 1).unwrap()
}

fn sln(p: &ModelParams) -> SlnParams {
    match p {
        ModelParams::Sln(s) => *s,
        other => panic!("expected SLN, got {other:?}"),
    }
}

fn sabr(p: &ModelParams) -> SabrParams {
    match p {
        ModelParams::Sabr(s) => *s,
        other => panic!("expected SABR, got {other:?}"),
    }
}

#[test]
fn sln_round_trip_long_dated() {
    let truth = SlnParams::new(0.1464, -3.16).unwrap();
    let m = ModelParams::Sln(truth);
    let strikes = moneyness_strikes(2000.0, -0.45, 0.25, 36);
    let slice = synthetic_slice(&m, date(), 228, 2000.0, 0.99, 1.0, &strikes).unwrap();
    let fit = calibrate(&slice, ModelKind::Sln, None).unwrap();
    let got = sln(&fit.params);
    assert!((got.sigma_bar / truth.sigma_bar - 1.0).abs() < 0.01, "{got:?}");
    assert!((got.q / truth.q - 1.0).abs() < 0.01, "{got:?}");
    assert!(fit.objective <= fit.initial_objective);
}

#[test]
fn sln_round_trip_203_days() {
    let truth = SlnParams::new(0.1312, -1.73).unwrap();
    let m = ModelParams::Sln(truth);
    let strikes = moneyness_strikes(100.0, -0.4, 0.3, 29);
    let slice = synthetic_slice(&m, date(), 203, 100.0, 1.0, 1.0, &strikes).unwrap();
    assert!(objective_e2(&m, &slice).unwrap() < 1e-20);
    let fit = calibrate(&slice, ModelKind::Sln, None).unwrap();
    let got = sln(&fit.params);
    assert!((got.sigma_bar / truth.sigma_bar - 1.0).abs() < 0.01, "{got:?}");
    assert!((got.q / truth.q - 1.0).abs() < 0.01, "{got:?}");
}

#[test]
fn sabr_beta_one_round_trip() {
    let truth = SabrParams::new(0.0508, -0.85, 2.37, 1.0).unwrap();
    let m = ModelParams::Sabr(truth);
    let strikes = moneyness_strikes(100.0, -0.2, 0.1, 31);
    let slice = synthetic_slice(&m, date(), 32, 100.0, 1.0, 1.0, &strikes).unwrap();
    let fit = calibrate(&slice, ModelKind::Sabr { beta: Some(1.0) }, None).unwrap();
    let got = sabr(&fit.params);
    assert_eq!(got.beta, 1.0);
    assert!((got.rho / truth.rho - 1.0).abs() < 0.05, "{got:?}");
    assert!((got.nu / truth.nu - 1.0).abs() < 0.05, "{got:?}");
}

#[test]
fn hex_two_stage_fit_improves_on_base() {
    // quotes from a HEX model with heavier put wing than its base
    let base = SlnParams::new(0.15, -2.0).unwrap();
    let mut h = HexParams::from_base(barrier_core::models::BaseParams::Sln(base), 100.0, 0.5).unwrap();
    h.theta_left = [0.0, 1.5, 0.0];
    h.a = 0.02;
    let truth = ModelParams::Hex(h);
    let t = 0.5f64;
    let days = (t * 365.0) as u32;
    let strikes = moneyness_strikes(100.0, -0.45, 0.25, 29);
    let slice = synthetic_slice(&truth, date(), days, 100.0, 1.0, 1.0, &strikes).unwrap();
    let base_fit = calibrate(&slice, ModelKind::Sln, None).unwrap();
    let hex_fit = calibrate(&slice, "hex".parse().unwrap(), None).unwrap();
    assert!(matches!(hex_fit.params, ModelParams::Hex(_)));
    assert!(hex_fit.objective < 0.1 * base_fit.objective, "{} vs {}", hex_fit.objective, base_fit.objective);
}

#[test]
fn term_structure_brackets_by_maturity() {
    // Long-dated total-vol pattern: the 817-day value sits between its neighbours.
    let knots = [(228u32, 0.1464, -3.16), (683, 0.2642, -1.9), (1047, 0.3399, -1.5)];
    let slices: Vec<_> = knots
        .iter()
        .map(|&(d, sb, q)| {
            let m = ModelParams::Sln(SlnParams::new(sb, q).unwrap());
            synthetic_slice(&m, date(), d, 100.0, 1.0, 1.0, &moneyness_strikes(100.0, -0.4, 0.25, 27)).unwrap()
        })
        .collect();
    let ts = build_term_structure(&slices, ModelKind::Sln).unwrap();
    let at = sln(&barrier_core::calibration::interpolate_params(&ts, 817.0 / 365.0).unwrap());
    assert!(at.sigma_bar > 0.2642 * 0.99 && at.sigma_bar < 0.3399 * 1.01, "{at:?}");

    let (fit, ctx) = ts
        .bracket_by_prices(817, ModelKind::Sln)
        .unwrap();
    let b = sln(&fit.params);
    assert!((ctx.t - 817.0 / 365.0).abs() < 1e-12);
    assert!(b.sigma_bar > 0.25 && b.sigma_bar < 0.35, "{b:?}");
}
