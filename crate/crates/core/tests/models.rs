use barrier_core::market_data::SliceContext;
use barrier_core::models::{
    density_from_model, BaseParams, GridSpec, HexParams, ModelParams, SabrParams, SlnParams,
};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 128,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn ctx() -> impl Strategy<Value = SliceContext> {
    (50.0..200.0f64, 0.7..1.0f64, 0.5..2.0f64, 0.1..3.0f64).prop_map(|(f, d, v, t)| SliceContext::new(f, d, v, t))
}

fn sln() -> impl Strategy<Value = SlnParams> {
    (0.05..0.6f64, -4.0..2.0f64).prop_map(|(s, q)| SlnParams::new(s, q).unwrap())
}

fn sabr() -> impl Strategy<Value = SabrParams> {
    (0.05..0.5f64, -0.9..0.9f64, 0.05..1.5f64, prop_oneof![Just(0.0), 0.0..1.0f64, Just(1.0)])
        .prop_map(|(s, r, n, b)| SabrParams::new(s, r, n, b).unwrap())
}

/// Hagan's expansion is only arbitrage-free for moderate vol of vol.
fn moderate_sabr() -> impl Strategy<Value = (ModelParams, SliceContext)> {
    (0.05..0.5f64, -0.7..0.7f64, 0.02..0.6f64, 0.0..1.0f64, ctx()).prop_map(|(s, r, nu_root_t, b, c)| {
        let p = SabrParams::new(s, r, nu_root_t / c.t.sqrt(), b).unwrap();
        (ModelParams::Sabr(p), c)
    })
}

fn any_model() -> impl Strategy<Value = (ModelParams, SliceContext)> {
    let hex_tails = (prop::array::uniform3(-0.5..0.5f64), prop::array::uniform3(-0.5..0.5f64), 0.005..0.1f64);
    prop_oneof![
        (sln(), ctx()).prop_map(|(p, c)| (ModelParams::Sln(p), c)),
        (sabr(), ctx()).prop_map(|(p, c)| (ModelParams::Sabr(p), c)),
        (sln(), ctx(), hex_tails).prop_map(|(p, c, (l, r, a))| {
            let mut h = HexParams::from_base(BaseParams::Sln(p), c.forward, c.t).unwrap();
            h.theta_left = l;
            h.theta_right = r;
            h.a = a;
            (ModelParams::Hex(h), c)
        }),
    ]
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn put_call_parity((model, ctx) in any_model(), x in -0.6..0.6f64) {
        let k = ctx.strike_at(x);
        // strikes outside the model's support are domain errors, not prices
        let (Ok(c), Ok(p)) = (model.call(&ctx, k), model.put(&ctx, k)) else {
            return Ok(());
        };
        let scale = ctx.scale() * ctx.forward;
        prop_assert!(((c - p) - ctx.scale() * (ctx.forward - k)).abs() <= 1e-12 * scale, "{c} {p}");
        prop_assert!(c >= 0.0 && p >= 0.0);
    }

    #[test]
    fn prices_are_homogeneous(model in prop_oneof![
        sln().prop_map(ModelParams::Sln),
        sabr().prop_map(ModelParams::Sabr),
    ], x in -0.4..0.4f64, lambda in 0.1..10.0f64, t in 0.2..2.0f64) {
        let a = SliceContext::new(100.0, 1.0, 1.0, t);
        let b = SliceContext::new(100.0 * lambda, 1.0, 1.0, t);
        let (Ok(pa), Ok(pb)) = (model.put(&a, a.strike_at(x)), model.put(&b, b.strike_at(x))) else {
            return Ok(());
        };
        prop_assert!((pb - lambda * pa).abs() <= 1e-11 * 100.0 * lambda);
    }

    #[test]
    fn prices_monotone_and_convex_in_strike((model, c) in prop_oneof![
        (sln(), ctx()).prop_map(|(p, c)| (ModelParams::Sln(p), c)),
        moderate_sabr(),
    ], x in -0.5..0.5f64) {
        let h = 0.01;
        let puts: Vec<_> = [x - h, x, x + h].iter().map(|&y| model.put(&c, c.strike_at(y))).collect();
        let [Ok(p0), Ok(p1), Ok(p2)] = [&puts[0], &puts[1], &puts[2]] else {
            return Ok(());
        };
        prop_assert!(p2 >= p1 && p1 >= p0);
        prop_assert!(p2 - 2.0 * p1 + p0 >= -1e-12 * c.forward);
    }

    #[test]
    fn sln_density_normalised(
        sigma in 0.05..0.5f64,
        // beyond |q sigma| = 1 the mirrored log-normal spikes at its support edge
        skew in -1.0..1.0f64,
        f in 50.0..200.0f64,
        t in 0.2..2.0f64,
    ) {
        let p = SlnParams::new(sigma, skew / sigma).unwrap();
        let ctx = SliceContext::undiscounted(f, t);
        let d = density_from_model(&ModelParams::Sln(p), &ctx, &GridSpec::default()).unwrap();
        prop_assert!((d.total_mass() - 1.0).abs() < 1e-4);
        prop_assert!((d.mean() - f).abs() < 1e-4 * f);
        prop_assert!(d.cdf.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn json_round_trip((model, _) in any_model()) {
        let s = serde_json::to_string(&model).unwrap();
        let back: ModelParams = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, model);
    }
}

#[test]
fn hex_with_zero_tails_is_its_base() {
    let base = SlnParams::new(0.25, -1.2).unwrap();
    let ctx = SliceContext::new(100.0, 0.95, 1.0, 1.0);
    let hex = ModelParams::Hex(HexParams::from_base(BaseParams::Sln(base), 100.0, 1.0).unwrap());
    let sln = ModelParams::Sln(base);
    for x in [-0.5, -0.2, 0.0, 0.1, 0.4] {
        let k = ctx.strike_at(x);
        let (a, b) = (hex.put(&ctx, k).unwrap(), sln.put(&ctx, k).unwrap());
        assert!((a - b).abs() < 1e-10 * 100.0, "x = {x}: {a} vs {b}");
    }
}
