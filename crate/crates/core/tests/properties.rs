//! Property tests for the invariants each module promises.

use proptest::prelude::*;

use cfmm::arbitrage::{no_arb_pair, MarketPair};
use cfmm::config::ScenarioConfig;
use cfmm::curvature::{self, gaussian_curvature, kappa_closed_form, mu_closed_form};
use cfmm::games::{self, gda_trade_solver, GameSpec, GdaConfig, StopRule};
use cfmm::greeks::{carr_madan_check, greeks_two_asset, no_arb_state, portfolio_value_at};
use cfmm::incentives::{balancer_excess_loss, sufficient_subsidy};
use cfmm::{CfmmKind, PoolState, PriceImpactFn};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn log_range(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

fn product() -> impl Strategy<Value = PoolState> {
    (log_range(1.0, 1e6), log_range(0.1, 10.0))
        .prop_map(|(r, m)| PoolState::feeless(CfmmKind::ConstantProduct, r, m * r).unwrap())
}

fn geometric() -> impl Strategy<Value = PoolState> {
    (0.1..0.9f64, log_range(1.0, 1e6), log_range(0.1, 10.0)).prop_map(|(tau, r, m)| {
        PoolState::feeless(CfmmKind::GeometricMean { tau }, r, m * r * (1.0 - tau) / tau).unwrap()
    })
}

fn sum() -> impl Strategy<Value = PoolState> {
    (log_range(1.0, 1e6), log_range(1.0, 1e6)).prop_map(|(r, rp)| PoolState::feeless(CfmmKind::ConstantSum, r, rp).unwrap())
}

fn curve() -> impl Strategy<Value = PoolState> {
    (log_range(10.0, 1e5), log_range(0.5, 2.0), log_range(1e-2, 1e2), 0.8..1.25f64).prop_map(|(r, alpha, shape, skew)| {
        let beta = shape * alpha * (2.0 * r).powi(3);
        PoolState::feeless(CfmmKind::Curve { alpha, beta }, r, r * skew).unwrap()
    })
}

fn convex_pool() -> impl Strategy<Value = PoolState> {
    prop_oneof![product(), geometric()]
}

fn any_pool() -> impl Strategy<Value = PoolState> {
    prop_oneof![sum(), product(), geometric(), curve()]
}

/// A trade size as a fraction of the domain on either side.
fn trade_in_domain(pool: &PoolState, u: f64) -> f64 {
    let (lo, hi) = pool.trade_domain();
    if u < 0.0 {
        -u * lo * 0.9
    } else {
        u * hi * 0.9
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Pool invariants.

    #[test]
    fn trades_conserve_the_invariant(pool in any_pool(), u in -1.0..1.0f64) {
        let d = trade_in_domain(&pool, u);
        let after = pool.apply_trade(d).unwrap();
        let (k0, k1) = (pool.invariant_value(), after.invariant_value());
        // Curve's invariant can sit near zero; measure against its terms.
        let scale = match pool.kind() {
            CfmmKind::Curve { alpha, .. } => alpha * (pool.reserve_traded() + pool.reserve_numeraire()),
            _ => k0.abs(),
        };
        prop_assert!((k1 - k0).abs() <= 1e-10 * scale, "{k0} -> {k1}");
    }

    #[test]
    fn marginal_price_is_nondecreasing(pool in any_pool()) {
        let n = 1000;
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=n {
            let d = trade_in_domain(&pool, 2.0 * i as f64 / n as f64 - 1.0);
            let g = pool.marginal_price(d).unwrap();
            prop_assert!(g >= prev * (1.0 - 1e-12), "g({d}) = {g} < {prev}");
            prev = g;
        }
    }

    #[test]
    fn trade_output_slope_is_marginal_price(pool in any_pool(), u in -0.8..0.8f64) {
        // Past about ten reserves of selling the output is within ulps of its
        // limit and a difference quotient is all rounding.
        let d = trade_in_domain(&pool, u).max(-10.0 * pool.reserve_traded());
        let h = 1e-6 * (pool.reserve_traded() - d).min(d - pool.trade_domain().0);
        let fd = (pool.trade_output(d + h).unwrap() - pool.trade_output(d - h).unwrap()) / (2.0 * h);
        prop_assert!(rel(fd, pool.marginal_price(d).unwrap()) < 1e-5);
    }

    #[test]
    fn unit_fee_changes_nothing(pool in any_pool(), u in -0.9..=0.0f64) {
        let d = trade_in_domain(&pool, u);
        prop_assert_eq!(pool.marginal_price_with_fee(d).unwrap(), pool.marginal_price(d).unwrap());
    }

    #[test]
    fn half_weight_geometric_mean_is_constant_product(r in log_range(1.0, 1e6), u in -0.9..0.9f64) {
        let p = PoolState::feeless(CfmmKind::ConstantProduct, r, r).unwrap();
        let g = PoolState::feeless(CfmmKind::GeometricMean { tau: 0.5 }, r, r).unwrap();
        let d = trade_in_domain(&p, u).max(g.trade_domain().0 * 0.9);
        prop_assert!(rel(p.trade_output(d).unwrap(), g.trade_output(d).unwrap()) < 1e-12);
        prop_assert!(rel(p.marginal_price(d).unwrap(), g.marginal_price(d).unwrap()) < 1e-12);
    }

    // Curvature.

    #[test]
    fn closed_form_mu_is_tight(pool in prop_oneof![sum(), product(), geometric()]) {
        let closed = mu_closed_form(&pool).unwrap().mu.unwrap_or(0.0);
        let numeric = curvature::mu_numeric(&PriceImpactFn::Pool(pool)).unwrap();
        if closed == 0.0 {
            prop_assert!(numeric.abs() <= 1e-12 * pool.spot_price());
        } else {
            prop_assert!(rel(closed, numeric) < 1e-4, "{closed} vs {numeric}");
        }
    }

    #[test]
    fn deeper_pools_are_flatter(pool in convex_pool(), grow in 1.1..10.0f64, frac in 0.01..0.5f64) {
        let deeper = pool.with_reserves(grow * pool.reserve_traded(), grow * pool.reserve_numeraire()).unwrap();
        let l = frac * pool.reserve_traded();
        let mu = |p: &PoolState| mu_closed_form(p).unwrap().mu.unwrap();
        let kappa = |p: &PoolState| kappa_closed_form(p, l).unwrap().kappa.unwrap();
        prop_assert!(mu(&deeper) < mu(&pool));
        prop_assert!(kappa(&deeper) < kappa(&pool));
    }

    #[test]
    fn kappa_never_exceeds_mu(pool in convex_pool(), frac in 0.001..5.0f64) {
        let l = frac * pool.reserve_traded();
        let mu = mu_closed_form(&pool).unwrap().mu.unwrap();
        let kappa = kappa_closed_form(&pool, l).unwrap().kappa.unwrap();
        prop_assert!(kappa < mu);
    }

    #[test]
    fn gaussian_curvature_sign_matches_price_slope(
        r in log_range(2.0, 1e4),
        alpha in 0.5..2.0f64,
        shape in log_range(1e-3, 1.0),
        u in -0.9..0.9f64,
    ) {
        let beta = shape * alpha * r.powi(3);
        let pool = PoolState::feeless(CfmmKind::Curve { alpha, beta }, r, r).unwrap();
        let d = trade_in_domain(&pool, u);
        let dp = pool.trade_output(d).unwrap();
        prop_assume!(curvature::curve_convexity_check(&pool, d, dp).unwrap().holds);
        let k = gaussian_curvature(&pool, d, dp).unwrap();
        let h = 1e-5 * (pool.reserve_traded() - d);
        let slope = (pool.marginal_price(d + h).unwrap() - pool.marginal_price(d - h).unwrap()) / (2.0 * h);
        prop_assert_eq!(k > 0.0, slope > 0.0, "k = {}, g' = {}", k, slope);
    }

    // Arbitrage.

    #[test]
    fn arbitrage_price_is_sandwiched(f in convex_pool(), g in convex_pool()) {
        prop_assume!((f.spot_price() - g.spot_price()).abs() > 1e-9 * g.spot_price());
        let pair = MarketPair::new(f.into(), g.into()).unwrap().certify_closed_form().unwrap();
        let r = no_arb_pair(&pair).unwrap();
        let c = pair.certificate.unwrap();
        prop_assert!(pair.m0_e <= r.m_a * (1.0 + 1e-12) && r.m_a <= pair.m0_s * (1.0 + 1e-12));
        prop_assert!(r.delta_star <= pair.gap() / c.kappa * (1.0 + 1e-12));
        prop_assert!(r.price_move <= r.bound.unwrap() + 1e-9);
    }

    // Informed-trader game.

    #[test]
    fn edge_sits_between_curvature_parabolas(
        pool in convex_pool(),
        alpha in 0.5..0.99f64,
        drop in 0.01..0.3f64,
        gamma in 0.9..=1.0f64,
        frac in 0.05..0.9f64,
        t in 0.0..=1.0f64,
    ) {
        let m0 = gamma * pool.spot_price();
        let l = frac * pool.reserve_traded();
        let spec = GameSpec { alpha, m0, m1: m0 * (1.0 - drop), gamma, interval_l: l };
        let g = PriceImpactFn::Pool(pool);
        let mu = games::global_mu(&pool).unwrap();
        let kappa = curvature::kappa_on_interval(&g, l).unwrap();
        let d = t * l;
        let ev = games::informed_edge(&spec, &g, d).unwrap();
        let e = spec.edge();
        let tol = 1e-9 * (1.0 + m0 * d);
        prop_assert!(e * d - 0.5 * mu * gamma * gamma * d * d <= ev + tol);
        prop_assert!(-ev >= 0.5 * kappa * gamma * gamma * d * d - e * d - tol);
        prop_assert_eq!(games::lp_expected_payoff(&spec, &g, d).unwrap(), -ev);
    }

    #[test]
    fn optimum_dominates_lower_bound(pool in convex_pool(), alpha in 0.5..0.99f64, drop in 0.0..0.3f64, gamma in 0.9..=1.0f64) {
        let m0 = gamma * pool.spot_price();
        let spec = GameSpec { alpha, m0, m1: m0 * (1.0 - drop), gamma, interval_l: pool.reserve_traded() };
        let opt = games::informed_edge_opt(&spec, &PriceImpactFn::Pool(pool)).unwrap();
        prop_assert!(opt.value >= opt.lower_bound - 1e-9 * (1.0 + opt.lower_bound));
    }

    #[test]
    fn higher_curvature_lowers_the_edge_bound(pool in convex_pool(), shrink in 0.1..0.9f64, alpha in 0.5..0.99f64, drop in 0.01..0.3f64) {
        // Shrinking both reserves keeps the price and raises μ.
        let steep = pool.with_reserves(shrink * pool.reserve_traded(), shrink * pool.reserve_numeraire()).unwrap();
        let m0 = pool.spot_price();
        let spec = GameSpec { alpha, m0, m1: m0 * (1.0 - drop), gamma: 1.0, interval_l: 1.0 };
        let flat = games::informed_edge_opt(&spec, &PriceImpactFn::Pool(pool)).unwrap();
        let steep = games::informed_edge_opt(&spec, &PriceImpactFn::Pool(steep)).unwrap();
        prop_assert!(flat.mu < steep.mu);
        prop_assert!(flat.lower_bound > steep.lower_bound);
    }

    #[test]
    fn gda_lands_on_the_target_price(pool in prop_oneof![product(), geometric()], move_by in log_range(0.8, 1.25)) {
        let target = pool.spot_price() * move_by;
        let tol = 1e-8;
        let r = gda_trade_solver(&pool, &GdaConfig::new(target, tol, 10_000)).unwrap();
        if r.stop == StopRule::Tolerance {
            // The solver's reserves are (R + Δ, R' − Δ'); its h is Ψx − pΨy.
            let (x, y) = (pool.reserve_traded() + r.delta, pool.reserve_numeraire() - r.delta_prime);
            let p = pool.kind().partials(x, y);
            prop_assert!((p.fx / p.fy - target).abs() <= 10.0 * tol / p.fy, "price {} vs {target}", p.fx / p.fy);
        }
    }

    // Subsidies.

    #[test]
    fn traded_subsidy_is_consistent_with_numeraire_subsidy(f in convex_pool(), g in convex_pool()) {
        prop_assume!((f.spot_price() - g.spot_price()).abs() > 1e-9 * g.spot_price());
        let pair = MarketPair::new(f.into(), g.into()).unwrap().certify_closed_form().unwrap();
        let c = pair.certificate.unwrap();
        let s = sufficient_subsidy(c.mu, c.kappa, pair.m0_s, pair.m0_e).unwrap();
        let r = no_arb_pair(&pair).unwrap();
        prop_assert!(s.subsidy_traded <= s.subsidy_numeraire / r.m_a + 1e-12);
    }

    #[test]
    fn excess_loss_is_a_portfolio_value_difference(
        spot in log_range(0.1, 10.0),
        t1 in 0.1..0.9f64, r1 in log_range(10.0, 1e5),
        t2 in 0.1..0.9f64, r2 in log_range(10.0, 1e5),
        frac in 0.0..0.9f64,
    ) {
        let pool = |tau: f64, r: f64| PoolState::feeless(CfmmKind::GeometricMean { tau }, r, spot * r * (1.0 - tau) / tau).unwrap();
        let (a, b) = (pool(t1, r1), pool(t2, r2));
        let d = frac * r1.min(r2);
        // Value in the traded coin at each pool's own post-trade price.
        let value = |p: &PoolState| {
            let s = p.apply_trade(d).unwrap();
            s.reserve_traded() + s.reserve_numeraire() / s.spot_price()
        };
        let (va, vb) = (value(&a), value(&b));
        let delta = balancer_excess_loss(&a, &b, d).unwrap();
        prop_assert!((delta - (vb - va)).abs() <= 1e-10 * va.max(vb));
    }

    // Greeks.

    #[test]
    fn delta_is_the_slope_of_portfolio_value(pool in prop_oneof![product(), geometric(), curve()], shift in log_range(0.9, 1.1)) {
        let m = match pool.kind() {
            CfmmKind::Curve { .. } => pool.spot_price() * (1.0 + (shift - 1.0) * 0.2),
            _ => pool.spot_price() * shift,
        };
        let gr = greeks_two_asset(&pool, m).unwrap();
        let h = 1e-6 * m;
        let fd = (portfolio_value_at(&pool, m + h).unwrap() - portfolio_value_at(&pool, m - h).unwrap()) / (2.0 * h);
        prop_assert!(rel(fd, gr.p_delta) < 1e-5, "{fd} vs {}", gr.p_delta);
        prop_assert!(gr.p_gamma < 0.0);
    }

    #[test]
    fn reserve_moves_cancel_in_value(pool in prop_oneof![product(), geometric(), curve()], shift in log_range(0.98, 1.02)) {
        let m = pool.spot_price() * shift;
        let state = |x: f64| no_arb_state(&pool, x).unwrap();
        let h = 1e-4 * m;
        let d = |f: &dyn Fn(&PoolState) -> f64| {
            let g = |x: f64| f(&state(x));
            let c = |h: f64| (g(m + h) - g(m - h)) / (2.0 * h);
            (4.0 * c(0.5 * h) - c(h)) / 3.0
        };
        let dr = d(&|s| s.reserve_traded());
        let drp = d(&|s| s.reserve_numeraire());
        prop_assert!((m * dr + drp).abs() <= 1e-8 * (m * dr).abs().max(1.0), "{} + {}", m * dr, drp);
    }
}

#[test]
fn carr_madan_residual_shrinks_at_quadrature_rate() {
    // Quadrature error alone, on grids that leave F strictly inside a cell.
    let mut prev = f64::INFINITY;
    for n in [20, 40, 80, 160] {
        let c = carr_madan_check(1.0, 0.0, 2.5, n, 1e3).unwrap();
        assert_eq!(c.intervals, n);
        if prev.is_finite() {
            assert!(prev / c.quadrature_error >= 4.0, "{n}: {prev} -> {}", c.quadrature_error);
        }
        prev = c.quadrature_error;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn configs_round_trip(
        r in log_range(1.0, 1e6),
        rp in log_range(1.0, 1e6),
        tau in 0.1..0.9f64,
        seed in any::<u64>(),
        sigma in 0.001..0.1f64,
    ) {
        let text = format!(r#"{{
            "version": 1,
            "seed": {seed},
            "pools": {{
                "a": {{"kind": "constant_product", "reserve_traded": {r:?}, "reserve_numeraire": {rp:?}, "fee_gamma": 0.997}},
                "b": {{"kind": "geometric_mean", "params": {{"tau": {tau:?}}}, "reserve_traded": {rp:?}, "reserve_numeraire": {r:?}, "fee_gamma": 1.0}}
            }},
            "sim": {{"external": "a", "secondary": "b", "process": {{"type": "walk", "sigma": {sigma:?}}}, "rounds": 5}}
        }}"#);
        let parsed = ScenarioConfig::from_json(&text).unwrap();
        let back: serde_json::Value = serde_json::from_str(&parsed.to_json()).unwrap();
        let original: serde_json::Value = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, original);
    }
}
