//! μ-stability and κ-liquidity constants.
//!
//! A price impact function `g` is μ-stable on `[0, L]` when
//! `g(0) − g(−Δ) ≤ μΔ` and κ-liquid when `g(0) − g(−Δ) ≥ κΔ`. For convex `g`
//! the tightest μ is `g'(0)` on the whole half line and the tightest κ is the
//! secant `(g(0) − g(−L))/L`.
//!
//! Curve pools are the exception: their price impact is concave near the peg,
//! so `g'(0)` is only the local slope there. [`certify`] computes interval
//! constants from the secant extremes for any `g`.

use serde::{Deserialize, Serialize};

use crate::error::{CfmmError, Result};
use crate::impact::PriceImpactFn;
use crate::numeric;
use crate::pool::{CfmmKind, PoolState};

/// Tolerance for a pool to count as sitting at the peg `g(0) = 1`.
pub const PEG_TOLERANCE: f64 = 1e-9;

/// Relative secant-slope increase tolerated before reporting non-convexity.
pub const CONVEXITY_TOLERANCE: f64 = 1e-9;

/// Trade-size range a bound is certified on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interval {
    Finite(f64),
    Infinite,
    /// Only the slope at zero; no interval is certified.
    Local,
}

impl Interval {
    pub fn length(&self) -> Option<f64> {
        match *self {
            Interval::Finite(l) => Some(l),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBounds {
    pub mu: Option<f64>,
    pub kappa: Option<f64>,
    pub interval_l: Interval,
}

impl CurvatureBounds {
    pub fn new(mu: Option<f64>, kappa: Option<f64>, interval_l: Interval) -> Result<Self> {
        for v in [mu, kappa].into_iter().flatten() {
            if !(v >= 0.0) {
                return Err(CfmmError::invalid(format!("curvature constants must be nonnegative, got {v}")));
            }
        }
        if let Interval::Finite(l) = interval_l {
            if !(l > 0.0) {
                return Err(CfmmError::invalid(format!("interval length {l} must be positive")));
            }
        }
        Ok(CurvatureBounds { mu, kappa, interval_l })
    }
}

/// Closed-form μ. Constant product and geometric mean hold globally; the
/// Curve value is the slope at the peg only.
pub fn mu_closed_form(pool: &PoolState) -> Result<CurvatureBounds> {
    let r = pool.reserve_traded();
    let g0 = pool.spot_price();
    let (mu, interval) = match pool.kind() {
        CfmmKind::ConstantSum => (0.0, Interval::Finite(pool.reserve_numeraire())),
        CfmmKind::ConstantProduct => (2.0 * g0 / r, Interval::Infinite),
        CfmmKind::GeometricMean { tau } => {
            let xi = tau / (1.0 - tau);
            ((1.0 + xi) * g0 / r, Interval::Infinite)
        }
        CfmmKind::Curve { alpha, beta } => {
            if (g0 - 1.0).abs() > PEG_TOLERANCE {
                return Err(CfmmError::PegRequired { spot: g0 });
            }
            let pv = pool.portfolio_value(g0);
            (32.0 * beta / (8.0 * beta * pv + alpha * pv.powi(4)), Interval::Local)
        }
    };
    CurvatureBounds::new(Some(mu), None, interval)
}

/// Closed-form κ over `[0, L]`: the secant slope of `g` on the sell side.
pub fn kappa_closed_form(pool: &PoolState, l: f64) -> Result<CurvatureBounds> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(CfmmError::invalid(format!("interval length {l} must be positive and finite")));
    }
    let (dmin, _) = pool.trade_domain();
    if -l < dmin {
        return Err(CfmmError::DomainExceeded { delta: -l, min: dmin, max: 0.0 });
    }
    let r = pool.reserve_traded();
    let g0 = pool.spot_price();
    let kappa = match pool.kind() {
        CfmmKind::ConstantSum => 0.0,
        CfmmKind::ConstantProduct => g0 / l * (1.0 - (1.0 + l / r).powi(-2)),
        CfmmKind::GeometricMean { tau } => {
            let xi = tau / (1.0 - tau);
            g0 / l * (1.0 - (1.0 + l / r).powf(-(1.0 + xi)))
        }
        CfmmKind::Curve { .. } => (g0 - pool.marginal_price(-l)?) / l,
    };
    CurvatureBounds::new(None, Some(kappa), Interval::Finite(l))
}

/// Natural length scale of `g` for finite-difference steps.
fn scale(g: &PriceImpactFn) -> f64 {
    match g {
        PriceImpactFn::Pool(p) => p.reserve_traded(),
        _ => {
            let (lo, hi) = g.domain();
            let span = (-lo).max(hi);
            if span.is_finite() && span > 0.0 {
                span.min(1.0)
            } else {
                1.0
            }
        }
    }
}

/// Richardson-extrapolated one-sided estimate of `g'(0)`. Uses the forward
/// side when the domain extends past zero, the backward side otherwise.
pub fn derivative_at_zero(g: &PriceImpactFn) -> Result<f64> {
    if let PriceImpactFn::Constant(_) = g {
        return Ok(0.0);
    }
    let h = (1e-7 * scale(g)).max(1e-7);
    let (lo, hi) = g.domain();
    let eval = |t: f64| g.eval(t);
    if hi >= h {
        numeric::forward_derivative(eval, 0.0, h)
    } else if lo <= -h {
        numeric::backward_derivative(eval, 0.0, h)
    } else {
        Err(CfmmError::invalid("price impact domain too short for a derivative at zero"))
    }
}

/// Checks that secant slopes of `g` from zero do not increase away from zero
/// on the sell side (or decrease on the buy side), as convexity requires.
pub fn check_convexity(g: &PriceImpactFn) -> Result<()> {
    let s = scale(g);
    let (lo, hi) = g.domain();
    let g0 = g.eval(0.0)?;
    let steps = [1e-3 * s, 1e-2 * s, 1e-1 * s];
    let noise = |h: f64| 64.0 * f64::EPSILON * g0.abs() / h;

    let sell: Vec<(f64, f64)> = steps
        .iter()
        .filter(|&&h| -h >= lo)
        .map(|&h| g.eval(-h).map(|v| (h, (g0 - v) / h)))
        .collect::<Result<_>>()?;
    for w in sell.windows(2) {
        let (narrow, wide) = (w[0].1, w[1].1);
        if wide > narrow + CONVEXITY_TOLERANCE * narrow.abs() + noise(w[0].0) {
            return Err(CfmmError::NonConvexDetected { narrow, wide });
        }
    }
    let buy: Vec<(f64, f64)> = steps
        .iter()
        .filter(|&&h| h <= hi)
        .map(|&h| g.eval(h).map(|v| (h, (v - g0) / h)))
        .collect::<Result<_>>()?;
    for w in buy.windows(2) {
        let (narrow, wide) = (w[0].1, w[1].1);
        if wide < narrow - CONVEXITY_TOLERANCE * narrow.abs() - noise(w[0].0) {
            return Err(CfmmError::NonConvexDetected { narrow, wide });
        }
    }
    Ok(())
}

/// Largest subgradient of a convex `g` at zero.
pub fn mu_numeric(g: &PriceImpactFn) -> Result<f64> {
    check_convexity(g)?;
    Ok(derivative_at_zero(g)?.max(0.0))
}

/// Secant `(g(0) − g(−L))/L`.
pub fn kappa_numeric(g: &PriceImpactFn, l: f64) -> Result<f64> {
    if !(l > 0.0) {
        return Err(CfmmError::invalid(format!("interval length {l} must be positive")));
    }
    Ok(((g.eval(0.0)? - g.eval(-l)?) / l).max(0.0))
}

/// Sell-side secant slopes `(g(0) − g(−t))/t` on a mixed geometric and
/// linear grid over `(0, L]`.
fn secant_grid(g: &PriceImpactFn, l: f64, sell: bool) -> Result<Vec<(f64, f64)>> {
    let g0 = g.eval(0.0)?;
    let mut ts: Vec<f64> = (0..=96).map(|i| l * 10f64.powf(-6.0 + 6.0 * i as f64 / 96.0)).collect();
    ts.extend((1..=256).map(|i| l * i as f64 / 256.0));
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts.into_iter()
        .map(|t| {
            let s = if sell { (g0 - g.eval(-t)?) / t } else { (g.eval(t)? - g0) / t };
            Ok((t, s))
        })
        .collect()
}

fn refine_extreme(g: &PriceImpactFn, grid: &[(f64, f64)], sell: bool, maximize: bool) -> Result<f64> {
    let g0 = g.eval(0.0)?;
    let secant = |t: f64| {
        let v = if sell { g.eval(-t) } else { g.eval(t) };
        match v {
            Ok(v) if sell => (g0 - v) / t,
            Ok(v) => (v - g0) / t,
            Err(_) => f64::NAN,
        }
    };
    let key = |s: f64| if maximize { s } else { -s };
    let (i, &(_, best)) = grid
        .iter()
        .enumerate()
        .max_by(|a, b| key(a.1 .1).total_cmp(&key(b.1 .1)))
        .ok_or_else(|| CfmmError::invalid("empty secant grid"))?;
    let a = if i == 0 { grid[0].0 * 0.5 } else { grid[i - 1].0 };
    let b = grid.get(i + 1).map_or(grid[i].0, |p| p.0);
    let (_, refined) = numeric::golden_max(|t| key(secant(t)), a, b, 1e-12 * b);
    let refined = key(refined);
    Ok(if maximize { best.max(refined) } else { best.min(refined) })
}

/// Tightest μ on `[0, L]`: the supremum of sell-side secant slopes, which
/// includes the limit `g'(0)`.
pub fn mu_on_interval(g: &PriceImpactFn, l: f64) -> Result<f64> {
    let grid = secant_grid(g, l, true)?;
    let d0 = derivative_at_zero(g).unwrap_or(0.0);
    Ok(refine_extreme(g, &grid, true, true)?.max(d0).max(0.0))
}

/// Tightest κ on `[0, L]`: the infimum of sell-side secant slopes.
pub fn kappa_on_interval(g: &PriceImpactFn, l: f64) -> Result<f64> {
    let grid = secant_grid(g, l, true)?;
    let d0 = derivative_at_zero(g).unwrap_or(f64::INFINITY);
    Ok(refine_extreme(g, &grid, true, false)?.min(d0).max(0.0))
}

/// Buy-side κ on `[0, L]`: the largest κ with `f(Δ) − f(0) ≥ κΔ`.
pub fn kappa_buy_on_interval(f: &PriceImpactFn, l: f64) -> Result<f64> {
    let grid = secant_grid(f, l, false)?;
    let d0 = derivative_at_zero(f).unwrap_or(f64::INFINITY);
    Ok(refine_extreme(f, &grid, false, false)?.min(d0).max(0.0))
}

/// μ and κ certified on `[0, L]` for any `g`.
pub fn certify(g: &PriceImpactFn, l: f64) -> Result<CurvatureBounds> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(CfmmError::invalid(format!("interval length {l} must be positive and finite")));
    }
    let (lo, _) = g.domain();
    if -l < lo {
        return Err(CfmmError::DomainExceeded { delta: -l, min: lo, max: 0.0 });
    }
    CurvatureBounds::new(Some(mu_on_interval(g, l)?), Some(kappa_on_interval(g, l)?), Interval::Finite(l))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub passed: bool,
    pub samples: usize,
    pub interval_l: f64,
    /// Smallest `μΔ − (g(0) − g(−Δ))` over the grid, and where it occurs.
    pub min_upper_slack: Option<f64>,
    pub min_upper_at: Option<f64>,
    /// Smallest `(g(0) − g(−Δ)) − κΔ` over the grid, and where it occurs.
    pub min_lower_slack: Option<f64>,
    pub min_lower_at: Option<f64>,
    pub violations: usize,
    pub first_violation: Option<f64>,
}

/// Samples `κΔ ≤ g(0) − g(−Δ) ≤ μΔ` at `samples` points of `(0, L]`.
///
/// Infinite intervals are sampled over the pool's traded reserve (or unit
/// length for non-pool functions).
pub fn verify_stability(g: &PriceImpactFn, bounds: &CurvatureBounds, samples: usize) -> Result<StabilityReport> {
    if samples < 2 {
        return Err(CfmmError::invalid("verify_stability needs at least two samples"));
    }
    let l = match bounds.interval_l {
        Interval::Finite(l) => l,
        _ => scale(g),
    };
    let (lo, _) = g.domain();
    let l = l.min(-lo);
    let g0 = g.eval(0.0)?;
    let mut report = StabilityReport {
        passed: true,
        samples,
        interval_l: l,
        min_upper_slack: None,
        min_upper_at: None,
        min_lower_slack: None,
        min_lower_at: None,
        violations: 0,
        first_violation: None,
    };
    for i in 1..=samples {
        let d = l * i as f64 / samples as f64;
        let drop = g0 - g.eval(-d)?;
        let tol = 1e-12 * (g0.abs() + drop.abs());
        let mut violated = false;
        if let Some(mu) = bounds.mu {
            let slack = mu * d - drop;
            if report.min_upper_slack.is_none_or(|s| slack < s) {
                report.min_upper_slack = Some(slack);
                report.min_upper_at = Some(d);
            }
            violated |= slack < -tol;
        }
        if let Some(kappa) = bounds.kappa {
            let slack = drop - kappa * d;
            if report.min_lower_slack.is_none_or(|s| slack < s) {
                report.min_lower_slack = Some(slack);
                report.min_lower_at = Some(d);
            }
            violated |= slack < -tol;
        }
        if violated {
            report.violations += 1;
            report.first_violation.get_or_insert(d);
        }
    }
    report.passed = report.violations == 0;
    Ok(report)
}

/// Curvature of the level set `Ψ = k` at reserves `(R − Δ, R' + Δ')`,
/// oriented so that convex level sets are positive. Equals
/// `g'(Δ) / (1 + g(Δ)²)^{3/2}` on the level set.
pub fn gaussian_curvature(pool: &PoolState, delta: f64, delta_prime: f64) -> Result<f64> {
    let x = pool.reserve_traded() - delta;
    let y = pool.reserve_numeraire() + delta_prime;
    if !(x > 0.0 && y > 0.0) {
        return Err(CfmmError::DomainExceeded { delta, min: f64::NEG_INFINITY, max: pool.reserve_traded() });
    }
    // Written for F = −Ψ, whose sublevel sets are the convex region above the curve.
    let p = pool.kind().partials(x, y);
    let (fx, fy, fxx, fxy, fyy) = (-p.fx, -p.fy, -p.fxx, -p.fxy, -p.fyy);
    let num = fy * fy * fxx - 2.0 * fx * fy * fxy + fx * fx * fyy;
    Ok(num / (fx * fx + fy * fy).powf(1.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityCheck {
    /// `α(R − Δ)²(R' + Δ')`.
    pub a: f64,
    /// `α(R − Δ)(R' + Δ')²`.
    pub b: f64,
    pub a_exceeds_beta: bool,
    pub b_exceeds_alpha: bool,
    /// `2(r + 1/r) ≥ 1` with `r = A/B`.
    pub ratio_condition: bool,
    /// `(R − Δ)(R' + Δ') > 1`.
    pub reserve_product: f64,
    pub reserve_product_condition: bool,
    pub holds: bool,
    /// Smallest relative slack among the conditions; negative when one fails.
    pub margin: f64,
}

/// Sufficient conditions for a convex Curve level set at `(R − Δ, R' + Δ')`.
pub fn curve_convexity_check(pool: &PoolState, delta: f64, delta_prime: f64) -> Result<ConvexityCheck> {
    let CfmmKind::Curve { alpha, beta } = pool.kind() else {
        return Err(CfmmError::invalid(format!("convexity check needs a curve pool, got {}", pool.kind().name())));
    };
    let x = pool.reserve_traded() - delta;
    let y = pool.reserve_numeraire() + delta_prime;
    let a = alpha * x * x * y;
    let b = alpha * x * y * y;
    let r = a / b;
    let ratio = 2.0 * (r + 1.0 / r);
    let xy = x * y;
    let margin = [a / beta - 1.0, b / alpha - 1.0, ratio - 1.0, xy - 1.0]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let (a_ok, b_ok, r_ok, xy_ok) = (a > beta, b > alpha, ratio >= 1.0, xy > 1.0);
    Ok(ConvexityCheck {
        a,
        b,
        a_exceeds_beta: a_ok,
        b_exceeds_alpha: b_ok,
        ratio_condition: r_ok,
        reserve_product: xy,
        reserve_product_condition: xy_ok,
        holds: a_ok && b_ok && r_ok && xy_ok,
        margin,
    })
}
