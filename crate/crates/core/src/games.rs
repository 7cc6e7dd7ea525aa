//! LP versus trader payoffs: the uninformed profitable-trade bound, the
//! one-shot informed-trader game, and a multiperiod informed trader that
//! solves for its trades by gradient descent-ascent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{self, Interval};
use crate::error::{CfmmError, Result};
use crate::impact::PriceImpactFn;
use crate::numeric;
use crate::pool::{CfmmKind, PoolState};

/// Absolute tolerance for the edge quadrature.
pub const EDGE_QUADRATURE_TOL: f64 = 1e-10;

const MERGE_TOLERANCE: f64 = 1e-7;
const MAX_MIXTURE_STATES: usize = 1 << 16;

/// Relative tolerance for checking `m0 = γ·g(0)`.
pub const SPOT_TOLERANCE: f64 = 1e-9;

/// μ-stability constant of a pool over its whole sell side.
///
/// Closed form for constant sum, product and geometric mean. Curve's price
/// impact is not convex, so its μ is the secant supremum over the sell-side
/// domain capped at ten times the traded reserve.
pub fn global_mu(pool: &PoolState) -> Result<f64> {
    match pool.kind() {
        CfmmKind::Curve { .. } => {
            let (dmin, _) = pool.trade_domain();
            let l = (-dmin).min(10.0 * pool.reserve_traded());
            curvature::mu_on_interval(&PriceImpactFn::Pool(*pool), l)
        }
        _ => Ok(curvature::mu_closed_form(pool)?.mu.unwrap_or(0.0)),
    }
}

/// Largest trade size `(1 − γ)m_a/μ` below which fees are guaranteed to
/// cover the LP's opportunity cost. Infinite when μ = 0.
pub fn max_profitable_trade(pool: &PoolState, m_a: f64) -> Result<f64> {
    if !(m_a > 0.0) {
        return Err(CfmmError::invalid(format!("price {m_a} must be positive")));
    }
    let mu = global_mu(pool)?;
    if mu == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((1.0 - pool.fee_gamma()) * m_a / mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpportunityCost {
    /// `g(−Δ)Δ − Δ'` with `Δ'` the numéraire received for selling `Δ`.
    pub exact: f64,
    /// `−μΔ²`.
    pub bound: f64,
}

/// LP opportunity cost of absorbing a sale of `delta`, and its curvature bound.
pub fn impermanent_loss_lb(pool: &PoolState, delta: f64) -> Result<OpportunityCost> {
    if delta < 0.0 {
        return Err(CfmmError::invalid(format!("trade size {delta} must be nonnegative")));
    }
    let received = -pool.trade_output(-delta)?;
    let exact = pool.marginal_price(-delta)? * delta - received;
    let bound = -global_mu(pool)? * delta * delta;
    Ok(OpportunityCost { exact, bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub alpha: f64,
    pub m0: f64,
    pub m1: f64,
    pub gamma: f64,
    pub interval_l: f64,
}

impl GameSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.5 && self.alpha < 1.0) {
            return Err(CfmmError::invalid(format!("alpha = {} must lie in [1/2, 1)", self.alpha)));
        }
        if !(self.m1 > 0.0 && self.m1 <= self.m0) {
            return Err(CfmmError::invalid(format!("need 0 < m1 <= m0, got m1 = {}, m0 = {}", self.m1, self.m0)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(CfmmError::invalid(format!("gamma = {} must lie in (0, 1]", self.gamma)));
        }
        if !(self.interval_l > 0.0) {
            return Err(CfmmError::invalid(format!("interval_l = {} must be positive", self.interval_l)));
        }
        Ok(())
    }

    /// `α(m0 − m1)`.
    pub fn edge(&self) -> f64 {
        self.alpha * (self.m0 - self.m1)
    }

    /// Expected price of holding the traded coin.
    pub fn hold_price(&self) -> f64 {
        self.alpha * self.m1 + (1.0 - self.alpha) * self.m0
    }

    fn check_spot(&self, g: &PriceImpactFn) -> Result<()> {
        let quoted = self.gamma * g.spot()?;
        if (quoted - self.m0).abs() > SPOT_TOLERANCE * self.m0 {
            return Err(CfmmError::invalid(format!("game needs m0 = gamma*g(0) = {quoted}, got {}", self.m0)));
        }
        Ok(())
    }
}

/// `∫₀^Δ γ g(−γt) dt`, by adaptive Simpson.
fn fee_proceeds(spec: &GameSpec, g: &PriceImpactFn, a: f64, b: f64) -> Result<f64> {
    let gamma = spec.gamma;
    let (lo, _) = g.domain();
    if -gamma * b < lo {
        return Err(CfmmError::DomainExceeded { delta: -gamma * b, min: lo, max: 0.0 });
    }
    let v = numeric::integrate(|t| gamma * g.eval(-gamma * t).unwrap_or(f64::NAN), a, b, EDGE_QUADRATURE_TOL);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CfmmError::NoRoot("edge integrand not finite".into()))
    }
}

/// Informed trader's expected edge `E_V(Δ)`.
pub fn informed_edge(spec: &GameSpec, g: &PriceImpactFn, delta: f64) -> Result<f64> {
    spec.validate()?;
    if delta < 0.0 {
        return Err(CfmmError::invalid(format!("trade size {delta} must be nonnegative")));
    }
    Ok(fee_proceeds(spec, g, 0.0, delta)? - spec.hold_price() * delta)
}

/// LP expected payoff, the exact negation of [`informed_edge`].
pub fn lp_expected_payoff(spec: &GameSpec, g: &PriceImpactFn, delta: f64) -> Result<f64> {
    Ok(-informed_edge(spec, g, delta)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeOptimum {
    pub delta_opt: f64,
    pub value: f64,
    /// `α²(m0 − m1)²/(2μγ²)`.
    pub lower_bound: f64,
    pub mu: f64,
}

/// Maximizes `E_V` over `Δ ≥ 0` with μ from [`global_mu`] for pools, or the
/// sell-side secant supremum over the search range otherwise.
pub fn informed_edge_opt(spec: &GameSpec, g: &PriceImpactFn) -> Result<EdgeOptimum> {
    let mu = match g {
        PriceImpactFn::Pool(p) => global_mu(p)?,
        other => {
            let (lo, _) = other.domain();
            curvature::mu_on_interval(other, (-lo).min(1e6))?
        }
    };
    informed_edge_opt_with_mu(spec, g, mu)
}

/// As [`informed_edge_opt`] with a caller-certified μ.
pub fn informed_edge_opt_with_mu(spec: &GameSpec, g: &PriceImpactFn, mu: f64) -> Result<EdgeOptimum> {
    spec.validate()?;
    spec.check_spot(g)?;
    if mu == 0.0 {
        return Err(CfmmError::MuZero);
    }
    let gamma = spec.gamma;
    let lower_bound = spec.edge().powi(2) / (2.0 * mu * gamma * gamma);
    if spec.edge() == 0.0 {
        return Ok(EdgeOptimum { delta_opt: 0.0, value: 0.0, lower_bound, mu });
    }

    // E_V is concave: its slope γg(−γΔ) − hold_price falls as Δ grows. Grow
    // the bracket until the slope turns negative or the domain ends.
    let (lo, _) = g.domain();
    let dmax = if lo.is_finite() { -lo / gamma } else { f64::INFINITY };
    let slope = |d: f64| g.eval(-gamma * d).map(|v| gamma * v - spec.hold_price());
    let mut hi = (2.0 * spec.edge() / (mu * gamma * gamma)).min(dmax);
    while hi < dmax && slope(hi)? > 0.0 {
        hi = (2.0 * hi).min(dmax);
    }

    // Coarse grid with cumulative quadrature, then golden section around the best cell.
    const GRID: usize = 256;
    let hold = spec.hold_price();
    let mut best = (0.0, 0.0);
    let mut proceeds = 0.0;
    let mut prev = 0.0;
    for i in 1..=GRID {
        let d = hi * i as f64 / GRID as f64;
        proceeds += fee_proceeds(spec, g, prev, d)?;
        prev = d;
        let v = proceeds - hold * d;
        if v > best.1 {
            best = (d, v);
        }
    }
    let cell = hi / GRID as f64;
    let (a, b) = ((best.0 - cell).max(0.0), (best.0 + cell).min(hi));
    let edge = |d: f64| informed_edge(spec, g, d).unwrap_or(f64::NEG_INFINITY);
    let (d, v) = numeric::golden_max(edge, a, b, 1e-10 * hi.max(1.0));
    let (delta_opt, value) = if v > best.1 { (d, v) } else { best };
    Ok(EdgeOptimum { delta_opt, value, lower_bound, mu })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossBranch {
    Interior,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBound {
    /// Lower bound on `−E_V*` over `[0, L]`.
    pub value: f64,
    pub branch: LossBranch,
}

/// Lower bound on the LP's expected payoff against the informed trader.
pub fn lp_loss_bound(spec: &GameSpec, kappa: f64, l: f64) -> Result<LossBound> {
    spec.validate()?;
    if kappa == 0.0 {
        return Err(CfmmError::KappaZero);
    }
    if !(kappa > 0.0 && l > 0.0) {
        return Err(CfmmError::invalid(format!("need kappa > 0 and L > 0, got {kappa}, {l}")));
    }
    let g2 = spec.gamma * spec.gamma;
    let edge = spec.edge();
    if edge <= l * kappa * g2 {
        Ok(LossBound { value: -edge * edge / (2.0 * kappa * g2), branch: LossBranch::Interior })
    } else {
        Ok(LossBound { value: kappa * g2 * l * l / 2.0 - edge * l, branch: LossBranch::Boundary })
    }
}

/// Step sizes and stopping rules for [`gda_trade_solver`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdaConfig {
    /// Step for `Δ`; defaults to `1/(4·(dh/dΔ)²)` at the start point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_alpha: Option<f64>,
    /// Step for `Δ'`; defaults to 1, a full correction of the invariant residual.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_beta: Option<f64>,
    pub max_steps: usize,
    pub target_price: f64,
    pub tolerance: f64,
}

impl GdaConfig {
    pub fn new(target_price: f64, tolerance: f64, max_steps: usize) -> Self {
        GdaConfig { eta_alpha: None, eta_beta: None, max_steps, target_price, tolerance }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    Tolerance,
    MaxSteps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdaResult {
    /// Traded coin sold into the pool; reserves become `(R + Δ, R' − Δ')`.
    pub delta: f64,
    /// Numéraire paid out.
    pub delta_prime: f64,
    pub steps_used: usize,
    /// `|h| = |Ψ_x − pΨ_y|` at the final point.
    pub residual: f64,
    /// `|Ψ − k| / Ψ_y`, the invariant residual in numéraire units.
    pub invariant_residual: f64,
    pub stop: StopRule,
}

/// Solves `Ψ_x(R + Δ, R' − Δ') = p·Ψ_y(R + Δ, R' − Δ')` on the level set by
/// gradient play: `Δ` descends `½h²` using the slope of `h` along the level
/// set, and `Δ'` ascends `−½c²`, with `c` the invariant residual scaled by
/// `Ψ_y`. Updates are Gauss-Seidel.
pub fn gda_trade_solver(pool: &PoolState, config: &GdaConfig) -> Result<GdaResult> {
    let p = config.target_price;
    if !(p > 0.0 && config.tolerance > 0.0 && config.max_steps >= 1) {
        return Err(CfmmError::invalid("GDA needs target_price > 0, tolerance > 0 and max_steps >= 1"));
    }
    for eta in [config.eta_alpha, config.eta_beta].into_iter().flatten() {
        if !(eta > 0.0) {
            return Err(CfmmError::invalid(format!("step size {eta} must be positive")));
        }
    }
    // Reachability: the exact trade must exist.
    pool.trade_to_price(p)?;

    let kind = pool.kind();
    let (r, rp) = (pool.reserve_traded(), pool.reserve_numeraire());
    let k = pool.invariant_value();
    let h_at = |x: f64, y: f64| {
        let q = kind.partials(x, y);
        // Slope along the level set, where Δ' moves by g per unit of Δ.
        let dh = (q.fxx - p * q.fxy) - q.fx / q.fy * (q.fxy - p * q.fyy);
        (q.fx - p * q.fy, dh)
    };
    let c_at = |x: f64, y: f64| {
        let q = kind.partials(x, y);
        let c = (kind.psi(x, y) - k) / q.fy;
        // d c / d Δ' = −∂_y c.
        let dc = -(1.0 - (kind.psi(x, y) - k) * q.fyy / (q.fy * q.fy));
        (c, dc)
    };

    let (h0, dh0) = h_at(r, rp);
    let eta_a = config.eta_alpha.unwrap_or(if dh0 != 0.0 { 0.25 / (dh0 * dh0) } else { 1.0 });
    let eta_b = config.eta_beta.unwrap_or(1.0);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    let mut h = h0;
    let mut c = 0.0;
    let converged = |h: f64, c: f64| h.abs() <= config.tolerance && c.abs() <= config.tolerance;
    if converged(h, c) {
        return Ok(GdaResult { delta: 0.0, delta_prime: 0.0, steps_used: 0, residual: h.abs(), invariant_residual: 0.0, stop: StopRule::Tolerance });
    }
    for step in 1..=config.max_steps {
        let (hx, dh) = h_at(r + d, rp - e);
        d -= eta_a * hx * dh;
        let (x, y0) = (r + d, rp - e);
        if !(x > 0.0 && x.is_finite()) {
            return Err(CfmmError::Diverged { step });
        }
        let (cx, dc) = c_at(x, y0);
        e -= eta_b * cx * dc;
        let y = rp - e;
        if !(y > 0.0 && y.is_finite() && d.is_finite()) {
            return Err(CfmmError::Diverged { step });
        }
        h = h_at(x, y).0;
        c = c_at(x, y).0;
        if !(h.is_finite() && c.is_finite()) {
            return Err(CfmmError::Diverged { step });
        }
        if converged(h, c) {
            return Ok(GdaResult { delta: d, delta_prime: e, steps_used: step, residual: h.abs(), invariant_residual: c.abs(), stop: StopRule::Tolerance });
        }
    }
    Ok(GdaResult {
        delta: d,
        delta_prime: e,
        steps_used: config.max_steps,
        residual: h.abs(),
        invariant_residual: c.abs(),
        stop: StopRule::MaxSteps,
    })
}

/// Per-round prices: the trader's prediction, and the price realized when
/// the prediction is wrong.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceTarget {
    pub predicted: f64,
    pub otherwise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiperiodRow {
    pub t: usize,
    pub alpha: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "R_prime")]
    pub r_prime: f64,
    #[serde(rename = "R_expected")]
    pub r_expected: f64,
    #[serde(rename = "R_prime_expected")]
    pub r_prime_expected: f64,
}

fn gda_step(pool: &PoolState, config: &GdaConfig, target: f64) -> Result<PoolState> {
    let cfg = GdaConfig { target_price: target, ..*config };
    let res = gda_trade_solver(pool, &cfg)?;
    pool.with_reserves(pool.reserve_traded() + res.delta, pool.reserve_numeraire() - res.delta_prime)
}

fn oracle_step(pool: &PoolState, target: f64) -> Result<PoolState> {
    pool.apply_trade(pool.trade_to_price(target)?)
}

fn check_sequences(alphas: &[f64], targets: &[PriceTarget]) -> Result<()> {
    if alphas.len() != targets.len() {
        return Err(CfmmError::invalid(format!("{} alphas for {} targets", alphas.len(), targets.len())));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a >= 0.5 && **a <= 1.0)) {
        return Err(CfmmError::invalid(format!("alpha {a} outside [1/2, 1]")));
    }
    Ok(())
}

fn realized_path(
    pool: &PoolState,
    alphas: &[f64],
    targets: &[PriceTarget],
    config: &GdaConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<PoolState>> {
    let mut state = *pool;
    let mut path = Vec::with_capacity(alphas.len());
    for (t, (&alpha, target)) in alphas.iter().zip(targets).enumerate() {
        let informed = rng.random::<f64>() < alpha;
        let next = if informed { gda_step(&state, config, target.predicted) } else { oracle_step(&state, target.otherwise) };
        state = next.map_err(|e| e.in_round(t))?;
        path.push(state);
    }
    Ok(path)
}

/// Expected reserves from the bucket recursion, propagated exactly over
/// the mixture of reachable states. States that agree to 1e−7 relative are
/// merged, so GDA stopping error does not split one state into many.
pub fn expected_reserves(
    pool: &PoolState,
    alphas: &[f64],
    targets: &[PriceTarget],
    config: &GdaConfig,
) -> Result<Vec<(f64, f64)>> {
    check_sequences(alphas, targets)?;
    let mut states: Vec<(PoolState, f64)> = vec![(*pool, 1.0)];
    let mut out = Vec::with_capacity(alphas.len());
    for (t, (&alpha, target)) in alphas.iter().zip(targets).enumerate() {
        let mut next: Vec<(PoolState, f64)> = Vec::new();
        for (s, w) in &states {
            let branches = [
                (gda_step(s, config, target.predicted), w * alpha),
                (oracle_step(s, target.otherwise), w * (1.0 - alpha)),
            ];
            for (state, weight) in branches {
                if weight == 0.0 {
                    continue;
                }
                let state = state.map_err(|e| e.in_round(t))?;
                let same = |o: &PoolState| {
                    numeric::rel_diff(o.reserve_traded(), state.reserve_traded(), 1e-300) < MERGE_TOLERANCE
                        && numeric::rel_diff(o.reserve_numeraire(), state.reserve_numeraire(), 1e-300) < MERGE_TOLERANCE
                };
                match next.iter_mut().find(|(o, _)| same(o)) {
                    Some(entry) => entry.1 += weight,
                    None => next.push((state, weight)),
                }
            }
        }
        if next.len() > MAX_MIXTURE_STATES {
            return Err(CfmmError::invalid(format!("expectation path exceeds {MAX_MIXTURE_STATES} distinct states at round {t}")));
        }
        let er = next.iter().map(|(s, w)| w * s.reserve_traded()).sum();
        let erp = next.iter().map(|(s, w)| w * s.reserve_numeraire()).sum();
        out.push((er, erp));
        states = next;
    }
    Ok(out)
}

/// One seeded realization of the multiperiod game alongside the analytic
/// expectation path.
pub fn multiperiod_sim(
    pool: &PoolState,
    alphas: &[f64],
    targets: &[PriceTarget],
    config: &GdaConfig,
    seed: u64,
) -> Result<Vec<MultiperiodRow>> {
    check_sequences(alphas, targets)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let path = realized_path(pool, alphas, targets, config, &mut rng)?;
    let expected = expected_reserves(pool, alphas, targets, config)?;
    Ok(path
        .iter()
        .zip(expected)
        .zip(alphas)
        .enumerate()
        .map(|(t, ((s, (er, erp)), &alpha))| MultiperiodRow {
            t,
            alpha,
            r: s.reserve_traded(),
            r_prime: s.reserve_numeraire(),
            r_expected: er,
            r_prime_expected: erp,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloPoint {
    pub mean_r: f64,
    pub se_r: f64,
    pub mean_r_prime: f64,
    pub se_r_prime: f64,
}

/// Sample mean and standard error of the reserves over `runs` independent
/// realizations. Run `i` uses ChaCha8 stream `i` of `seed`.
pub fn multiperiod_monte_carlo(
    pool: &PoolState,
    alphas: &[f64],
    targets: &[PriceTarget],
    config: &GdaConfig,
    seed: u64,
    runs: usize,
) -> Result<Vec<MonteCarloPoint>> {
    check_sequences(alphas, targets)?;
    if runs < 2 {
        return Err(CfmmError::invalid("Monte Carlo needs at least two runs"));
    }
    let paths: Vec<Vec<PoolState>> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            realized_path(pool, alphas, targets, config, &mut rng)
        })
        .collect::<Result<_>>()?;
    let n = runs as f64;
    Ok((0..alphas.len())
        .map(|t| {
            let stats = |f: &dyn Fn(&PoolState) -> f64| {
                let mean = paths.iter().map(|p| f(&p[t])).sum::<f64>() / n;
                let var = paths.iter().map(|p| (f(&p[t]) - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (mean, (var / n).sqrt())
            };
            let (mean_r, se_r) = stats(&|s| s.reserve_traded());
            let (mean_r_prime, se_r_prime) = stats(&|s| s.reserve_numeraire());
            MonteCarloPoint { mean_r, se_r, mean_r_prime, se_r_prime }
        })
        .collect())
}

/// Interval certificate helper for the LP-loss bound: κ on `[0, L]`.
pub fn kappa_for_game(g: &PriceImpactFn, l: f64) -> Result<(f64, Interval)> {
    Ok((curvature::kappa_on_interval(g, l)?, Interval::Finite(l)))
}
