//! LP portfolio Greeks for two-asset and n-asset pools, curvature hedging
//! bounds, and the static replication of `1/F` with calls weighted `2/K³`.

use serde::{Deserialize, Serialize};

use crate::error::{CfmmError, Result};
use crate::pool::{CfmmKind, PoolState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreeksReport {
    pub price: f64,
    pub p_v: f64,
    /// `dP_V/dm`, the traded reserve at the no-arbitrage state.
    pub p_delta: f64,
    /// `d²P_V/dm² = dR/dm`.
    pub p_gamma: f64,
}

/// The pool after arbitrage has moved it to price `m`.
pub fn no_arb_state(pool: &PoolState, m: f64) -> Result<PoolState> {
    pool.apply_trade(pool.trade_to_price(m)?)
}

/// Greeks of the LP position at external price `m`.
pub fn greeks_two_asset(pool: &PoolState, m: f64) -> Result<GreeksReport> {
    if let CfmmKind::ConstantSum = pool.kind() {
        // The price cannot move, so there is no neighbourhood to differentiate over.
        pool.trade_to_price(m)?;
        return Err(CfmmError::NotDifferentiable("constant sum price cannot move".into()));
    }
    let (r, gamma) = match pool.kind() {
        CfmmKind::ConstantProduct => {
            let k = pool.reserve_traded() * pool.reserve_numeraire();
            pool.trade_to_price(m)?;
            ((k / m).sqrt(), -0.5 * k.sqrt() * m.powf(-1.5))
        }
        CfmmKind::GeometricMean { tau } => {
            let r = no_arb_state(pool, m)?.reserve_traded();
            (r, -(1.0 - tau) * r / m)
        }
        _ => {
            // Along the level set dm/dR = −g'(0) at the moved state.
            let s = no_arb_state(pool, m)?;
            (s.reserve_traded(), -1.0 / s.marginal_price_slope(0.0)?)
        }
    };
    let s = no_arb_state(pool, m)?;
    Ok(GreeksReport { price: m, p_v: m * r + s.reserve_numeraire(), p_delta: r, p_gamma: gamma })
}

/// Portfolio value `m·R(m) + R'(m)` at the no-arbitrage state for `m`.
pub fn portfolio_value_at(pool: &PoolState, m: f64) -> Result<f64> {
    let s = no_arb_state(pool, m)?;
    Ok(m * s.reserve_traded() + s.reserve_numeraire())
}

/// An n-asset trading function whose level sets hold the reserves.
pub trait LevelSetFn: Sync {
    fn value(&self, reserves: &[f64]) -> f64;

    fn gradient(&self, reserves: &[f64]) -> Vec<f64> {
        let mut r = reserves.to_vec();
        (0..reserves.len())
            .map(|i| {
                let h = 1e-6 * reserves[i].abs().max(1e-6);
                let x = reserves[i];
                r[i] = x + h;
                let up = self.value(&r);
                r[i] = x - h;
                let down = self.value(&r);
                r[i] = x;
                (up - down) / (2.0 * h)
            })
            .collect()
    }
}

/// `Π Rᵢ^{wᵢ}` with positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGeometricMean {
    pub weights: Vec<f64>,
}

impl LevelSetFn for WeightedGeometricMean {
    fn value(&self, r: &[f64]) -> f64 {
        self.weights.iter().zip(r).map(|(w, x)| w * x.ln()).sum::<f64>().exp()
    }

    fn gradient(&self, r: &[f64]) -> Vec<f64> {
        let v = self.value(r);
        self.weights.iter().zip(r).map(|(w, x)| w * v / x).collect()
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> LevelSetFn for F {
    fn value(&self, reserves: &[f64]) -> f64 {
        self(reserves)
    }
}

/// Re-projection tolerance on the scaled residual of the no-arbitrage system.
pub const PROJECTION_TOLERANCE: f64 = 1e-7;

/// Prices `mᵢ = ∂ᵢΨ/∂ₙΨ`, with the last asset as numéraire.
pub fn n_asset_prices<T: LevelSetFn + ?Sized>(psi: &T, reserves: &[f64]) -> Vec<f64> {
    let g = psi.gradient(reserves);
    let n = g.len();
    g.iter().map(|gi| gi / g[n - 1]).collect()
}

fn residual<T: LevelSetFn + ?Sized>(psi: &T, r: &[f64], prices: &[f64], k: f64) -> Vec<f64> {
    let n = r.len();
    let m = n_asset_prices(psi, r);
    let mut out: Vec<f64> = (0..n - 1).map(|j| m[j] / prices[j] - 1.0).collect();
    out.push(psi.value(r) / k - 1.0);
    out
}

fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap_or(col);
        let scale = a[col..].iter().map(|row| row[col].abs()).fold(0.0, f64::max);
        if !(a[pivot][col].abs() > 1e-14 * scale.max(f64::MIN_POSITIVE)) || !a[pivot][col].is_finite() {
            return Err(CfmmError::SingularJacobian);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for (offset, row) in rest.iter_mut().enumerate() {
            let f = row[col] / pivot_row[col];
            for (v, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *v -= f * p;
            }
            b[col + 1 + offset] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}

/// Reserves on the level `Ψ = k` whose prices equal `prices` (numéraire
/// last, its entry ignored), by Newton in log-reserves from `start`.
pub fn project_to_prices<T: LevelSetFn + ?Sized>(psi: &T, start: &[f64], prices: &[f64], k: f64) -> Result<Vec<f64>> {
    let n = start.len();
    let mut u: Vec<f64> = start.iter().map(|x| x.ln()).collect();
    let exp = |u: &[f64]| u.iter().map(|v| v.exp()).collect::<Vec<_>>();
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut f = residual(psi, &exp(&u), prices, k);
    for _ in 0..100 {
        let h = 1e-7;
        let jac_t: Vec<Vec<f64>> = (0..n)
            .map(|c| {
                let mut up = u.clone();
                let mut down = u.clone();
                up[c] += h;
                down[c] -= h;
                let (fu, fd) = (residual(psi, &exp(&up), prices, k), residual(psi, &exp(&down), prices, k));
                fu.iter().zip(&fd).map(|(a, b)| (a - b) / (2.0 * h)).collect()
            })
            .collect();
        let jac: Vec<Vec<f64>> = (0..n).map(|r| (0..n).map(|c| jac_t[c][r]).collect()).collect();
        let step = solve_linear(jac, f.iter().map(|v| -v).collect())?;
        for (ui, si) in u.iter_mut().zip(&step) {
            *ui += si;
        }
        let next = residual(psi, &exp(&u), prices, k);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(CfmmError::SingularJacobian);
        }
        f = next;
        if norm(&step) < 1e-15 || norm(&f) < 1e-15 {
            break;
        }
    }
    if norm(&f) > PROJECTION_TOLERANCE {
        return Err(CfmmError::SingularJacobian);
    }
    Ok(exp(&u))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NAssetGreeks {
    pub prices: Vec<f64>,
    /// `(P_Δ)ᵢ = Rᵢ + Σ_{j≠i}(mⱼ − 1)·dRⱼ/dmᵢ`, as printed.
    pub p_delta: Vec<f64>,
    /// `(P_Γ)ᵢᵢ = dRᵢ/dmᵢ + Σ_{j≠i}(mⱼ − 1)·d²Rⱼ/dmᵢ²`, as printed.
    pub p_gamma: Vec<f64>,
    /// `dP_V/dmᵢ` from the differentiated state, which equals `Rᵢ`.
    pub p_delta_exact: Vec<f64>,
    /// `d²P_V/dmᵢ² = dRᵢ/dmᵢ`.
    pub p_gamma_exact: Vec<f64>,
}

/// Diagonal Greeks for the non-numéraire assets. `dR/dmᵢ` and `d²R/dmᵢ²`
/// come from re-projected states at perturbed prices, with Richardson
/// extrapolation of the central differences.
pub fn greeks_n_asset<T: LevelSetFn + ?Sized>(psi: &T, reserves: &[f64]) -> Result<NAssetGreeks> {
    let n = reserves.len();
    if n < 2 {
        return Err(CfmmError::invalid("need at least two assets"));
    }
    if reserves.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(CfmmError::invalid("reserves must be positive"));
    }
    let k = psi.value(reserves);
    let prices = n_asset_prices(psi, reserves);
    if prices.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(CfmmError::invalid("prices must be positive at the given reserves"));
    }
    let mut out = NAssetGreeks {
        prices: prices.clone(),
        p_delta: Vec::with_capacity(n - 1),
        p_gamma: Vec::with_capacity(n - 1),
        p_delta_exact: Vec::with_capacity(n - 1),
        p_gamma_exact: Vec::with_capacity(n - 1),
    };
    for i in 0..n - 1 {
        let state = |h: f64| {
            let mut p = prices.clone();
            p[i] += h;
            project_to_prices(psi, reserves, &p, k)
        };
        let h = 1e-3 * prices[i];
        let (p1, m1, p2, m2) = (state(h)?, state(-h)?, state(h / 2.0)?, state(-h / 2.0)?);
        let pv = |r: &[f64], dm: f64| {
            r.iter().zip(&prices).enumerate().map(|(j, (x, m))| if j == i { (m + dm) * x } else { m * x }).sum::<f64>()
        };
        let mut d1 = vec![0.0; n];
        let mut d2 = vec![0.0; n];
        for j in 0..n {
            let c1 = (p1[j] - m1[j]) / (2.0 * h);
            let c2 = (p2[j] - m2[j]) / h;
            d1[j] = (4.0 * c2 - c1) / 3.0;
            let s1 = (p1[j] - 2.0 * reserves[j] + m1[j]) / (h * h);
            let s2 = (p2[j] - 2.0 * reserves[j] + m2[j]) / (h * h / 4.0);
            d2[j] = (4.0 * s2 - s1) / 3.0;
        }
        let cross = |d: &[f64]| (0..n).filter(|&j| j != i).map(|j| (prices[j] - 1.0) * d[j]).sum::<f64>();
        out.p_delta.push(reserves[i] + cross(&d1));
        out.p_gamma.push(d1[i] + cross(&d2));
        let dpv = (8.0 * (pv(&p2, h / 2.0) - pv(&m2, -h / 2.0)) - (pv(&p1, h) - pv(&m1, -h))) / (6.0 * h);
        out.p_delta_exact.push(dpv);
        out.p_gamma_exact.push(d1[i]);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgeBounds {
    pub lower: f64,
    pub upper: f64,
    /// `P_Δ = R + Δ` after the sale.
    pub exact: f64,
    /// `g'(−Δ)(R + Δ)`, the magnitude of `dP_V/dΔ`.
    pub dpv_ddelta: f64,
    /// `dΔ/dm = −1/g'(−Δ)`.
    pub ddelta_dm: f64,
}

/// Bounds `κ(R + Δ)|dΔ/dm| ≤ P_Δ ≤ μ(R + Δ)|dΔ/dm|` after a sale of
/// `delta ≥ 0`, with `κ ≤ g' ≤ μ` on the interval containing `delta`.
pub fn hedge_bounds(pool: &PoolState, delta: f64, mu: f64, kappa: f64) -> Result<HedgeBounds> {
    if delta < 0.0 {
        return Err(CfmmError::invalid(format!("hedging bounds hold for falling prices only, got delta = {delta}")));
    }
    if !(mu >= kappa && kappa >= 0.0) {
        return Err(CfmmError::invalid(format!("need mu >= kappa >= 0, got {mu}, {kappa}")));
    }
    let slope = pool.marginal_price_slope(-delta)?;
    if !slope.is_finite() {
        return Err(CfmmError::NotDifferentiable(format!("g' at {} is {slope}", -delta)));
    }
    let held = pool.reserve_traded() + delta;
    if slope == 0.0 {
        return Ok(HedgeBounds { lower: 0.0, upper: 0.0, exact: held, dpv_ddelta: 0.0, ddelta_dm: f64::NEG_INFINITY });
    }
    let ddelta_dm = -1.0 / slope;
    Ok(HedgeBounds {
        lower: kappa * held * ddelta_dm.abs(),
        upper: mu * held * ddelta_dm.abs(),
        exact: held,
        dpv_ddelta: slope * held,
        ddelta_dm,
    })
}

/// Smallest and largest `g'(−Δ)` over `Δ ∈ [0, L]`, sampled on 257 points.
pub fn slope_range(pool: &PoolState, l: f64) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..=256 {
        let s = pool.marginal_price_slope(-l * i as f64 / 256.0)?;
        lo = lo.min(s);
        hi = hi.max(s);
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationPortfolio {
    pub cutoff: f64,
    pub epsilon: f64,
    pub strikes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ReplicationPortfolio {
    /// Lowest strike held, `ξ + ε`.
    pub fn lower(&self) -> f64 {
        self.cutoff + self.epsilon
    }
}

/// Call weights `2/K³` on a sorted strike grid starting at or above `ξ + ε`.
pub fn carr_madan_weights(cutoff: f64, epsilon: f64, strikes: &[f64]) -> Result<ReplicationPortfolio> {
    let lower = cutoff + epsilon;
    if !(cutoff >= 0.0 && epsilon >= 0.0 && lower > 0.0) {
        return Err(CfmmError::invalid(format!("need cutoff >= 0, epsilon >= 0 and a positive lower strike, got {cutoff}, {epsilon}")));
    }
    if strikes.len() < 2 || strikes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CfmmError::invalid("strike grid needs at least two increasing strikes"));
    }
    if strikes[0] < lower {
        return Err(CfmmError::invalid(format!("strike {} lies below the lower strike {lower}", strikes[0])));
    }
    Ok(ReplicationPortfolio {
        cutoff,
        epsilon,
        strikes: strikes.to_vec(),
        weights: strikes.iter().map(|k| 2.0 / k.powi(3)).collect(),
    })
}

/// Uniform grid of `intervals + 1` strikes on `[lower, k_max]`.
pub fn uniform_strikes(lower: f64, k_max: f64, intervals: usize) -> Vec<f64> {
    let h = (k_max - lower) / intervals as f64;
    (0..=intervals).map(|i| if i == intervals { k_max } else { lower + h * i as f64 }).collect()
}

/// `∫ (2/K³)(F − K)₊ dK` over the portfolio's strike range, by Simpson's
/// rule on each grid cell. The cell containing the kink at `K = F` is cut
/// there, so the rule sees a smooth integrand.
pub fn carr_madan_integral(portfolio: &ReplicationPortfolio, forward: f64) -> f64 {
    let payoff = |k: f64| 2.0 / k.powi(3) * (forward - k).max(0.0);
    portfolio
        .strikes
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1].min(forward));
            if b <= a {
                return 0.0;
            }
            (b - a) / 6.0 * (payoff(a) + 4.0 * payoff(0.5 * (a + b)) + payoff(b))
        })
        .sum()
}

/// Closed form of the truncated integral from `c` up to `F`: `1/F + (F − 2c)/c²`.
pub fn carr_madan_truncated_exact(lower: f64, forward: f64) -> f64 {
    if forward <= lower {
        return 0.0;
    }
    1.0 / forward + (forward - 2.0 * lower) / (lower * lower)
}

/// Full expansion of `1/F` about `c`: `1/c − (F − c)/c² + ∫_c^∞ (2/K³)(F − K)₊ dK`.
pub fn carr_madan_expansion(portfolio: &ReplicationPortfolio, forward: f64) -> f64 {
    let c = portfolio.lower();
    if forward <= c {
        return 0.0;
    }
    1.0 / c - (forward - c) / (c * c) + carr_madan_integral(portfolio, forward)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrMadanCheck {
    pub forward: f64,
    pub integral: f64,
    /// `|integral − 1/F|`, or `|integral|` when the payoff is gated out.
    pub residual: f64,
    /// `|integral − truncated closed form|`, the quadrature error alone.
    pub quadrature_error: f64,
    pub intervals: usize,
}

/// Evaluates the truncated replication integral on uniform grids over
/// `[ξ + ε, K_max]` with `K_max ≥ 10F`, doubling from `intervals` up to
/// 2¹⁶ cells until the residual against `1/F` is within `tol`.
pub fn carr_madan_check(cutoff: f64, epsilon: f64, forward: f64, intervals: usize, tol: f64) -> Result<CarrMadanCheck> {
    if !(forward > 0.0) || intervals == 0 || !(tol > 0.0) {
        return Err(CfmmError::invalid("need F > 0, at least one interval and tol > 0"));
    }
    let lower = cutoff + epsilon;
    let k_max = (10.0 * forward).max(2.0 * lower);
    let target = if forward > lower { 1.0 / forward } else { 0.0 };
    let exact = carr_madan_truncated_exact(lower, forward);
    let mut n = intervals;
    loop {
        let p = carr_madan_weights(cutoff, epsilon, &uniform_strikes(lower, k_max, n))?;
        let integral = carr_madan_integral(&p, forward);
        let residual = (integral - target).abs();
        if residual <= tol {
            return Ok(CarrMadanCheck { forward, integral, residual, quadrature_error: (integral - exact).abs(), intervals: n });
        }
        if n >= 1 << 16 {
            return Err(CfmmError::GridTooCoarse { residual, tolerance: tol });
        }
        n *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric;

    fn product() -> PoolState {
        PoolState::feeless(CfmmKind::ConstantProduct, 100.0, 100.0).unwrap()
    }

    #[test]
    fn product_greeks_closed_form() {
        let g = greeks_two_asset(&product(), 1.0).unwrap();
        assert_eq!((g.p_delta, g.p_gamma), (100.0, -50.0));
        assert_eq!(g.p_v, 200.0);
        // Oracle: finite difference of R(m) = √(k/m).
        let r = |m: f64| Ok((1e4 / m).sqrt());
        let fd = numeric::central_derivative(r, 1.0, 1e-5).unwrap();
        assert!((fd + 50.0).abs() < 1e-6);
    }

    #[test]
    fn geometric_half_matches_product() {
        let geo = PoolState::feeless(CfmmKind::GeometricMean { tau: 0.5 }, 100.0, 100.0).unwrap();
        for m in [0.5, 1.0, 1.7] {
            let (a, b) = (greeks_two_asset(&geo, m).unwrap(), greeks_two_asset(&product(), m).unwrap());
            assert!((a.p_delta - b.p_delta).abs() < 1e-10 * b.p_delta);
            assert!((a.p_gamma - b.p_gamma).abs() < 1e-10 * b.p_gamma.abs());
        }
    }

    #[test]
    fn constant_sum_is_not_differentiable() {
        let sum = PoolState::feeless(CfmmKind::ConstantSum, 100.0, 100.0).unwrap();
        assert!(matches!(greeks_two_asset(&sum, 1.0), Err(CfmmError::NotDifferentiable(_))));
        assert!(matches!(greeks_two_asset(&sum, 1.1), Err(CfmmError::OutOfRange { .. })));
    }

    #[test]
    fn curve_greeks_match_finite_differences() {
        let pool = PoolState::feeless(CfmmKind::Curve { alpha: 1.0, beta: 1e5 }, 100.0, 100.0).unwrap();
        for m in [0.97, 1.0, 1.02] {
            let g = greeks_two_asset(&pool, m).unwrap();
            let h = 1e-6 * m;
            let d = numeric::central_derivative(|x| portfolio_value_at(&pool, x), m, h).unwrap();
            assert!((d - g.p_delta).abs() < 1e-5 * g.p_delta, "{m}: {d} vs {}", g.p_delta);
            let r = |x: f64| no_arb_state(&pool, x).map(|s| s.reserve_traded());
            let dr = numeric::central_derivative(r, m, 1e-4 * m).unwrap();
            assert!((dr - g.p_gamma).abs() < 1e-5 * g.p_gamma.abs(), "{m}: {dr} vs {}", g.p_gamma);
        }
    }

    #[test]
    fn n_asset_reduces_to_two_assets() {
        let psi = WeightedGeometricMean { weights: vec![0.5, 0.5] };
        let g = greeks_n_asset(&psi, &[100.0, 100.0]).unwrap();
        assert!((g.p_delta[0] - 100.0).abs() < 1e-6);
        assert!((g.p_gamma[0] + 50.0).abs() < 1e-6, "{g:?}");
        let off = greeks_n_asset(&psi, &[80.0, 125.0]).unwrap();
        let two = greeks_two_asset(&PoolState::feeless(CfmmKind::ConstantProduct, 80.0, 125.0).unwrap(), 125.0 / 80.0).unwrap();
        assert!((off.p_delta[0] - two.p_delta).abs() < 1e-6);
        assert!((off.p_gamma[0] - two.p_gamma).abs() < 1e-6 * two.p_gamma.abs().max(1.0));
    }

    #[test]
    fn n_asset_symmetry_and_peg() {
        let psi = WeightedGeometricMean { weights: vec![1.0 / 3.0; 3] };
        let g = greeks_n_asset(&psi, &[50.0, 50.0, 50.0]).unwrap();
        assert!(g.prices.iter().all(|m| (m - 1.0).abs() < 1e-14));
        assert_eq!(g.p_delta, vec![50.0, 50.0]);
        assert!((g.p_gamma[0] - g.p_gamma[1]).abs() < 1e-6);
        assert!((g.p_delta_exact[0] - 50.0).abs() < 1e-6);
        // A closure is accepted as a trading function.
        let cube = |r: &[f64]| (r[0] * r[1] * r[2]).cbrt();
        let c = greeks_n_asset(&cube, &[50.0, 50.0, 50.0]).unwrap();
        assert!((c.p_gamma[0] - g.p_gamma[0]).abs() < 1e-4);
    }

    #[test]
    fn n_asset_printed_delta_departs_from_reserves_off_peg() {
        let psi = WeightedGeometricMean { weights: vec![0.2, 0.3, 0.5] };
        let r = [30.0, 90.0, 100.0];
        let g = greeks_n_asset(&psi, &r).unwrap();
        for (exact, ri) in g.p_delta_exact.iter().zip(r) {
            assert!((exact - ri).abs() < 1e-6 * ri, "{g:?}");
        }
        assert!((g.p_delta[0] - r[0]).abs() > 1e-3);
    }

    #[test]
    fn singular_level_set_is_reported() {
        let flat = |r: &[f64]| r[0] + r[1];
        assert!(matches!(greeks_n_asset(&flat, &[1.0, 1.0]), Err(CfmmError::SingularJacobian)));
    }

    #[test]
    fn hedge_bounds_bracket_exact() {
        let pool = product();
        let h0 = hedge_bounds(&pool, 0.0, 0.02, 0.02).unwrap();
        assert!((h0.dpv_ddelta - 2.0).abs() < 1e-15);
        let l = 20.0;
        let (kappa, mu) = slope_range(&pool, l).unwrap();
        for i in 0..100 {
            let d = l * i as f64 / 99.0;
            let b = hedge_bounds(&pool, d, mu, kappa).unwrap();
            assert!(b.lower <= b.exact * (1.0 + 1e-12) && b.exact <= b.upper * (1.0 + 1e-12), "{d}: {b:?}");
        }
        let sum = PoolState::feeless(CfmmKind::ConstantSum, 100.0, 100.0).unwrap();
        let s = hedge_bounds(&sum, 5.0, 0.0, 0.0).unwrap();
        assert_eq!((s.lower, s.upper), (0.0, 0.0));
        assert!(hedge_bounds(&pool, -1.0, 0.02, 0.01).is_err());
    }

    #[test]
    fn carr_madan_values() {
        let c = carr_madan_check(1.0, 0.0, 2.0, 8, 1e-8).unwrap();
        assert!(c.residual <= 1e-8 && c.quadrature_error <= 1e-8, "{c:?}");
        assert_eq!(carr_madan_truncated_exact(1.0, 2.0), 0.5);
        let gated = carr_madan_check(1.0, 0.0, 0.5, 8, 1e-12).unwrap();
        assert_eq!(gated.integral, 0.0);
        // The truncated integral equals 1/F only at F = 2c.
        assert!((carr_madan_truncated_exact(1.0, 10.0) - 8.1).abs() < 1e-12);
        match carr_madan_check(1.0, 0.0, 10.0, 8, 1e-8) {
            Err(CfmmError::GridTooCoarse { residual, .. }) => assert!((residual - 8.0).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
        let p = carr_madan_weights(1.0, 0.0, &uniform_strikes(1.0, 100.0, 1 << 16)).unwrap();
        let e = carr_madan_expansion(&p, 10.0);
        assert!((e - 0.1).abs() < 1e-10, "{e}");
    }

    #[test]
    fn carr_madan_refinement_rate() {
        let mut prev = f64::INFINITY;
        for n in [20, 40, 80, 160] {
            let p = carr_madan_weights(1.0, 0.0, &uniform_strikes(1.0, 21.0, n)).unwrap();
            let err = (carr_madan_integral(&p, 2.5) - carr_madan_truncated_exact(1.0, 2.5)).abs();
            assert!(err * 4.0 <= prev, "{n}: {err} vs {prev}");
            prev = err;
        }
    }
}
