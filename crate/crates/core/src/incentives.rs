//! Yield-farming subsidies: the amount that keeps an LP whole after an
//! arbitrage round, and the excess loss between two weighted pools sharing
//! a price.

use serde::{Deserialize, Serialize};

use crate::arbitrage::{self, MarketPair};
use crate::error::{CfmmError, Result};
use crate::pool::{CfmmKind, PoolState};

/// Relative tolerance for two pools quoting the same spot price.
pub const SPOT_MATCH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsidyResult {
    /// `R'_ℓ = (μ/κ)(m0_s − m0_e)`, in numéraire.
    pub subsidy_numeraire: f64,
    /// `R_ℓ = (μ/κ)(1 − h)`, in the traded coin.
    pub subsidy_traded: f64,
    /// `h = m0_e/m0_s`.
    pub growth_h: f64,
    pub ratio_mu_kappa: f64,
}

pub fn sufficient_subsidy(mu: f64, kappa: f64, m0_s: f64, m0_e: f64) -> Result<SubsidyResult> {
    if kappa == 0.0 {
        return Err(CfmmError::KappaZero);
    }
    if !(m0_e > 0.0 && m0_e <= m0_s) {
        return Err(CfmmError::invalid(format!("need 0 < m0_e <= m0_s, got {m0_e}, {m0_s}")));
    }
    let ratio = arbitrage::stability_bound(mu, kappa, 1.0, 0.0)?;
    let growth_h = m0_e / m0_s;
    Ok(SubsidyResult {
        subsidy_numeraire: ratio * (m0_s - m0_e),
        subsidy_traded: ratio * (1.0 - growth_h),
        growth_h,
        ratio_mu_kappa: ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsidyReport {
    pub delta_star: f64,
    pub m_a: f64,
    /// `m_a Δ* − ∫₀^{Δ*} g(−t) dt`, at most zero.
    pub realized_cost: f64,
    pub subsidy: f64,
    /// `realized_cost + subsidy`.
    pub slack: f64,
    pub passed: bool,
}

/// Resolves the pair and checks that the subsidy covers the LP's realized
/// opportunity cost, within `tol` absolute. Values are in the pair's frame.
pub fn verify_subsidy(pair: &MarketPair, subsidy: &SubsidyResult, tol: f64) -> Result<SubsidyReport> {
    let r = arbitrage::no_arb_pair(pair)?;
    let received = -pair.secondary.quantity(-r.delta_star)?;
    let realized_cost = r.m_a * r.delta_star - received;
    let slack = realized_cost + subsidy.subsidy_numeraire;
    Ok(SubsidyReport {
        delta_star: r.delta_star,
        m_a: r.m_a,
        realized_cost,
        subsidy: subsidy.subsidy_numeraire,
        slack,
        passed: slack >= -tol,
    })
}

fn weight(pool: &PoolState) -> Result<f64> {
    match pool.kind() {
        CfmmKind::GeometricMean { tau } => Ok(tau),
        other => Err(CfmmError::invalid(format!("excess loss needs geometric-mean pools, got {}", other.name()))),
    }
}

/// `δ = (R² − Δ)/τ₂ − (R¹ − Δ)/τ₁` when the same trade `Δ` hits both pools.
pub fn balancer_excess_loss(pool1: &PoolState, pool2: &PoolState, delta: f64) -> Result<f64> {
    let (p1, p2) = (pool1.spot_price(), pool2.spot_price());
    if (p1 - p2).abs() > SPOT_MATCH_TOLERANCE * p1.max(p2) {
        return Err(CfmmError::SpotPriceMismatch { first: p1, second: p2 });
    }
    excess_loss(pool1, pool2, delta)
}

fn excess_loss(pool1: &PoolState, pool2: &PoolState, delta: f64) -> Result<f64> {
    let (t1, t2) = (weight(pool1)?, weight(pool2)?);
    for p in [pool1, pool2] {
        let (lo, hi) = p.trade_domain();
        if !(delta >= lo && delta <= hi) {
            return Err(CfmmError::DomainExceeded { delta, min: lo, max: hi });
        }
    }
    Ok((pool2.reserve_traded() - delta) / t2 - (pool1.reserve_traded() - delta) / t1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsidyStep {
    pub t: usize,
    pub delta: f64,
    pub excess_loss: f64,
    pub cumulative: f64,
}

/// Applies each trade to both pools in turn, accumulating the per-step δ.
/// The pools must share a spot price at the start. Equal trades move
/// differently weighted pools to different prices, so later steps apply
/// the δ formula to the updated reserves without the price check.
pub fn subsidy_schedule(pool1: &PoolState, pool2: &PoolState, trades: &[f64]) -> Result<Vec<SubsidyStep>> {
    let (mut a, mut b) = (*pool1, *pool2);
    let mut cumulative = 0.0;
    let mut out = Vec::with_capacity(trades.len());
    for (t, &delta) in trades.iter().enumerate() {
        let step = (|| {
            let excess_loss = if t == 0 { balancer_excess_loss(&a, &b, delta)? } else { excess_loss(&a, &b, delta)? };
            a = a.apply_trade(delta)?;
            b = b.apply_trade(delta)?;
            Ok(excess_loss)
        })()
        .map_err(|e: CfmmError| e.in_round(t))?;
        cumulative += step;
        out.push(SubsidyStep { t, delta, excess_loss: step, cumulative });
    }
    Ok(out)
}

/// Total `Σ δ` over the trade sequence.
pub fn cumulative_subsidy(pool1: &PoolState, pool2: &PoolState, trades: &[f64]) -> Result<f64> {
    Ok(subsidy_schedule(pool1, pool2, trades)?.last().map_or(0.0, |s| s.cumulative))
}
