//! Portfolio-value lower bound for pools that keep their fees.
//!
//! One fee-bearing trade with input `Δ` from reserves `R` always satisfies
//! `cᵀR⁺ ≥ p_R(c) + (1 − γ)·cᵀΔ`, where `p_R(c)` is the cheapest point of the
//! level set through `R` at prices `c`. [`check_fee_bound`] tests the chained
//! form `cᵀRⁿ ≥ p_{R⁰}(c) + (1 − γ)·Σ cᵀΔ^k`, which does not follow from it:
//! once fees lift the level set, its cheapest point can gain less than the
//! fees paid, so sequences that trade back towards the minimizer break it.

use serde::{Deserialize, Serialize};

use crate::error::{CfmmError, Result};
use crate::pool::{CfmmKind, PoolState};

/// One fee-bearing trade: the input amount sold into the pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeeTrade {
    SellTraded(f64),
    SellNumeraire(f64),
}

/// `min cᵀR` over reserves on the pool's level set, `c = (c_traded, c_numeraire)`.
pub fn min_level_set_value(pool: &PoolState, c: (f64, f64)) -> Result<f64> {
    let (c1, c2) = c;
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(CfmmError::invalid(format!("price vector ({c1}, {c2}) must be positive")));
    }
    let (r, rp) = (pool.reserve_traded(), pool.reserve_numeraire());
    if let CfmmKind::ConstantSum = pool.kind() {
        return Ok(c1.min(c2) * (r + rp));
    }
    // The minimizer is where the marginal price equals c1/c2.
    let delta = pool.trade_to_price(c1 / c2)?;
    let x = r - delta;
    let y = pool.numeraire_on_level(x)?;
    Ok(c1 * x + c2 * y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeeBoundReport {
    pub floor: f64,
    /// `(cᵀR^k, p(c) + (1 − γ)Σ cᵀΔ^j)` after each trade.
    pub steps: Vec<(f64, f64)>,
    pub min_slack: f64,
    pub passed: bool,
}

/// Executes `trades` with fees kept in the reserves and checks the lower
/// bound after every step, within relative tolerance `tol`.
pub fn check_fee_bound(pool: &PoolState, trades: &[FeeTrade], c: (f64, f64), tol: f64) -> Result<FeeBoundReport> {
    let floor = min_level_set_value(pool, c)?;
    let fee = 1.0 - pool.fee_gamma();
    let mut state = *pool;
    let mut inputs = 0.0;
    let mut steps = Vec::with_capacity(trades.len());
    let mut min_slack = f64::INFINITY;
    let mut passed = true;
    for trade in trades {
        let (next, input_value) = match *trade {
            FeeTrade::SellTraded(s) => (state.sell_traded_with_fee(s)?.0, c.0 * s),
            FeeTrade::SellNumeraire(n) => (state.sell_numeraire_with_fee(n)?.0, c.1 * n),
        };
        state = next;
        inputs += input_value;
        let value = c.0 * state.reserve_traded() + c.1 * state.reserve_numeraire();
        let bound = floor + fee * inputs;
        let slack = value - bound;
        min_slack = min_slack.min(slack);
        passed &= slack >= -tol * value.abs().max(1.0);
        steps.push((value, bound));
    }
    Ok(FeeBoundReport { floor, steps, min_slack, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_floor_is_geometric_mean() {
        let pool = PoolState::feeless(CfmmKind::ConstantProduct, 100.0, 100.0).unwrap();
        // min c1 x + c2 y on xy = k is 2√(c1 c2 k).
        let v = min_level_set_value(&pool, (0.81, 1.0)).unwrap();
        assert!((v - 2.0 * (0.81f64 * 10000.0).sqrt()).abs() < 1e-10);
        assert!((min_level_set_value(&pool, (1.0, 1.0)).unwrap() - 200.0).abs() < 1e-12);
    }

    #[test]
    fn sum_floor_is_cheapest_corner() {
        let pool = PoolState::feeless(CfmmKind::ConstantSum, 30.0, 70.0).unwrap();
        assert_eq!(min_level_set_value(&pool, (0.5, 1.0)).unwrap(), 50.0);
    }

    #[test]
    fn bound_holds_on_alternating_trades() {
        let pool = PoolState::new(CfmmKind::ConstantProduct, 100.0, 100.0, 0.99).unwrap();
        let trades = [
            FeeTrade::SellTraded(10.0),
            FeeTrade::SellNumeraire(25.0),
            FeeTrade::SellTraded(3.0),
            FeeTrade::SellNumeraire(1.0),
        ];
        let r = check_fee_bound(&pool, &trades, (1.0, 1.0), 1e-12).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.steps.len(), 4);
    }

    #[test]
    fn chained_bound_fails_when_fees_raise_the_level_off_the_minimizer() {
        // Sell 100 of the traded coin, then buy back towards the c-minimizer.
        // The first fee lifts the level set, but the cheapest point of the new
        // level set gains less than that fee's value at c.
        let pool = PoolState::new(CfmmKind::ConstantProduct, 100.0, 100.0, 0.9).unwrap();
        let trades = [FeeTrade::SellTraded(100.0), FeeTrade::SellNumeraire(55.5)];
        let r = check_fee_bound(&pool, &trades, (1.0, 1.0), 1e-12).unwrap();
        let (value, bound) = r.steps[0];
        assert!(value >= bound);
        let (value, bound) = r.steps[1];
        assert!(bound - value > 4.0, "{r:?}");
        assert!(!r.passed);
    }
}
