//! Two-asset CFMM pools.
//!
//! Sign convention: a trade `delta > 0` buys `delta` of the traded coin from
//! the pool and pays `delta_prime` of the numéraire in, so reserves move to
//! `(R − delta, R' + delta_prime)`. Negative values reverse both flows.
//!
//! Every kind is expressed through a reserve-space function `Ψ(x, y)` whose
//! level set through `(R, R')` is the set of accepted post-trade reserves:
//!
//! | kind              | Ψ(x, y)                 |
//! |-------------------|-------------------------|
//! | constant sum      | x + y                   |
//! | constant product  | x·y                     |
//! | geometric mean τ  | x^τ · y^(1−τ)           |
//! | Curve (α, β)      | α(x + y) − β / (x·y)    |
//!
//! The marginal price of the traded coin is `Ψ_x / Ψ_y` evaluated on the
//! level set, and is nondecreasing in `delta` for all four kinds.
//!
//! Fees follow the sell-side convention: `γ` scales the traded coin sold
//! into the pool. Buy-side fees are the same construction after
//! [`PoolState::swapped`] exchanges the roles of the two assets.

use serde::{Deserialize, Serialize};

use crate::error::{CfmmError, Result};
use crate::numeric;

/// Post-trade reserves are kept above this fraction of the initial reserves.
pub const RESERVE_FLOOR: f64 = 1e-9;

/// Trading function family and its shape parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CfmmKind {
    ConstantSum,
    ConstantProduct,
    GeometricMean { tau: f64 },
    Curve { alpha: f64, beta: f64 },
}

/// First and second partial derivatives of `Ψ` in reserve coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partials {
    pub fx: f64,
    pub fy: f64,
    pub fxx: f64,
    pub fxy: f64,
    pub fyy: f64,
}

impl CfmmKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CfmmKind::ConstantSum | CfmmKind::ConstantProduct => Ok(()),
            CfmmKind::GeometricMean { tau } => {
                if tau.is_finite() && tau > 0.0 && tau < 1.0 {
                    Ok(())
                } else {
                    Err(CfmmError::invalid(format!("geometric mean weight tau = {tau} must lie in (0, 1)")))
                }
            }
            CfmmKind::Curve { alpha, beta } => {
                if alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0 {
                    Ok(())
                } else {
                    Err(CfmmError::invalid(format!("curve parameters alpha = {alpha}, beta = {beta} must be positive")))
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CfmmKind::ConstantSum => "constant_sum",
            CfmmKind::ConstantProduct => "constant_product",
            CfmmKind::GeometricMean { .. } => "geometric_mean",
            CfmmKind::Curve { .. } => "curve",
        }
    }

    /// `Ψ(x, y)` at reserves `(x, y)`.
    pub fn psi(&self, x: f64, y: f64) -> f64 {
        match *self {
            CfmmKind::ConstantSum => x + y,
            CfmmKind::ConstantProduct => x * y,
            CfmmKind::GeometricMean { tau } => x.powf(tau) * y.powf(1.0 - tau),
            CfmmKind::Curve { alpha, beta } => alpha * (x + y) - beta / (x * y),
        }
    }

    pub fn partials(&self, x: f64, y: f64) -> Partials {
        match *self {
            CfmmKind::ConstantSum => Partials { fx: 1.0, fy: 1.0, fxx: 0.0, fxy: 0.0, fyy: 0.0 },
            CfmmKind::ConstantProduct => Partials { fx: y, fy: x, fxx: 0.0, fxy: 1.0, fyy: 0.0 },
            CfmmKind::GeometricMean { tau } => {
                let v = self.psi(x, y);
                let s = 1.0 - tau;
                Partials {
                    fx: tau * v / x,
                    fy: s * v / y,
                    fxx: tau * (tau - 1.0) * v / (x * x),
                    fxy: tau * s * v / (x * y),
                    fyy: s * (s - 1.0) * v / (y * y),
                }
            }
            CfmmKind::Curve { alpha, beta } => Partials {
                fx: alpha + beta / (x * x * y),
                fy: alpha + beta / (x * y * y),
                fxx: -2.0 * beta / (x * x * x * y),
                fxy: -beta / (x * x * y * y),
                fyy: -2.0 * beta / (x * y * y * y),
            },
        }
    }

    /// The same market viewed with the two assets exchanged.
    pub fn swapped(&self) -> CfmmKind {
        match *self {
            CfmmKind::GeometricMean { tau } => CfmmKind::GeometricMean { tau: 1.0 - tau },
            other => other,
        }
    }
}

/// A concrete CFMM instance: trading function, reserves and fee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoolStateRepr", into = "PoolStateRepr")]
pub struct PoolState {
    kind: CfmmKind,
    reserve_traded: f64,
    reserve_numeraire: f64,
    fee_gamma: f64,
}

impl PoolState {
    pub fn new(kind: CfmmKind, reserve_traded: f64, reserve_numeraire: f64, fee_gamma: f64) -> Result<Self> {
        kind.validate()?;
        for (name, v) in [("reserve_traded", reserve_traded), ("reserve_numeraire", reserve_numeraire)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CfmmError::invalid(format!("{name} = {v} must be a positive finite number")));
            }
        }
        if !(fee_gamma > 0.0 && fee_gamma <= 1.0) {
            return Err(CfmmError::invalid(format!("fee_gamma = {fee_gamma} must lie in (0, 1]")));
        }
        let pool = PoolState { kind, reserve_traded, reserve_numeraire, fee_gamma };
        if !pool.invariant_value().is_finite() {
            return Err(CfmmError::invalid("invariant value is not finite"));
        }
        Ok(pool)
    }

    /// Fee-less pool.
    pub fn feeless(kind: CfmmKind, reserve_traded: f64, reserve_numeraire: f64) -> Result<Self> {
        Self::new(kind, reserve_traded, reserve_numeraire, 1.0)
    }

    /// Pool quoting `g(0) = 1` with portfolio value `P_V = R + R'`.
    pub fn at_peg(kind: CfmmKind, portfolio_value: f64, fee_gamma: f64) -> Result<Self> {
        let (r, rp) = match kind {
            CfmmKind::GeometricMean { tau } => (tau * portfolio_value, (1.0 - tau) * portfolio_value),
            _ => (0.5 * portfolio_value, 0.5 * portfolio_value),
        };
        Self::new(kind, r, rp, fee_gamma)
    }

    pub fn kind(&self) -> CfmmKind {
        self.kind
    }

    pub fn reserve_traded(&self) -> f64 {
        self.reserve_traded
    }

    pub fn reserve_numeraire(&self) -> f64 {
        self.reserve_numeraire
    }

    pub fn fee_gamma(&self) -> f64 {
        self.fee_gamma
    }

    pub fn with_fee(mut self, fee_gamma: f64) -> Result<Self> {
        self.fee_gamma = fee_gamma;
        Self::new(self.kind, self.reserve_traded, self.reserve_numeraire, fee_gamma)
    }

    pub fn with_reserves(&self, reserve_traded: f64, reserve_numeraire: f64) -> Result<Self> {
        Self::new(self.kind, reserve_traded, reserve_numeraire, self.fee_gamma)
    }

    /// `ψ(0, 0)`, the level the pool must preserve.
    pub fn invariant_value(&self) -> f64 {
        self.kind.psi(self.reserve_traded, self.reserve_numeraire)
    }

    /// Exchanges the traded coin and the numéraire. Prices become reciprocal.
    pub fn swapped(&self) -> PoolState {
        PoolState {
            kind: self.kind.swapped(),
            reserve_traded: self.reserve_numeraire,
            reserve_numeraire: self.reserve_traded,
            fee_gamma: self.fee_gamma,
        }
    }

    /// Valid trade sizes `[delta_min, delta_max]`: both post-trade reserves
    /// stay at or above `RESERVE_FLOOR` times their current value.
    pub fn trade_domain(&self) -> (f64, f64) {
        let r = self.reserve_traded;
        let max = r * (1.0 - RESERVE_FLOOR);
        let min = match self.traded_on_level(RESERVE_FLOOR * self.reserve_numeraire) {
            Ok(x) if x.is_finite() => r - x,
            _ => f64::NEG_INFINITY,
        };
        (min, max)
    }

    fn check_domain(&self, delta: f64) -> Result<()> {
        let (min, max) = self.trade_domain();
        if delta.is_finite() && delta >= min && delta <= max {
            Ok(())
        } else {
            Err(CfmmError::DomainExceeded { delta, min, max })
        }
    }

    /// Numéraire reserve on this pool's level set for traded reserve `x`.
    pub fn numeraire_on_level(&self, x: f64) -> Result<f64> {
        let (r, rp) = (self.reserve_traded, self.reserve_numeraire);
        match self.kind {
            CfmmKind::ConstantSum => Ok(r + rp - x),
            CfmmKind::ConstantProduct => Ok(rp * (r / x)),
            CfmmKind::GeometricMean { tau } => Ok(rp * (r / x).powf(tau / (1.0 - tau))),
            CfmmKind::Curve { alpha, beta } => curve_other_reserve(alpha, beta, self.invariant_value(), x, rp),
        }
    }

    /// Traded reserve on this pool's level set for numéraire reserve `y`.
    pub fn traded_on_level(&self, y: f64) -> Result<f64> {
        let (r, rp) = (self.reserve_traded, self.reserve_numeraire);
        match self.kind {
            CfmmKind::ConstantSum => Ok(r + rp - y),
            CfmmKind::ConstantProduct => Ok(r * (rp / y)),
            CfmmKind::GeometricMean { tau } => Ok(r * (rp / y).powf((1.0 - tau) / tau)),
            CfmmKind::Curve { alpha, beta } => curve_other_reserve(alpha, beta, self.invariant_value(), y, r),
        }
    }

    /// Numéraire amount `delta_prime` that keeps the invariant for a trade
    /// buying `delta` of the traded coin.
    pub fn trade_output(&self, delta: f64) -> Result<f64> {
        self.check_domain(delta)?;
        if delta == 0.0 {
            return Ok(0.0);
        }
        let (r, rp) = (self.reserve_traded, self.reserve_numeraire);
        let x = r - delta;
        match self.kind {
            CfmmKind::ConstantSum => Ok(delta),
            CfmmKind::ConstantProduct => Ok(rp * delta / x),
            CfmmKind::GeometricMean { tau } => {
                let xi = tau / (1.0 - tau);
                Ok(rp * (-xi * (-delta / r).ln_1p()).exp_m1())
            }
            CfmmKind::Curve { .. } => Ok(self.numeraire_on_level(x)? - rp),
        }
    }

    /// Marginal price `g(delta)` of the traded coin after the trade.
    pub fn marginal_price(&self, delta: f64) -> Result<f64> {
        self.check_domain(delta)?;
        let (r, rp) = (self.reserve_traded, self.reserve_numeraire);
        let x = r - delta;
        match self.kind {
            CfmmKind::ConstantSum => Ok(1.0),
            CfmmKind::ConstantProduct => Ok((rp / r) * (r / x).powi(2)),
            CfmmKind::GeometricMean { tau } => {
                let xi = tau / (1.0 - tau);
                Ok(xi * (rp / r) * (r / x).powf(1.0 + xi))
            }
            CfmmKind::Curve { .. } => {
                let y = self.numeraire_on_level(x)?;
                let p = self.kind.partials(x, y);
                Ok(p.fx / p.fy)
            }
        }
    }

    /// `g(0)`.
    pub fn spot_price(&self) -> f64 {
        let p = self.kind.partials(self.reserve_traded, self.reserve_numeraire);
        match self.kind {
            CfmmKind::ConstantSum => 1.0,
            CfmmKind::ConstantProduct => self.reserve_numeraire / self.reserve_traded,
            CfmmKind::GeometricMean { tau } => {
                tau / (1.0 - tau) * self.reserve_numeraire / self.reserve_traded
            }
            CfmmKind::Curve { .. } => p.fx / p.fy,
        }
    }

    /// Derivative `g'(delta)`, from implicit differentiation of the level set.
    pub fn marginal_price_slope(&self, delta: f64) -> Result<f64> {
        self.check_domain(delta)?;
        let x = self.reserve_traded - delta;
        match self.kind {
            CfmmKind::ConstantSum => Ok(0.0),
            CfmmKind::ConstantProduct => Ok(2.0 * self.marginal_price(delta)? / x),
            CfmmKind::GeometricMean { tau } => {
                let xi = tau / (1.0 - tau);
                Ok((1.0 + xi) * self.marginal_price(delta)? / x)
            }
            CfmmKind::Curve { .. } => {
                let y = self.numeraire_on_level(x)?;
                Ok(level_set_price_slope(&self.kind.partials(x, y)))
            }
        }
    }

    /// Fee-adjusted price `γ·g(γ·delta)` for a sale `delta <= 0` into the pool.
    pub fn marginal_price_with_fee(&self, delta: f64) -> Result<f64> {
        if delta > 0.0 {
            return Err(CfmmError::invalid(format!(
                "fee-adjusted price is defined for sales (delta <= 0), got {delta}; swap the pool for purchases"
            )));
        }
        let gamma = self.fee_gamma;
        Ok(gamma * self.marginal_price(gamma * delta)?)
    }

    /// `price·R + R'`.
    pub fn portfolio_value(&self, price: f64) -> f64 {
        price * self.reserve_traded + self.reserve_numeraire
    }

    /// Pool state after a fee-less trade of size `delta`.
    pub fn apply_trade(&self, delta: f64) -> Result<PoolState> {
        self.check_domain(delta)?;
        if delta == 0.0 {
            return Ok(*self);
        }
        // Solve the level set directly rather than adding the output, which
        // cancels badly when a trade nearly drains the numéraire.
        let x = self.reserve_traded - delta;
        self.with_reserves(x, self.numeraire_on_level(x)?)
    }

    /// Signed trade that moves the marginal price to `price`.
    pub fn trade_to_price(&self, price: f64) -> Result<f64> {
        if !(price.is_finite() && price > 0.0) {
            return Err(CfmmError::invalid(format!("target price {price} must be positive")));
        }
        let g0 = self.spot_price();
        if price == g0 {
            return Ok(0.0);
        }
        let (dmin, dmax) = self.trade_domain();
        let r = self.reserve_traded;
        let out_of_range = |pool: &PoolState| -> Result<f64> {
            let lo = pool.marginal_price(dmin).unwrap_or(0.0);
            let hi = pool.marginal_price(dmax).unwrap_or(f64::INFINITY);
            Err(CfmmError::OutOfRange { price, min: lo, max: hi })
        };
        let delta = match self.kind {
            CfmmKind::ConstantSum => return out_of_range(self),
            CfmmKind::ConstantProduct => r - r * (g0 / price).sqrt(),
            CfmmKind::GeometricMean { tau } => {
                let xi = tau / (1.0 - tau);
                r - r * (g0 / price).powf(1.0 / (1.0 + xi))
            }
            CfmmKind::Curve { .. } => {
                let target = price.ln();
                let f = |d: f64| self.marginal_price(d).map(|g| g.ln() - target).unwrap_or(f64::NAN);
                let limit = if price > g0 { dmax } else { dmin.max(-1e12 * r) };
                match numeric::expand_bracket(f, 0.0, 1e-3 * r, limit) {
                    Some((a, b)) => numeric::bisect(f, a, b, 0.0)?,
                    None => return out_of_range(self),
                }
            }
        };
        if delta < dmin || delta > dmax {
            return out_of_range(self);
        }
        Ok(delta)
    }

    /// Pool after selling `amount_in` of the traded coin with the fee kept in
    /// the reserves. Returns the new state and the numéraire paid out.
    pub fn sell_traded_with_fee(&self, amount_in: f64) -> Result<(PoolState, f64)> {
        if amount_in < 0.0 {
            return Err(CfmmError::invalid("amount_in must be nonnegative"));
        }
        let out = -self.trade_output(-self.fee_gamma * amount_in)?;
        let next = self.with_reserves(self.reserve_traded + amount_in, self.reserve_numeraire - out)?;
        Ok((next, out))
    }

    /// Pool after selling `amount_in` of the numéraire with the fee kept in
    /// the reserves. Returns the new state and the traded coin paid out.
    pub fn sell_numeraire_with_fee(&self, amount_in: f64) -> Result<(PoolState, f64)> {
        let (next, out) = self.swapped().sell_traded_with_fee(amount_in)?;
        Ok((next.swapped(), out))
    }
}

/// `dg/dΔ` along the level set from the reserve-space partials, where the
/// trade moves reserves as `x' = −1`, `y' = g`.
pub fn level_set_price_slope(p: &Partials) -> f64 {
    let g = p.fx / p.fy;
    let dfx = -p.fxx + p.fxy * g;
    let dfy = -p.fxy + p.fyy * g;
    (dfx * p.fy - p.fx * dfy) / (p.fy * p.fy)
}

/// Solves `α(u + v) − β/(u·v) = level` for `v > 0` given `u`, by bracket
/// expansion from `hint` followed by bisection to full precision.
fn curve_other_reserve(alpha: f64, beta: f64, level: f64, u: f64, hint: f64) -> Result<f64> {
    if !(u.is_finite() && u > 0.0) {
        return Err(CfmmError::NoRoot(format!("reserve {u} must be positive")));
    }
    let f = |v: f64| alpha * (u + v) - beta / (u * v) - level;
    let h0 = if hint.is_finite() && hint > 0.0 { hint } else { 1.0 };
    let f0 = f(h0);
    if f0 == 0.0 {
        return Ok(h0);
    }
    let (mut lo, mut hi) = (h0, h0);
    if f0 < 0.0 {
        while f(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(CfmmError::NoRoot("curve level set unbounded".into()));
            }
        }
    } else {
        while f(lo) > 0.0 {
            hi = lo;
            lo *= 0.5;
            if lo < f64::MIN_POSITIVE {
                return Err(CfmmError::NoRoot("curve level set reached zero reserves".into()));
            }
        }
    }
    numeric::bisect(f, lo, hi, 0.0)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoolStateRepr {
    kind: String,
    #[serde(default, skip_serializing_if = "KindParams::is_empty")]
    params: KindParams,
    reserve_traded: f64,
    reserve_numeraire: f64,
    fee_gamma: f64,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KindParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
}

impl KindParams {
    fn is_empty(&self) -> bool {
        self.tau.is_none() && self.alpha.is_none() && self.beta.is_none()
    }
}

impl TryFrom<PoolStateRepr> for PoolState {
    type Error = CfmmError;

    fn try_from(r: PoolStateRepr) -> Result<Self> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| CfmmError::invalid(format!("{} pool requires params.{name}", r.kind)))
        };
        let kind = match r.kind.as_str() {
            "constant_sum" => CfmmKind::ConstantSum,
            "constant_product" => CfmmKind::ConstantProduct,
            "geometric_mean" => CfmmKind::GeometricMean { tau: need(r.params.tau, "tau")? },
            "curve" => CfmmKind::Curve { alpha: need(r.params.alpha, "alpha")?, beta: need(r.params.beta, "beta")? },
            other => return Err(CfmmError::invalid(format!("unknown pool kind {other:?}"))),
        };
        PoolState::new(kind, r.reserve_traded, r.reserve_numeraire, r.fee_gamma)
    }
}

impl From<PoolState> for PoolStateRepr {
    fn from(p: PoolState) -> Self {
        let params = match p.kind {
            CfmmKind::ConstantSum | CfmmKind::ConstantProduct => KindParams::default(),
            CfmmKind::GeometricMean { tau } => KindParams { tau: Some(tau), ..Default::default() },
            CfmmKind::Curve { alpha, beta } => KindParams { alpha: Some(alpha), beta: Some(beta), ..Default::default() },
        };
        PoolStateRepr {
            kind: p.kind.name().to_string(),
            params,
            reserve_traded: p.reserve_traded,
            reserve_numeraire: p.reserve_numeraire,
            fee_gamma: p.fee_gamma,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn product(r: f64, rp: f64) -> PoolState {
        PoolState::feeless(CfmmKind::ConstantProduct, r, rp).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn invariant_values() {
        assert_eq!(product(100.0, 100.0).invariant_value(), 10000.0);
        assert_eq!(PoolState::feeless(CfmmKind::ConstantSum, 3.0, 7.0).unwrap().invariant_value(), 10.0);
        let curve = PoolState::feeless(CfmmKind::Curve { alpha: 1.0, beta: 10.0 }, 10.0, 10.0).unwrap();
        assert!((curve.invariant_value() - 19.9).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(PoolState::feeless(CfmmKind::GeometricMean { tau: 1.0 }, 1.0, 1.0).is_err());
        assert!(PoolState::feeless(CfmmKind::Curve { alpha: 0.0, beta: 1.0 }, 1.0, 1.0).is_err());
        assert!(PoolState::feeless(CfmmKind::ConstantProduct, 0.0, 1.0).is_err());
        assert!(PoolState::new(CfmmKind::ConstantProduct, 1.0, 1.0, 0.0).is_err());
        assert!(PoolState::new(CfmmKind::ConstantProduct, 1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn product_trade_output_matches_closed_form() {
        let pool = product(100.0, 100.0);
        let dp = pool.trade_output(10.0).unwrap();
        assert!(close(dp, 10000.0 / 90.0 - 100.0, 1e-14));
        assert_eq!(pool.trade_output(0.0).unwrap(), 0.0);
        let sum = PoolState::feeless(CfmmKind::ConstantSum, 100.0, 100.0).unwrap();
        assert_eq!(sum.trade_output(10.0).unwrap(), 10.0);
    }

    #[test]
    fn draining_trades_are_rejected() {
        let pool = product(100.0, 100.0);
        assert!(matches!(pool.trade_output(100.0), Err(CfmmError::DomainExceeded { .. })));
        let sum = PoolState::feeless(CfmmKind::ConstantSum, 100.0, 100.0).unwrap();
        assert!(matches!(sum.trade_output(-100.0), Err(CfmmError::DomainExceeded { .. })));
        assert!(sum.trade_output(-99.0).is_ok());
    }

    #[test]
    fn marginal_prices() {
        let pool = product(100.0, 100.0);
        assert_eq!(pool.marginal_price(0.0).unwrap(), 1.0);
        assert!(close(pool.marginal_price(-10.0).unwrap(), 10000.0 / 12100.0, 1e-14));
        let geo = PoolState::feeless(CfmmKind::GeometricMean { tau: 0.5 }, 100.0, 100.0).unwrap();
        assert!(close(geo.marginal_price(-10.0).unwrap(), 0.826446280991735, 1e-12));
    }

    #[test]
    fn fee_adjusted_prices() {
        let pool = PoolState::new(CfmmKind::ConstantProduct, 100.0, 100.0, 0.997).unwrap();
        assert!(close(pool.marginal_price_with_fee(0.0).unwrap(), 0.997, 1e-15));
        let expected = 0.997 * 10000.0 / (100.0f64 + 9.97).powi(2);
        assert!(close(pool.marginal_price_with_fee(-10.0).unwrap(), expected, 1e-14));
        assert!((expected - 0.8244166).abs() < 1e-6);
        assert!(pool.marginal_price_with_fee(1.0).is_err());
        let feeless = product(100.0, 100.0);
        assert_eq!(feeless.marginal_price_with_fee(-7.0).unwrap(), feeless.marginal_price(-7.0).unwrap());
    }

    #[test]
    fn portfolio_values() {
        assert_eq!(product(100.0, 100.0).portfolio_value(1.0), 200.0);
        let geo = PoolState::feeless(CfmmKind::GeometricMean { tau: 0.8 }, 100.0, 25.0).unwrap();
        assert!(close(geo.spot_price(), 1.0, 1e-15));
        assert!(close(geo.portfolio_value(geo.spot_price()), 125.0, 1e-15));
        assert!(close(product(100.0, 100.0).portfolio_value(0.9), 190.0, 1e-15));
    }

    #[test]
    fn curve_root_matches_quadratic_formula() {
        // v solves α v² + (α u − k) v − β/u = 0; the stable root form avoids cancellation.
        let (alpha, beta) = (1.0, 10.0);
        let pool = PoolState::feeless(CfmmKind::Curve { alpha, beta }, 10.0, 10.0).unwrap();
        let k = pool.invariant_value();
        for delta in [-5.0, -1.0, 0.5, 3.0, 9.0] {
            let u: f64 = 10.0 - delta;
            let b = alpha * u - k;
            let c = -beta / u;
            let disc = (b * b - 4.0 * alpha * c).sqrt();
            let v = if b >= 0.0 { 2.0 * c / (-b - disc) } else { (-b + disc) / (2.0 * alpha) };
            let dp = pool.trade_output(delta).unwrap();
            assert!(close(dp + 10.0, v, 1e-13), "delta {delta}: {} vs {v}", dp + 10.0);
        }
    }

    #[test]
    fn curve_price_is_symmetric_at_peg() {
        let pool = PoolState::feeless(CfmmKind::Curve { alpha: 1.0, beta: 10.0 }, 10.0, 10.0).unwrap();
        assert!(close(pool.spot_price(), 1.0, 1e-15));
        assert!(pool.marginal_price(2.0).unwrap() > 1.0);
        assert!(pool.marginal_price(-2.0).unwrap() < 1.0);
    }

    #[test]
    fn trade_to_price_inverts_marginal_price() {
        let pools = [
            product(100.0, 100.0),
            PoolState::feeless(CfmmKind::GeometricMean { tau: 0.3 }, 50.0, 80.0).unwrap(),
            PoolState::feeless(CfmmKind::Curve { alpha: 1.0, beta: 100.0 }, 10.0, 12.0).unwrap(),
        ];
        for pool in pools {
            for m in [0.5, 0.9, 1.3, 2.0] {
                let d = pool.trade_to_price(m).unwrap();
                assert!(close(pool.marginal_price(d).unwrap(), m, 1e-12), "{:?} at {m}", pool.kind());
            }
        }
        let sum = PoolState::feeless(CfmmKind::ConstantSum, 10.0, 10.0).unwrap();
        assert_eq!(sum.trade_to_price(1.0).unwrap(), 0.0);
        assert!(matches!(sum.trade_to_price(0.9), Err(CfmmError::OutOfRange { .. })));
    }

    #[test]
    fn swapped_pool_quotes_reciprocal_price() {
        let pool = PoolState::feeless(CfmmKind::GeometricMean { tau: 0.7 }, 40.0, 90.0).unwrap();
        assert!(close(pool.swapped().spot_price(), 1.0 / pool.spot_price(), 1e-14));
        assert_eq!(pool.swapped().swapped(), pool);
    }

    #[test]
    fn fee_bearing_trades_grow_the_invariant() {
        let pool = PoolState::new(CfmmKind::ConstantProduct, 100.0, 100.0, 0.997).unwrap();
        let (after, out) = pool.sell_traded_with_fee(10.0).unwrap();
        assert!(out > 0.0 && out < 10.0);
        assert!(after.invariant_value() > pool.invariant_value());
        let (after2, out2) = after.sell_numeraire_with_fee(5.0).unwrap();
        assert!(out2 > 0.0);
        assert!(after2.invariant_value() > after.invariant_value());
    }

    #[test]
    fn json_shape() {
        let pool = PoolState::new(CfmmKind::Curve { alpha: 1.0, beta: 10.0 }, 10.0, 12.5, 0.997).unwrap();
        let v = serde_json::to_value(pool).unwrap();
        assert_eq!(
            v,
            serde_json::json!({
                "kind": "curve",
                "params": {"alpha": 1.0, "beta": 10.0},
                "reserve_traded": 10.0,
                "reserve_numeraire": 12.5,
                "fee_gamma": 0.997
            })
        );
        let bad = serde_json::json!({"kind": "geometric_mean", "params": {}, "reserve_traded": 1.0,
            "reserve_numeraire": 1.0, "fee_gamma": 1.0});
        assert!(serde_json::from_value::<PoolState>(bad).is_err());
    }
}
