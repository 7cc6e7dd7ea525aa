//! No-arbitrage resolution between an external market `f` and a secondary
//! market `g`.
//!
//! With `f(0) = m0_e ≤ m0_s = g(0)`, an arbitrageur buys `Δ` on the external
//! market and sells it into the secondary one until `f(Δ*) = g(−Δ*) = m_a`.
//! If `f` is κ-liquid on the buy side and `g` is μ-stable, then
//! `m0_s − m_a ≤ (μ/κ)(m0_s − m0_e)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::curvature::{self, Interval};
use crate::error::{CfmmError, Result};
use crate::impact::PriceImpactFn;
use crate::numeric;
use crate::pool::{CfmmKind, PoolState};

/// μ for the secondary market and buy-side κ for the external market,
/// certified on a common interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCertificate {
    pub mu: f64,
    pub kappa: f64,
    pub interval_l: Interval,
}

#[derive(Debug, Clone)]
pub struct MarketPair {
    pub external: PriceImpactFn,
    pub secondary: PriceImpactFn,
    pub m0_e: f64,
    pub m0_s: f64,
    /// True when both markets were re-expressed in the other asset.
    pub swapped: bool,
    pub certificate: Option<PairCertificate>,
    /// Upper limit on the search when no κ certificate is available.
    pub search_cap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoArbResult {
    pub delta_star: f64,
    pub m_a: f64,
    pub price_move: f64,
    /// `(μ/κ)(m0_s − m0_e)`; absent without a certificate or when κ = 0.
    pub bound: Option<f64>,
    /// The witness `(m0_s − m0_e)/κ`.
    pub overshoot_delta: Option<f64>,
    /// Whether `m0_s − m0_e ≤ κL` holds for a finite-interval certificate.
    pub interval_condition: Option<bool>,
    pub swapped: bool,
}

impl NoArbResult {
    /// `m_a` in the caller's original price units.
    pub fn m_a_original(&self) -> f64 {
        if self.swapped {
            1.0 / self.m_a
        } else {
            self.m_a
        }
    }
}

/// `(μ/κ)(m0_s − m0_e)`.
pub fn stability_bound(mu: f64, kappa: f64, m0_s: f64, m0_e: f64) -> Result<f64> {
    if kappa == 0.0 {
        return Err(CfmmError::KappaZero);
    }
    if !(mu >= 0.0 && kappa > 0.0) {
        return Err(CfmmError::invalid(format!("need mu >= 0 and kappa > 0, got {mu}, {kappa}")));
    }
    if m0_e > m0_s {
        return Err(CfmmError::invalid(format!("external price {m0_e} exceeds secondary price {m0_s}")));
    }
    Ok(mu / kappa * (m0_s - m0_e))
}

/// Whether the price gap fits inside the certified interval: `m0_s − m0_e ≤ κL`.
pub fn check_interval_condition(mu: f64, kappa: f64, l: f64, m0_s: f64, m0_e: f64) -> Result<bool> {
    stability_bound(mu, kappa, m0_s, m0_e)?;
    Ok(m0_s - m0_e <= kappa * l)
}

/// Size `Δ*` of the sale into `g` that brings its price down to `m_a`.
pub fn no_arb_infinite(g: &PriceImpactFn, m_a: f64) -> Result<f64> {
    let g0 = g.spot()?;
    if !(m_a > 0.0) {
        return Err(CfmmError::invalid(format!("price {m_a} must be positive")));
    }
    if m_a > g0 {
        return Err(CfmmError::invalid(format!("price {m_a} lies above g(0) = {g0}; swap the markets")));
    }
    if m_a == g0 {
        return Ok(0.0);
    }
    if let PriceImpactFn::Pool(p) = g {
        return p.trade_to_price(m_a).map(|d| -d);
    }
    let (lo, _) = g.domain();
    let limit = -lo;
    let h = |s: f64| g.eval(-s).map(|v| v - m_a).unwrap_or(f64::NAN);
    let step = if limit.is_finite() { 1e-3 * limit } else { 1.0 };
    match numeric::expand_bracket(h, 0.0, step, limit) {
        Some((a, b)) => numeric::bisect(h, a, b, 0.0),
        None => Err(CfmmError::OutOfRange { price: m_a, min: g.eval(lo).unwrap_or(0.0), max: g0 }),
    }
}

/// Orders the markets so that `m0_e ≤ m0_s`, swapping assets if needed.
pub fn normalize_orientation(f: PriceImpactFn, g: PriceImpactFn) -> Result<MarketPair> {
    let (mf, mg) = (f.spot()?, g.spot()?);
    if !(mf > 0.0 && mg > 0.0) {
        return Err(CfmmError::invalid(format!("prices must be positive, got {mf} and {mg}")));
    }
    let (external, secondary, swapped) = if mf > mg { (f.swapped(), g.swapped(), true) } else { (f, g, false) };
    let m0_e = external.spot()?;
    let m0_s = secondary.spot()?;
    Ok(MarketPair { external, secondary, m0_e, m0_s, swapped, certificate: None, search_cap: None })
}

fn convex_kind(kind: CfmmKind) -> bool {
    !matches!(kind, CfmmKind::Curve { .. })
}

impl MarketPair {
    pub fn new(f: PriceImpactFn, g: PriceImpactFn) -> Result<Self> {
        normalize_orientation(f, g)
    }

    pub fn gap(&self) -> f64 {
        self.m0_s - self.m0_e
    }

    pub fn with_certificate(mut self, mu: f64, kappa: f64, interval_l: Interval) -> Self {
        self.certificate = Some(PairCertificate { mu, kappa, interval_l });
        self
    }

    pub fn with_search_cap(mut self, cap: f64) -> Self {
        self.search_cap = Some(cap);
        self
    }

    /// Global certificate from closed forms: `μ = g'(0)` and `κ = f'(0)`.
    /// Needs pool-backed markets of kinds whose price impact is convex.
    pub fn certify_closed_form(self) -> Result<Self> {
        let (Some(f), Some(g)) = (self.external.as_pool(), self.secondary.as_pool()) else {
            return Err(CfmmError::invalid("closed-form certificate needs pool-backed markets"));
        };
        if !convex_kind(f.kind()) || !convex_kind(g.kind()) {
            return Err(CfmmError::invalid("curve price impact is not convex; use an interval certificate"));
        }
        let mu = curvature::mu_closed_form(g)?.mu.unwrap_or(0.0);
        let kappa = f.marginal_price_slope(0.0)?;
        let interval = match g.kind() {
            CfmmKind::ConstantSum => Interval::Finite(g.reserve_numeraire()),
            _ => Interval::Infinite,
        };
        Ok(self.with_certificate(mu, kappa, interval))
    }

    /// Certificate on `[0, L]` from secant extremes of both markets.
    pub fn certify_on_interval(self, l: f64) -> Result<Self> {
        let mu = curvature::mu_on_interval(&self.secondary, l)?;
        let kappa = curvature::kappa_buy_on_interval(&self.external, l)?;
        Ok(self.with_certificate(mu, kappa, Interval::Finite(l)))
    }

    /// Closed-form certificate when available, otherwise an interval
    /// certificate over a quarter of the smaller pool's traded reserve.
    pub fn certify_auto(self) -> Result<Self> {
        let attempt = self.clone().certify_closed_form();
        if let Ok(pair) = attempt {
            return Ok(pair);
        }
        let mut l = f64::INFINITY;
        for m in [&self.external, &self.secondary] {
            l = l.min(match m {
                PriceImpactFn::Pool(p) => 0.25 * p.reserve_traded(),
                other => {
                    let (lo, hi) = other.domain();
                    0.25 * hi.min(-lo)
                }
            });
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(CfmmError::invalid("cannot choose a certificate interval"));
        }
        self.certify_on_interval(l)
    }
}

/// Resolves the no-arbitrage trade for `pair`.
pub fn no_arb_pair(pair: &MarketPair) -> Result<NoArbResult> {
    let (f, g) = (&pair.external, &pair.secondary);
    let (m0_e, m0_s) = (pair.m0_e, pair.m0_s);
    if m0_e > m0_s {
        return Err(CfmmError::invalid("market pair is not normalized: m0_e > m0_s"));
    }
    let gap = m0_s - m0_e;
    let cert = pair.certificate;
    let bound = cert.and_then(|c| if c.kappa > 0.0 { Some(c.mu / c.kappa * gap) } else { None });
    let overshoot = cert.and_then(|c| if c.kappa > 0.0 { Some(gap / c.kappa) } else { None });
    let interval_condition = cert.and_then(|c| match c.interval_l {
        Interval::Finite(l) if c.kappa > 0.0 => Some(gap <= c.kappa * l),
        _ => None,
    });
    let result = |delta_star: f64, m_a: f64| NoArbResult {
        delta_star,
        m_a,
        price_move: m0_s - m_a,
        bound,
        overshoot_delta: overshoot,
        interval_condition,
        swapped: pair.swapped,
    };
    if gap == 0.0 {
        return Ok(result(0.0, m0_s));
    }
    let flat_external = matches!(f, PriceImpactFn::Constant(_)) || cert.is_some_and(|c| c.kappa == 0.0);
    if flat_external {
        let d = no_arb_infinite(g, m0_e)?;
        return Ok(result(d, m0_e));
    }

    let (_, f_hi) = f.domain();
    let (g_lo, _) = g.domain();
    let domain_cap = f_hi.min(-g_lo);
    // The witness is exact in real arithmetic; widen by a few ulps for rounding.
    let cap = overshoot.map(|o| o * (1.0 + 1e-12)).or(pair.search_cap).unwrap_or(domain_cap).min(domain_cap);
    let h = |s: f64| match (f.eval(s), g.eval(-s)) {
        (Ok(a), Ok(b)) => a - b,
        _ => f64::NAN,
    };
    let h_cap = h(cap);
    if !(h_cap >= 0.0) {
        return Err(CfmmError::NoCrossing {
            cap,
            external: f.eval(cap).unwrap_or(f64::NAN),
            secondary: g.eval(-cap).unwrap_or(f64::NAN),
        });
    }
    let d = numeric::bisect(h, 0.0, cap, 0.0)?;
    Ok(result(d, g.eval(-d)?))
}

/// External price path for [`simulate_rounds`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum PriceProcess {
    /// External price for each round.
    Series { prices: Vec<f64> },
    /// Multiplicative walk `m ← m·exp(σz)` from the post-arbitrage price.
    Walk { sigma: f64 },
}

/// External market driven by the price process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExternalMarket {
    /// A CFMM moved to each shock price along its own invariant.
    Pool(PoolState),
    /// Infinite liquidity at the shock price.
    Price(f64),
}

impl ExternalMarket {
    fn price(&self) -> f64 {
        match self {
            ExternalMarket::Pool(p) => p.spot_price(),
            ExternalMarket::Price(m) => *m,
        }
    }

    fn impact(&self) -> PriceImpactFn {
        match self {
            ExternalMarket::Pool(p) => PriceImpactFn::Pool(*p),
            ExternalMarket::Price(m) => PriceImpactFn::Constant(*m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub round: usize,
    pub m0_e: f64,
    pub m0_s: f64,
    pub m_a: f64,
    /// Size of the arbitrage trade, in whichever asset the external market
    /// quoted cheaper.
    pub delta_star: f64,
    /// Bound on `|m_a − m0_s|` in original units; infinite when uncertified.
    pub bound: f64,
    /// Secondary pool value `m_a·R + R'` after the round.
    pub pv_lp: f64,
}

impl TrajectoryRow {
    pub fn within_bound(&self) -> bool {
        (self.m_a - self.m0_s).abs() <= self.bound + 1e-9
    }
}

/// Runs `rounds` of shock, arbitrage and reserve updates. Trajectories are
/// reproducible from `seed` (ChaCha8 stream, standard normal shocks).
pub fn simulate_rounds(
    external: ExternalMarket,
    secondary: PoolState,
    process: &PriceProcess,
    rounds: usize,
    seed: u64,
) -> Result<Vec<TrajectoryRow>> {
    if let PriceProcess::Series { prices } = process {
        if prices.len() < rounds {
            return Err(CfmmError::invalid(format!("price series has {} entries for {rounds} rounds", prices.len())));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ext = external;
    let mut sec = secondary;
    let mut rows = Vec::with_capacity(rounds);
    for round in 0..rounds {
        let mut step = || -> Result<TrajectoryRow> {
            let target = match process {
                PriceProcess::Series { prices } => prices[round],
                PriceProcess::Walk { sigma } => {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    ext.price() * (sigma * z).exp()
                }
            };
            ext = match ext {
                ExternalMarket::Pool(p) => ExternalMarket::Pool(p.apply_trade(p.trade_to_price(target)?)?),
                ExternalMarket::Price(_) => ExternalMarket::Price(target),
            };
            let m0_e = ext.price();
            let m0_s = sec.spot_price();
            let pair = MarketPair::new(ext.impact(), PriceImpactFn::Pool(sec))?.certify_auto()?;
            let res = no_arb_pair(&pair)?;
            let bound = match (res.bound, res.interval_condition) {
                (_, Some(false)) | (None, _) => f64::INFINITY,
                (Some(b), _) if pair.swapped => {
                    let inv = 1.0 / m0_s - b;
                    if inv > 0.0 {
                        1.0 / inv - m0_s
                    } else {
                        f64::INFINITY
                    }
                }
                (Some(b), _) => b,
            };

            // Apply the trade in the normalized frame and map back.
            let orient = |p: PoolState| if pair.swapped { p.swapped() } else { p };
            let d = res.delta_star;
            if d > 0.0 {
                sec = orient(orient(sec).apply_trade(-d)?);
                if let ExternalMarket::Pool(p) = ext {
                    ext = ExternalMarket::Pool(orient(orient(p).apply_trade(d)?));
                }
            }
            let m_a = res.m_a_original();
            Ok(TrajectoryRow { round, m0_e, m0_s, m_a, delta_star: d, bound, pv_lp: sec.portfolio_value(m_a) })
        };
        rows.push(step().map_err(|e| e.in_round(round))?);
    }
    Ok(rows)
}
