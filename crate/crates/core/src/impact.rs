//! Price impact functions: the map from a signed trade size to the marginal
//! price quoted after the trade.

use std::fmt;
use std::io::Read;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{CfmmError, Result};
use crate::numeric;
use crate::pool::PoolState;

type PriceClosure = dyn Fn(f64) -> f64 + Send + Sync;

/// A nondecreasing, strictly positive price impact function on a trade
/// domain `[delta_min, delta_max]`.
#[derive(Clone)]
pub enum PriceImpactFn {
    /// Backed by a CFMM pool.
    Pool(PoolState),
    /// Linear interpolation between tabulated `(delta, price)` points.
    Table(PriceTable),
    /// Infinite liquidity at a fixed price.
    Constant(f64),
    /// User closure with an explicit domain.
    Custom { f: Arc<PriceClosure>, domain: (f64, f64) },
    /// The wrapped market seen with the two assets exchanged. The domain is
    /// computed once at construction.
    Swapped { inner: Box<PriceImpactFn>, domain: (f64, f64) },
}

impl fmt::Debug for PriceImpactFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriceImpactFn::Pool(p) => f.debug_tuple("Pool").field(p).finish(),
            PriceImpactFn::Table(t) => f.debug_tuple("Table").field(&t.points.len()).finish(),
            PriceImpactFn::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            PriceImpactFn::Custom { domain, .. } => f.debug_struct("Custom").field("domain", domain).finish(),
            PriceImpactFn::Swapped { inner, .. } => f.debug_tuple("Swapped").field(inner).finish(),
        }
    }
}

impl From<PoolState> for PriceImpactFn {
    fn from(pool: PoolState) -> Self {
        PriceImpactFn::Pool(pool)
    }
}

impl PriceImpactFn {
    pub fn custom<F>(f: F, domain: (f64, f64)) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        PriceImpactFn::Custom { f: Arc::new(f), domain }
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            PriceImpactFn::Pool(p) => p.trade_domain(),
            PriceImpactFn::Table(t) => (t.points[0].0, t.points[t.points.len() - 1].0),
            PriceImpactFn::Constant(_) => (f64::NEG_INFINITY, f64::INFINITY),
            PriceImpactFn::Custom { domain, .. } => *domain,
            PriceImpactFn::Swapped { domain, .. } => *domain,
        }
    }

    fn check_domain(&self, delta: f64) -> Result<()> {
        let (min, max) = self.domain();
        if delta.is_nan() || delta < min || delta > max {
            Err(CfmmError::DomainExceeded { delta, min, max })
        } else {
            Ok(())
        }
    }

    /// `g(delta)`.
    pub fn eval(&self, delta: f64) -> Result<f64> {
        match self {
            PriceImpactFn::Pool(p) => p.marginal_price(delta),
            PriceImpactFn::Table(t) => {
                self.check_domain(delta)?;
                Ok(t.interpolate(delta))
            }
            PriceImpactFn::Constant(c) => Ok(*c),
            PriceImpactFn::Custom { f, .. } => {
                self.check_domain(delta)?;
                Ok(f(delta))
            }
            PriceImpactFn::Swapped { inner, .. } => {
                self.check_domain(delta)?;
                let d = inner.inverse_quantity(-delta)?;
                Ok(1.0 / inner.eval(d)?)
            }
        }
    }

    /// `g(0)`.
    pub fn spot(&self) -> Result<f64> {
        match self {
            PriceImpactFn::Pool(p) => Ok(p.spot_price()),
            _ => self.eval(0.0),
        }
    }

    /// Quantity function `q(delta) = ∫₀^delta g(t) dt`: the numéraire paid
    /// for a purchase of `delta`.
    pub fn quantity(&self, delta: f64) -> Result<f64> {
        self.check_domain(delta)?;
        match self {
            PriceImpactFn::Pool(p) => p.trade_output(delta),
            PriceImpactFn::Constant(c) => Ok(c * delta),
            PriceImpactFn::Table(t) => Ok(t.integral(delta)),
            PriceImpactFn::Custom { f, .. } => {
                let scale = f(0.0).abs().max(1.0) * delta.abs().max(1.0);
                Ok(numeric::integrate(|t| f(t), 0.0, delta, 1e-13 * scale))
            }
            PriceImpactFn::Swapped { inner, .. } => {
                // Buying b of the former numéraire means selling a = −d of the
                // former traded coin where q(d) = −b.
                let d = inner.inverse_quantity(-delta)?;
                Ok(-d)
            }
        }
    }

    /// Trade size whose quantity is `target`.
    pub fn inverse_quantity(&self, target: f64) -> Result<f64> {
        if target == 0.0 {
            return Ok(0.0);
        }
        match self {
            PriceImpactFn::Constant(c) => Ok(target / c),
            PriceImpactFn::Pool(p) => {
                // q(d) = y − R' on the level set.
                let x = p.traded_on_level(p.reserve_numeraire() + target)?;
                let d = p.reserve_traded() - x;
                self.check_domain(d)?;
                Ok(d)
            }
            _ => {
                let (lo, hi) = self.domain();
                let limit = if target > 0.0 { hi } else { lo };
                let f = |d: f64| self.quantity(d).map(|q| q - target).unwrap_or(f64::NAN);
                let step = if limit.is_finite() { 1e-3 * limit.abs().max(1e-12) } else { 1.0 };
                let (a, b) = numeric::expand_bracket(f, 0.0, step, limit)
                    .ok_or_else(|| CfmmError::NoRoot(format!("quantity {target} not reachable in domain")))?;
                numeric::bisect(f, a, b, 0.0)
            }
        }
    }

    /// `g'(delta)`: analytic for pools, central difference otherwise.
    pub fn slope(&self, delta: f64) -> Result<f64> {
        match self {
            PriceImpactFn::Pool(p) => p.marginal_price_slope(delta),
            PriceImpactFn::Constant(_) => Ok(0.0),
            _ => {
                let (lo, hi) = self.domain();
                let h = 1e-6 * delta.abs().max(1.0);
                if delta - h >= lo && delta + h <= hi {
                    numeric::central_derivative(|t| self.eval(t), delta, h)
                } else if delta + h <= hi {
                    numeric::forward_derivative(|t| self.eval(t), delta, h)
                } else {
                    numeric::backward_derivative(|t| self.eval(t), delta, h)
                }
            }
        }
    }

    /// The same market with the assets exchanged; prices become reciprocal.
    pub fn swapped(&self) -> PriceImpactFn {
        match self {
            PriceImpactFn::Pool(p) => PriceImpactFn::Pool(p.swapped()),
            PriceImpactFn::Constant(c) => PriceImpactFn::Constant(1.0 / c),
            PriceImpactFn::Swapped { inner, .. } => (**inner).clone(),
            other => {
                let (lo, hi) = other.domain();
                let qlo = other.quantity(lo).unwrap_or(f64::NEG_INFINITY);
                let qhi = other.quantity(hi).unwrap_or(f64::INFINITY);
                PriceImpactFn::Swapped { inner: Box::new(other.clone()), domain: (-qhi, -qlo) }
            }
        }
    }

    pub fn as_pool(&self) -> Option<&PoolState> {
        match self {
            PriceImpactFn::Pool(p) => Some(p),
            _ => None,
        }
    }
}

/// Tabulated price impact, sorted by trade size.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    points: Vec<(f64, f64)>,
}

#[derive(Deserialize)]
struct TableRow {
    delta: f64,
    price: f64,
}

impl PriceTable {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(CfmmError::invalid("a price table needs at least two points"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in points.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(CfmmError::invalid(format!("duplicate delta {} in price table", w[0].0)));
            }
            if w[1].1 < w[0].1 {
                return Err(CfmmError::invalid(format!(
                    "price table must be nondecreasing in delta: {} at {} then {} at {}",
                    w[0].1, w[0].0, w[1].1, w[1].0
                )));
            }
        }
        if let Some(&(d, p)) = points.iter().find(|(d, p)| !(d.is_finite() && p.is_finite() && *p > 0.0)) {
            return Err(CfmmError::invalid(format!("invalid table point ({d}, {p})")));
        }
        Ok(PriceTable { points })
    }

    /// Reads a CSV with header `delta,price`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut points = Vec::new();
        for row in rdr.deserialize::<TableRow>() {
            let row = row.map_err(|e| CfmmError::invalid(format!("price table csv: {e}")))?;
            points.push((row.delta, row.price));
        }
        Self::new(points)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    fn interpolate(&self, x: f64) -> f64 {
        let pts = &self.points;
        let i = pts.partition_point(|p| p.0 <= x).clamp(1, pts.len() - 1);
        let (x0, y0) = pts[i - 1];
        let (x1, y1) = pts[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Exact integral of the interpolant from 0 to `x`.
    fn integral(&self, x: f64) -> f64 {
        let (a, b, sign) = if x >= 0.0 { (0.0, x, 1.0) } else { (x, 0.0, -1.0) };
        let mut knots = vec![a];
        knots.extend(self.points.iter().map(|p| p.0).filter(|&k| k > a && k < b));
        knots.push(b);
        let area: f64 = knots
            .windows(2)
            .map(|w| 0.5 * (w[1] - w[0]) * (self.interpolate(w[0]) + self.interpolate(w[1])))
            .sum();
        sign * area
    }
}
