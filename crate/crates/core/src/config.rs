//! JSON scenario configuration for the command-line tool.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arbitrage::PriceProcess;
use crate::games::{GdaConfig, PriceTarget};
use crate::pool::{CfmmKind, PoolState};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("config error at {path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub pools: BTreeMap<String, PoolState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature: Option<CurvatureOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arb: Option<ArbOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<GameOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsidy: Option<SubsidyOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub greeks: Option<GreeksOptions>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Alpha,
    Beta,
    Tau,
    ReserveTraded,
    ReserveNumeraire,
    /// Multiplies both reserves.
    Scale,
    /// Rebuilds the pool at peg with this portfolio value.
    PortfolioValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

/// One sweep axis over a named pool: explicit `values`, or `steps` points
/// from `start` to `stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub pool: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Spacing>,
}

impl Sweep {
    pub fn points(&self) -> Result<Vec<f64>, ConfigError> {
        if let Some(v) = &self.values {
            if self.start.is_some() || self.stop.is_some() || self.steps.is_some() {
                return Err(ConfigError::new("sweep", "give either values or start/stop/steps"));
            }
            if v.is_empty() {
                return Err(ConfigError::new("sweep.values", "sweep is empty"));
            }
            if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                return Err(ConfigError::new("sweep.values", format!("{x} is not finite")));
            }
            return Ok(v.clone());
        }
        let (Some(a), Some(b), Some(n)) = (self.start, self.stop, self.steps) else {
            return Err(ConfigError::new("sweep", "needs values or all of start, stop and steps"));
        };
        if n == 0 {
            return Err(ConfigError::new("sweep.steps", "sweep is empty"));
        }
        if !(a.is_finite() && b.is_finite()) {
            return Err(ConfigError::new("sweep", "start and stop must be finite"));
        }
        if n == 1 {
            return Ok(vec![a]);
        }
        let t = |i: usize| i as f64 / (n - 1) as f64;
        match self.spacing.unwrap_or(Spacing::Linear) {
            Spacing::Linear => Ok((0..n).map(|i| if i == n - 1 { b } else { a + (b - a) * t(i) }).collect()),
            Spacing::Log => {
                if !(a > 0.0 && b > 0.0) {
                    return Err(ConfigError::new("sweep", "log spacing needs positive start and stop"));
                }
                let (la, lb) = (a.ln(), b.ln());
                Ok((0..n).map(|i| if i == n - 1 { b } else if i == 0 { a } else { (la + (lb - la) * t(i)).exp() }).collect())
            }
        }
    }

    /// `pool` with the swept parameter set to `value`.
    pub fn apply(&self, pool: &PoolState, value: f64) -> Result<PoolState, ConfigError> {
        let err = |e: crate::CfmmError| ConfigError::new(format!("sweep ({value})"), e.to_string());
        let kind_err = || ConfigError::new("sweep.parameter", format!("{:?} does not apply to a {} pool", self.parameter, pool.kind().name()));
        let (r, rp, fee) = (pool.reserve_traded(), pool.reserve_numeraire(), pool.fee_gamma());
        let with_kind = |kind: CfmmKind| PoolState::new(kind, r, rp, fee).map_err(err);
        match (self.parameter, pool.kind()) {
            (SweepParameter::Alpha, CfmmKind::Curve { beta, .. }) => with_kind(CfmmKind::Curve { alpha: value, beta }),
            (SweepParameter::Beta, CfmmKind::Curve { alpha, .. }) => with_kind(CfmmKind::Curve { alpha, beta: value }),
            (SweepParameter::Tau, CfmmKind::GeometricMean { .. }) => {
                // Keep the spot price: R' = m·R(1 − τ)/τ.
                let m = pool.spot_price();
                let rp = m * r * (1.0 - value) / value;
                PoolState::new(CfmmKind::GeometricMean { tau: value }, r, rp, fee).map_err(err)
            }
            (SweepParameter::Alpha | SweepParameter::Beta | SweepParameter::Tau, _) => Err(kind_err()),
            (SweepParameter::ReserveTraded, _) => pool.with_reserves(value, rp).map_err(err),
            (SweepParameter::ReserveNumeraire, _) => pool.with_reserves(r, value).map_err(err),
            (SweepParameter::Scale, _) => pool.with_reserves(value * r, value * rp).map_err(err),
            (SweepParameter::PortfolioValue, kind) => PoolState::at_peg(kind, value, fee).map_err(err),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureMethod {
    /// Closed forms; Curve reports its peg slope.
    ClosedForm,
    /// Secant extremes over `[0, L]`.
    Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureOptions {
    pub pool: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<CurvatureMethod>,
    /// Interval for κ; defaults to a quarter of the traded reserve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval_l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArbOptions {
    pub external: String,
    pub secondary: String,
    /// Certificate interval; closed forms are used where available otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval_l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimOptions {
    /// Pool name for a finite external market.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external: Option<String>,
    /// Infinitely liquid external market at this starting price.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_price: Option<f64>,
    pub secondary: String,
    pub process: PriceProcess,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiperiodOptions {
    pub alphas: Vec<f64>,
    pub targets: Vec<PriceTarget>,
    pub gda: GdaConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameOptions {
    pub pool: String,
    pub alpha: f64,
    pub m1: f64,
    pub interval_l: f64,
    /// Price for the uninformed profitable-trade bound; defaults to the spot price.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiperiod: Option<MultiperiodOptions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum SubsidyOptions {
    /// §3.3 subsidy for an arbitrage pair, checked against the realized cost.
    Pair {
        external: String,
        secondary: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interval_l: Option<f64>,
    },
    /// Excess-loss schedule between two weighted pools.
    Balancer { pool1: String, pool2: String, trades: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum GreeksOptions {
    TwoAsset { pool: String, prices: Vec<f64> },
    Replication { cutoff: f64, epsilon: f64, k_max: f64, intervals: usize },
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(if path == "." { "$".to_string() } else { path }, e.into_inner().to_string())
        })?;
        if config.version != CONFIG_VERSION {
            return Err(ConfigError::new("version", format!("unsupported version {}, expected {CONFIG_VERSION}", config.version)));
        }
        if let Some(sweep) = &config.sweep {
            config.pool(&sweep.pool, "sweep.pool")?;
            sweep.points()?;
        }
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn pool(&self, name: &str, path: &str) -> Result<PoolState, ConfigError> {
        self.pools.get(name).copied().ok_or_else(|| ConfigError::new(path, format!("pool {name:?} is not defined")))
    }

    /// Sweep values, or a single unnamed point when there is no sweep.
    pub fn sweep_points(&self) -> Result<Vec<Option<f64>>, ConfigError> {
        match &self.sweep {
            Some(s) => Ok(s.points()?.into_iter().map(Some).collect()),
            None => Ok(vec![None]),
        }
    }

    /// Pool `name` at a sweep point.
    pub fn pool_at(&self, name: &str, path: &str, point: Option<f64>) -> Result<PoolState, ConfigError> {
        let base = self.pool(name, path)?;
        match (&self.sweep, point) {
            (Some(s), Some(v)) if s.pool == name => s.apply(&base, v),
            _ => Ok(base),
        }
    }
}
