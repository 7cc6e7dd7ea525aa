//! Command drivers behind the `cfmm` binary. Each command renders its
//! output as text and counts violated bound checks.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::arbitrage::{self, ExternalMarket, MarketPair};
use crate::config::{ConfigError, CurvatureMethod, GreeksOptions, ScenarioConfig, SubsidyOptions};
use crate::curvature;
use crate::error::CfmmError;
use crate::games::{self, GameSpec};
use crate::greeks;
use crate::impact::PriceImpactFn;
use crate::incentives;
use crate::pool::PoolState;

/// Tolerance for the pass/fail status of bound checks in command output.
pub const CHECK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Curvature,
    Arb,
    Sim,
    Game,
    Subsidy,
    Greeks,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Curvature => "curvature",
            Command::Arb => "arb",
            Command::Sim => "sim",
            Command::Game => "game",
            Command::Subsidy => "subsidy",
            Command::Greeks => "greeks",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Numeric { context: String, source: CfmmError },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numeric { .. } => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
        }
    }
}

/// Flag values that override the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub body: String,
    pub violations: usize,
}

impl CommandOutput {
    pub fn exit_code(&self) -> i32 {
        if self.violations > 0 {
            1
        } else {
            0
        }
    }
}

pub fn run(command: Command, config: &ScenarioConfig, overrides: Overrides) -> Result<CommandOutput, CliError> {
    match command {
        Command::Curvature => cmd_curvature(config),
        Command::Arb => cmd_arb(config),
        Command::Sim => cmd_sim(config, overrides),
        Command::Game => cmd_game(config, overrides),
        Command::Subsidy => cmd_subsidy(config),
        Command::Greeks => cmd_greeks(config),
    }
}

fn missing(section: &str) -> CliError {
    ConfigError::new(section, "section is required for this command").into()
}

fn numeric(context: impl Into<String>) -> impl FnOnce(CfmmError) -> CliError {
    let context = context.into();
    move |source| CliError::Numeric { context, source }
}

fn point_label(point: Option<f64>) -> String {
    match point {
        Some(v) => format!("sweep point {}", fmt(v)),
        None => "scenario".to_string(),
    }
}

/// Float rendering for CSV: 17 significant digits.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_body(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_io = |e: csv::Error| CliError::Io(std::io::Error::other(e));
    w.write_record(header).map_err(to_io)?;
    for r in rows {
        w.write_record(r).map_err(to_io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn param_cell(point: Option<f64>) -> String {
    point.map(fmt).unwrap_or_default()
}

fn status(ok: bool) -> String {
    if ok { "pass" } else { "fail" }.to_string()
}

/// Evaluates `f` at every sweep point in parallel, keeping sweep order.
fn over_sweep<T: Send>(
    config: &ScenarioConfig,
    f: impl Fn(Option<f64>) -> Result<T, CliError> + Sync + Send,
) -> Result<Vec<T>, CliError> {
    config.sweep_points()?.into_par_iter().map(&f).collect()
}

pub fn cmd_curvature(config: &ScenarioConfig) -> Result<CommandOutput, CliError> {
    let opts = config.curvature.as_ref().ok_or_else(|| missing("curvature"))?;
    config.pool(&opts.pool, "curvature.pool")?;
    if let Some(l) = opts.interval_l {
        if !(l > 0.0) {
            return Err(ConfigError::new("curvature.interval_l", "must be positive").into());
        }
    }
    let rows = over_sweep(config, |point| {
        let pool = config.pool_at(&opts.pool, "curvature.pool", point)?;
        let l = opts.interval_l.unwrap_or(0.25 * pool.reserve_traded());
        let ctx = numeric(point_label(point));
        let (mu, kappa) = match opts.method.unwrap_or(CurvatureMethod::ClosedForm) {
            CurvatureMethod::ClosedForm => {
                let mu = curvature::mu_closed_form(&pool).map_err(numeric(point_label(point)))?.mu.unwrap_or(0.0);
                let kappa = curvature::kappa_closed_form(&pool, l).map_err(ctx)?.kappa.unwrap_or(0.0);
                (mu, kappa)
            }
            CurvatureMethod::Interval => {
                let b = curvature::certify(&PriceImpactFn::Pool(pool), l).map_err(ctx)?;
                (b.mu.unwrap_or(0.0), b.kappa.unwrap_or(0.0))
            }
        };
        Ok(vec![param_cell(point), fmt(mu), fmt(kappa), fmt(l)])
    })?;
    Ok(CommandOutput { body: csv_body(&["parameter", "mu", "kappa", "interval_l"], &rows)?, violations: 0 })
}

fn certified_pair(f: PoolState, g: PoolState, interval_l: Option<f64>) -> Result<MarketPair, CfmmError> {
    let pair = MarketPair::new(PriceImpactFn::Pool(f), PriceImpactFn::Pool(g))?;
    match interval_l {
        Some(l) => pair.certify_on_interval(l),
        None => pair.certify_auto(),
    }
}

pub fn cmd_arb(config: &ScenarioConfig) -> Result<CommandOutput, CliError> {
    let opts = config.arb.as_ref().ok_or_else(|| missing("arb"))?;
    config.pool(&opts.external, "arb.external")?;
    config.pool(&opts.secondary, "arb.secondary")?;
    let rows = over_sweep(config, |point| {
        let f = config.pool_at(&opts.external, "arb.external", point)?;
        let g = config.pool_at(&opts.secondary, "arb.secondary", point)?;
        let pair = certified_pair(f, g, opts.interval_l).map_err(numeric(point_label(point)))?;
        let r = arbitrage::no_arb_pair(&pair).map_err(numeric(point_label(point)))?;
        let bound = r.bound.unwrap_or(f64::INFINITY);
        let ok = r.price_move <= bound + CHECK_TOLERANCE;
        Ok((
            vec![
                param_cell(point),
                fmt(pair.m0_e),
                fmt(pair.m0_s),
                fmt(r.delta_star),
                fmt(r.m_a),
                fmt(r.price_move),
                fmt(bound),
                r.swapped.to_string(),
                status(ok),
            ],
            ok,
        ))
    })?;
    let violations = rows.iter().filter(|r| !r.1).count();
    let rows: Vec<_> = rows.into_iter().map(|r| r.0).collect();
    let header = ["parameter", "m0_e", "m0_s", "delta_star", "m_a", "price_move", "bound", "swapped", "status"];
    Ok(CommandOutput { body: csv_body(&header, &rows)?, violations })
}

fn seed(config: &ScenarioConfig, overrides: Overrides, path: &str) -> Result<u64, ConfigError> {
    overrides.seed.or(config.seed).ok_or_else(|| ConfigError::new(path, "seed is required (config seed or --seed)"))
}

pub fn cmd_sim(config: &ScenarioConfig, overrides: Overrides) -> Result<CommandOutput, CliError> {
    let opts = config.sim.as_ref().ok_or_else(|| missing("sim"))?;
    let seed = seed(config, overrides, "seed")?;
    let rounds = overrides.samples.unwrap_or(opts.rounds);
    if rounds == 0 {
        return Err(ConfigError::new("sim.rounds", "need at least one round").into());
    }
    let external = match (&opts.external, opts.external_price) {
        (Some(name), None) => ExternalMarket::Pool(config.pool(name, "sim.external")?),
        (None, Some(m)) if m > 0.0 => ExternalMarket::Price(m),
        _ => return Err(ConfigError::new("sim", "give exactly one of external or a positive external_price").into()),
    };
    let secondary = config.pool(&opts.secondary, "sim.secondary")?;
    let rows = arbitrage::simulate_rounds(external, secondary, &opts.process, rounds, seed).map_err(numeric("sim"))?;
    let violations = rows.iter().filter(|r| !r.within_bound()).count();
    let body_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.round.to_string(),
                fmt(r.m0_e),
                fmt(r.m0_s),
                fmt(r.m_a),
                fmt(r.delta_star),
                fmt(r.bound),
                fmt(r.pv_lp),
                status(r.within_bound()),
            ]
        })
        .collect();
    let header = ["round", "m0_e", "m0_s", "m_a", "delta_star", "bound", "pv_lp", "status"];
    Ok(CommandOutput { body: csv_body(&header, &body_rows)?, violations })
}

#[derive(Serialize)]
struct GameReport {
    parameter: Option<f64>,
    max_profitable_trade: f64,
    optimum: games::EdgeOptimum,
    loss_bound: games::LossBound,
    kappa: f64,
    optimum_status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    multiperiod: Option<Vec<games::MultiperiodRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo: Option<Vec<games::MonteCarloPoint>>,
}

pub fn cmd_game(config: &ScenarioConfig, overrides: Overrides) -> Result<CommandOutput, CliError> {
    let opts = config.game.as_ref().ok_or_else(|| missing("game"))?;
    config.pool(&opts.pool, "game.pool")?;
    let seed = match opts.multiperiod {
        Some(_) => Some(seed(config, overrides, "seed")?),
        None => None,
    };
    let reports = over_sweep(config, |point| {
        let pool = config.pool_at(&opts.pool, "game.pool", point)?;
        let ctx = || numeric(point_label(point));
        let spec = GameSpec {
            alpha: opts.alpha,
            m0: pool.fee_gamma() * pool.spot_price(),
            m1: opts.m1,
            gamma: pool.fee_gamma(),
            interval_l: opts.interval_l,
        };
        spec.validate().map_err(|e| ConfigError::new("game", e.to_string()))?;
        let g = PriceImpactFn::Pool(pool);
        let max_trade = games::max_profitable_trade(&pool, opts.m_a.unwrap_or(pool.spot_price())).map_err(ctx())?;
        let optimum = games::informed_edge_opt(&spec, &g).map_err(ctx())?;
        let kappa = curvature::kappa_on_interval(&g, opts.interval_l).map_err(ctx())?;
        let loss_bound = games::lp_loss_bound(&spec, kappa, opts.interval_l).map_err(ctx())?;
        let ok = optimum.value >= optimum.lower_bound - CHECK_TOLERANCE;
        let (multiperiod, monte_carlo) = match (&opts.multiperiod, seed) {
            (Some(mp), Some(seed)) => {
                let rows = games::multiperiod_sim(&pool, &mp.alphas, &mp.targets, &mp.gda, seed).map_err(ctx())?;
                let mc = match overrides.samples {
                    Some(n) => Some(games::multiperiod_monte_carlo(&pool, &mp.alphas, &mp.targets, &mp.gda, seed, n).map_err(ctx())?),
                    None => None,
                };
                (Some(rows), mc)
            }
            _ => (None, None),
        };
        Ok(GameReport {
            parameter: point,
            max_profitable_trade: max_trade,
            optimum,
            loss_bound,
            kappa,
            optimum_status: status(ok),
            multiperiod,
            monte_carlo,
        })
    })?;
    let violations = reports.iter().filter(|r| r.optimum_status != "pass").count();
    let mut body = serde_json::to_string_pretty(&reports).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    body.push('\n');
    Ok(CommandOutput { body, violations })
}

pub fn cmd_subsidy(config: &ScenarioConfig) -> Result<CommandOutput, CliError> {
    let opts = config.subsidy.as_ref().ok_or_else(|| missing("subsidy"))?;
    match opts {
        SubsidyOptions::Pair { external, secondary, interval_l } => {
            config.pool(external, "subsidy.external")?;
            config.pool(secondary, "subsidy.secondary")?;
            let rows = over_sweep(config, |point| {
                let f = config.pool_at(external, "subsidy.external", point)?;
                let g = config.pool_at(secondary, "subsidy.secondary", point)?;
                let ctx = || numeric(point_label(point));
                let pair = certified_pair(f, g, *interval_l).map_err(ctx())?;
                let c = pair.certificate.expect("certified pair");
                let s = incentives::sufficient_subsidy(c.mu, c.kappa, pair.m0_s, pair.m0_e).map_err(ctx())?;
                let r = incentives::verify_subsidy(&pair, &s, CHECK_TOLERANCE).map_err(ctx())?;
                Ok((
                    vec![
                        param_cell(point),
                        fmt(pair.m0_s),
                        fmt(pair.m0_e),
                        fmt(r.delta_star),
                        fmt(s.subsidy_numeraire),
                        fmt(s.subsidy_traded),
                        fmt(r.realized_cost),
                        fmt(r.slack),
                        status(r.passed),
                    ],
                    r.passed,
                ))
            })?;
            let violations = rows.iter().filter(|r| !r.1).count();
            let rows: Vec<_> = rows.into_iter().map(|r| r.0).collect();
            let header = [
                "parameter",
                "m0_s",
                "m0_e",
                "delta_star",
                "subsidy_numeraire",
                "subsidy_traded",
                "realized_cost",
                "slack",
                "status",
            ];
            Ok(CommandOutput { body: csv_body(&header, &rows)?, violations })
        }
        SubsidyOptions::Balancer { pool1, pool2, trades } => {
            let a = config.pool(pool1, "subsidy.pool1")?;
            let b = config.pool(pool2, "subsidy.pool2")?;
            let steps = incentives::subsidy_schedule(&a, &b, trades).map_err(numeric("subsidy"))?;
            let rows: Vec<Vec<String>> = steps
                .iter()
                .map(|s| vec![s.t.to_string(), fmt(s.delta), fmt(s.excess_loss), fmt(s.cumulative)])
                .collect();
            Ok(CommandOutput { body: csv_body(&["t", "delta", "excess_loss", "cumulative"], &rows)?, violations: 0 })
        }
    }
}

pub fn cmd_greeks(config: &ScenarioConfig) -> Result<CommandOutput, CliError> {
    let opts = config.greeks.as_ref().ok_or_else(|| missing("greeks"))?;
    match opts {
        GreeksOptions::TwoAsset { pool, prices } => {
            config.pool(pool, "greeks.pool")?;
            if prices.is_empty() {
                return Err(ConfigError::new("greeks.prices", "need at least one price").into());
            }
            let rows = over_sweep(config, |point| {
                let p = config.pool_at(pool, "greeks.pool", point)?;
                prices
                    .iter()
                    .map(|&m| {
                        let g = greeks::greeks_two_asset(&p, m).map_err(numeric(format!("{} price {}", point_label(point), fmt(m))))?;
                        Ok(vec![param_cell(point), fmt(m), fmt(g.p_v), fmt(g.p_delta), fmt(g.p_gamma)])
                    })
                    .collect::<Result<Vec<_>, CliError>>()
            })?;
            let rows: Vec<_> = rows.into_iter().flatten().collect();
            Ok(CommandOutput { body: csv_body(&["parameter", "price", "p_v", "p_delta", "p_gamma"], &rows)?, violations: 0 })
        }
        GreeksOptions::Replication { cutoff, epsilon, k_max, intervals } => {
            if *intervals == 0 || !(*k_max > cutoff + epsilon) {
                return Err(ConfigError::new("greeks", "need intervals >= 1 and k_max above cutoff + epsilon").into());
            }
            let strikes = greeks::uniform_strikes(cutoff + epsilon, *k_max, *intervals);
            let p = greeks::carr_madan_weights(*cutoff, *epsilon, &strikes).map_err(|e| ConfigError::new("greeks", e.to_string()))?;
            let rows: Vec<Vec<String>> = p.strikes.iter().zip(&p.weights).map(|(k, w)| vec![fmt(*k), fmt(*w)]).collect();
            Ok(CommandOutput { body: csv_body(&["strike", "weight"], &rows)?, violations: 0 })
        }
    }
}

/// One-line summary for stderr.
pub fn summary(command: Command, out: &CommandOutput) -> String {
    let mut s = String::new();
    let _ = write!(s, "{}: ", command.name());
    if out.violations == 0 {
        s.push_str("all checks passed");
    } else {
        let _ = write!(s, "{} check(s) violated", out.violations);
    }
    s
}
