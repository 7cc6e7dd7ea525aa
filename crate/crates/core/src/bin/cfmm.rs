use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cfmm::cli::{self, CliError, Command, Overrides};
use cfmm::config::{ConfigError, ScenarioConfig};

/// Curvature, arbitrage and LP payoff analysis for constant function market makers.
#[derive(Parser)]
#[command(author, version, about, long_about = None)]
struct Options {
    #[command(subcommand)]
    command: Sub,
    /// Scenario config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; defaults to the config's `output`, then stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed for stochastic commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Rounds for `sim`, Monte Carlo runs for `game`.
    #[arg(long, global = true)]
    samples: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// μ and κ over a sweep.
    Curvature,
    /// No-arbitrage trade and stability bound for a market pair.
    Arb,
    /// Repeated arbitrage rounds under a price process.
    Sim,
    /// Informed-trader game bounds, optionally with the multiperiod GDA trader.
    Game,
    /// Yield-farming subsidies.
    Subsidy,
    /// Portfolio Greeks and replication weights.
    Greeks,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Curvature => Command::Curvature,
            Sub::Arb => Command::Arb,
            Sub::Sim => Command::Sim,
            Sub::Game => Command::Game,
            Sub::Subsidy => Command::Subsidy,
            Sub::Greeks => Command::Greeks,
        }
    }
}

fn execute(opts: &Options) -> Result<i32, CliError> {
    let path = opts.config.as_ref().ok_or_else(|| ConfigError::new("--config", "a config file is required"))?;
    let text = fs::read_to_string(path).map_err(|e| ConfigError::new("--config", format!("{}: {e}", path.display())))?;
    let config = ScenarioConfig::from_json(&text)?;
    let command = Command::from(opts.command);
    let out = cli::run(command, &config, Overrides { seed: opts.seed, samples: opts.samples })?;
    match opts.out.clone().or(config.output.as_ref().map(PathBuf::from)) {
        Some(p) => fs::write(&p, &out.body).map_err(|e| ConfigError::new("--out", format!("{}: {e}", p.display())))?,
        None => print!("{}", out.body),
    }
    eprintln!("{}", cli::summary(command, &out));
    Ok(out.exit_code())
}

fn main() -> ExitCode {
    let opts = Options::parse();
    match execute(&opts) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
