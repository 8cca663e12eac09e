//! `tailfolio`: frontiers, rolling backtests, reward-risk ratio
//! distributions and Hill plots from CSV price data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "tailfolio", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// `key = value` config file applied over the defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory with prices.csv, treasury_3m.csv, treasury_1y.csv and benchmark.csv.
    #[arg(long, global = true, value_name = "PATH")]
    data: Option<String>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<String>,
    /// Estimation window in trading days.
    #[arg(long, global = true, value_name = "DAYS")]
    window: Option<String>,
    /// Comma-separated strategies: long-only, ls10, ls20, ls30.
    #[arg(long, global = true, value_name = "LIST")]
    strategy: Option<String>,
    /// Comma-separated confidence levels, e.g. 0.95,0.99.
    #[arg(long, global = true, value_name = "LIST")]
    levels: Option<String>,
    /// Seed for the synthetic data generator.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<String>,
    /// Return definition for estimation: log or arith.
    #[arg(long, global = true, value_name = "KIND")]
    returns: Option<String>,
    /// Risk-free tenor: 3m or 1y.
    #[arg(long, global = true, value_name = "TENOR")]
    tenor: Option<String>,
    /// Comma-separated tickers (default: every column).
    #[arg(long, global = true, value_name = "LIST")]
    tickers: Option<String>,
    /// Comma-separated portfolio labels (MVP,TVP,M95,T95,M99,T99).
    #[arg(long, global = true, value_name = "LIST")]
    labels: Option<String>,
    /// Points per traced frontier.
    #[arg(long, global = true, value_name = "N")]
    points: Option<String>,
    /// Any other config key.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load prices and yields, then write returns, the aligned risk-free
    /// series and an indexed price chart.
    Ingest {
        /// Regenerate the synthetic dataset into the data directory first.
        #[arg(long)]
        synthetic: bool,
    },
    /// Mean-variance and CVaR efficient frontiers over the full sample.
    Frontier,
    /// Rolling re-optimization of every portfolio under every strategy.
    Backtest,
    /// Rolling Sharpe, Rachev and STARR distributions of backtest tracks.
    Metrics,
    /// Hill tail-index curves with Wald bands.
    Hill,
}

impl Cli {
    fn run_config(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let flags = [
            ("data", &self.data),
            ("out", &self.out),
            ("window", &self.window),
            ("strategies", &self.strategy),
            ("levels", &self.levels),
            ("seed", &self.seed),
            ("returns", &self.returns),
            ("tenor", &self.tenor),
            ("tickers", &self.tickers),
            ("labels", &self.labels),
            ("points", &self.points),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)
                    .map_err(|e| ConfigError(format!("--{key}: {e}")))?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let cfg = match cli.run_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Ingest { synthetic } => commands::ingest(&cfg, synthetic),
        Command::Frontier => commands::frontier(&cfg),
        Command::Backtest => commands::backtest(&cfg),
        Command::Metrics => commands::metrics(&cfg),
        Command::Hill => commands::hill(&cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
