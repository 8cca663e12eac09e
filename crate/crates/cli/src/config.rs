//! Run configuration: built-in defaults, then a `key = value` file, then
//! command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use tailfolio_core::backtest::StrategySpec;
use tailfolio_core::marketdata::{ReturnKind, Tenor};
use tailfolio_core::meanvar::PortfolioLabel;
use tailfolio_core::tailrisk::Tail;

/// Invalid configuration or command-line input.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Every key accepted in a config file, with its default.
pub const KEYS: &[(&str, &str)] = &[
    ("data", "data"),
    ("tickers", ""),
    ("returns", "log"),
    ("window", "1008"),
    ("strategies", "long-only,ls10,ls20,ls30"),
    ("labels", "MVP,TVP,M95,T95,M99,T99"),
    ("levels", "0.95,0.99"),
    ("tenor", "3m"),
    ("out", "out"),
    ("seed", "7"),
    ("points", "50"),
    ("grid_points", "200"),
    ("initial_wealth", "100"),
    ("sub_window", "252"),
    ("step", "21"),
    ("hill_tail", "lower"),
    ("hill_confidence", "0.95"),
    ("hill_k_min", ""),
    ("hill_k_max", ""),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Directory holding `prices.csv`, `treasury_3m.csv`, `treasury_1y.csv`
    /// and optionally `benchmark.csv`.
    pub data: PathBuf,
    /// Empty selects every column of the price file.
    pub tickers: Vec<String>,
    /// Return definition used for estimation; wealth always compounds
    /// arithmetic returns.
    pub returns: ReturnKind,
    pub window: usize,
    pub strategies: Vec<StrategySpec>,
    pub labels: Vec<PortfolioLabel>,
    pub levels: Vec<f64>,
    pub tenor: Tenor,
    pub out: PathBuf,
    /// Seed for `ingest --synthetic`.
    pub seed: u64,
    /// Points per traced frontier.
    pub points: usize,
    /// Target-return grid for tangent portfolios.
    pub grid_points: usize,
    pub initial_wealth: f64,
    pub sub_window: usize,
    pub step: usize,
    pub hill_tail: Tail,
    pub hill_confidence: f64,
    pub hill_k_min: Option<usize>,
    pub hill_k_max: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = RunConfig {
            data: PathBuf::new(),
            tickers: Vec::new(),
            returns: ReturnKind::Log,
            window: 0,
            strategies: Vec::new(),
            labels: Vec::new(),
            levels: Vec::new(),
            tenor: Tenor::ThreeMonth,
            out: PathBuf::new(),
            seed: 0,
            points: 0,
            grid_points: 0,
            initial_wealth: 0.0,
            sub_window: 0,
            step: 0,
            hill_tail: Tail::Lower,
            hill_confidence: 0.0,
            hill_k_min: None,
            hill_k_max: None,
        };
        for (k, v) in KEYS {
            cfg.set(k, v).expect("built-in defaults parse");
        }
        cfg
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| ConfigError(format!("invalid value {value:?} for {key}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_optional(key: &str, value: &str) -> Result<Option<usize>, ConfigError> {
    if value.trim().is_empty() {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

impl RunConfig {
    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "data" => self.data = PathBuf::from(value.trim()),
            "tickers" => self.tickers = parse_list(key, value)?,
            "returns" => self.returns = parse(key, value)?,
            "window" => self.window = parse(key, value)?,
            "strategies" | "strategy" => self.strategies = parse_list(key, value)?,
            "labels" => self.labels = parse_list(key, value)?,
            "levels" => self.levels = parse_list(key, value)?,
            "tenor" => self.tenor = parse(key, value)?,
            "out" => self.out = PathBuf::from(value.trim()),
            "seed" => self.seed = parse(key, value)?,
            "points" => self.points = parse(key, value)?,
            "grid_points" => self.grid_points = parse(key, value)?,
            "initial_wealth" => self.initial_wealth = parse(key, value)?,
            "sub_window" => self.sub_window = parse(key, value)?,
            "step" => self.step = parse(key, value)?,
            "hill_tail" => self.hill_tail = parse(key, value)?,
            "hill_confidence" => self.hill_confidence = parse(key, value)?,
            "hill_k_min" => self.hill_k_min = parse_optional(key, value)?,
            "hill_k_max" => self.hill_k_max = parse_optional(key, value)?,
            other => return Err(ConfigError(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` document. Blank lines and `#` comments are
    /// ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!("config line {}: expected key = value", i + 1))
            })?;
            self.set(key.trim(), value)
                .map_err(|e| ConfigError(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Range and consistency checks.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError(m.into()));
        if self.window < 2 {
            return fail("window must be at least 2");
        }
        if self.strategies.is_empty() {
            return fail("at least one strategy is required");
        }
        if self.labels.is_empty() {
            return fail("at least one portfolio label is required");
        }
        if self
            .labels
            .iter()
            .any(|l| matches!(l, PortfolioLabel::Custom | PortfolioLabel::Eqw))
        {
            return fail("labels must be optimized portfolios (EQW is always included)");
        }
        if self.levels.is_empty() || self.levels.iter().any(|&c| !(0.5..1.0).contains(&c)) {
            return fail("levels must lie in [0.5, 1)");
        }
        if self.points < 2 || self.grid_points < 2 {
            return fail("points and grid_points must be at least 2");
        }
        if !(self.initial_wealth > 0.0) {
            return fail("initial_wealth must be positive");
        }
        if self.sub_window < 2 || self.step == 0 {
            return fail("sub_window must be at least 2 and step positive");
        }
        if !(self.hill_confidence > 0.0 && self.hill_confidence < 1.0) {
            return fail("hill_confidence must lie in (0, 1)");
        }
        if self.hill_k_min.is_some() != self.hill_k_max.is_some() {
            return fail("set both hill_k_min and hill_k_max, or neither");
        }
        Ok(())
    }

    pub fn prices_path(&self) -> PathBuf {
        self.data.join("prices.csv")
    }

    pub fn yields_path(&self) -> PathBuf {
        self.data
            .join(format!("treasury_{}.csv", self.tenor.label()))
    }

    pub fn benchmark_path(&self) -> PathBuf {
        self.data.join("benchmark.csv")
    }

    pub fn ticker_filter(&self) -> Option<&[String]> {
        (!self.tickers.is_empty()).then_some(self.tickers.as_slice())
    }
}
