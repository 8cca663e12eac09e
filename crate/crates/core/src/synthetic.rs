//! Seeded synthetic market data: correlated Gaussian assets, optionally with
//! Student-t heavy-tailed members, plus treasury yield paths and a
//! thin-tailed benchmark index.

use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::marketdata::{write_yields, PricePanel, TRADING_DAYS};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticAsset {
    pub ticker: String,
    /// Annualized mean log return.
    pub annual_drift: f64,
    pub annual_vol: f64,
    /// Student-t degrees of freedom for the idiosyncratic shock; `None` is Gaussian.
    pub tail_df: Option<f64>,
}

impl SyntheticAsset {
    pub fn gaussian(ticker: &str, annual_drift: f64, annual_vol: f64) -> Self {
        Self {
            ticker: ticker.into(),
            annual_drift,
            annual_vol,
            tail_df: None,
        }
    }

    pub fn heavy(ticker: &str, annual_drift: f64, annual_vol: f64, df: f64) -> Self {
        Self {
            tail_df: Some(df),
            ..Self::gaussian(ticker, annual_drift, annual_vol)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub assets: Vec<SyntheticAsset>,
    /// Pairwise correlation through a single common factor.
    pub correlation: f64,
    /// Number of price rows; one fewer return rows.
    pub n_prices: usize,
    pub start: NaiveDate,
    pub seed: u64,
    pub initial_price: f64,
}

impl SyntheticSpec {
    /// The dataset shipped under `data/`: four Gaussian assets and one
    /// dominant heavy-tailed asset, 1,513 business days.
    pub fn bundled(seed: u64) -> Self {
        Self {
            assets: vec![
                SyntheticAsset::heavy("DOM", 0.30, 0.25, 2.5),
                SyntheticAsset::gaussian("BND", 0.06, 0.04),
                SyntheticAsset::gaussian("VAL", 0.01, 0.08),
                SyntheticAsset::gaussian("CYC", -0.10, 0.12),
                SyntheticAsset::gaussian("INT", -0.08, 0.10),
            ],
            correlation: 0.3,
            n_prices: 1513,
            start: NaiveDate::from_ymd_opt(2014, 12, 10).unwrap(),
            seed,
            initial_price: 100.0,
        }
    }

    /// `n` Gaussian assets with staggered drifts and vols.
    pub fn gaussian(n: usize, n_prices: usize, seed: u64) -> Self {
        let assets = (0..n)
            .map(|j| {
                SyntheticAsset::gaussian(
                    &format!("S{}", j + 1),
                    0.02 + 0.03 * j as f64,
                    0.10 + 0.04 * j as f64,
                )
            })
            .collect();
        Self {
            assets,
            correlation: 0.3,
            n_prices,
            start: NaiveDate::from_ymd_opt(2015, 1, 2).unwrap(),
            seed,
            initial_price: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub prices: PricePanel,
    pub yields_3m: Vec<(NaiveDate, f64)>,
    pub yields_1y: Vec<(NaiveDate, f64)>,
    /// Single Gaussian series `BENCH`.
    pub benchmark: PricePanel,
}

impl SyntheticDataset {
    /// Writes `prices.csv`, `treasury_3m.csv`, `treasury_1y.csv` and
    /// `benchmark.csv` into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let io = |p: &Path, e: std::io::Error| Error::Io {
            path: p.display().to_string(),
            source: e,
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let create = |name: &str| {
            let p = dir.join(name);
            std::fs::File::create(&p).map_err(|e| io(&p, e))
        };
        self.prices.write_csv(create("prices.csv")?)?;
        write_yields(&self.yields_3m, create("treasury_3m.csv")?)?;
        write_yields(&self.yields_1y, create("treasury_1y.csv")?)?;
        self.benchmark.write_csv(create("benchmark.csv")?)
    }
}

/// Consecutive weekdays starting at `start` (or the next weekday).
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

/// Daily log returns, `T x N`, drawn from the one-factor model in `spec`.
pub fn simulate_log_returns(spec: &SyntheticSpec, t: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let rho = spec.correlation;
    let loading = rho.sqrt();
    let idio = (1.0 - rho).sqrt();
    let shocks: Vec<Option<StudentT<f64>>> = spec
        .assets
        .iter()
        .map(|a| {
            a.tail_df
                .map(|df| StudentT::new(df).expect("positive degrees of freedom"))
        })
        .collect();
    let mut out = DMatrix::zeros(t, spec.assets.len());
    for i in 0..t {
        let factor: f64 = StandardNormal.sample(rng);
        for (j, asset) in spec.assets.iter().enumerate() {
            let e: f64 = match (&shocks[j], asset.tail_df) {
                (Some(dist), Some(df)) => dist.sample(rng) / (df / (df - 2.0)).sqrt(),
                _ => StandardNormal.sample(rng),
            };
            let z = loading * factor + idio * e;
            out[(i, j)] =
                asset.annual_drift / TRADING_DAYS + asset.annual_vol / TRADING_DAYS.sqrt() * z;
        }
    }
    out
}

fn prices_from_log_returns(initial: f64, returns: &DMatrix<f64>) -> DMatrix<f64> {
    let (t, n) = returns.shape();
    let mut p = DMatrix::zeros(t + 1, n);
    for j in 0..n {
        let mut cum = 0.0;
        p[(0, j)] = initial;
        for i in 0..t {
            cum += returns[(i, j)];
            p[(i + 1, j)] = initial * cum.exp();
        }
    }
    p
}

/// Mean-reverting yield path, floored at zero.
fn yield_path(
    dates: &[NaiveDate],
    start: f64,
    level: f64,
    rng: &mut impl Rng,
) -> Vec<(NaiveDate, f64)> {
    let mut y = start;
    dates
        .iter()
        .map(|&d| {
            let z: f64 = StandardNormal.sample(rng);
            y = (y + 0.01 * (level - y) + 0.0004 * z).max(0.0);
            (d, y)
        })
        .collect()
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    if spec.assets.is_empty() || spec.n_prices < 2 {
        return Err(Error::Parameter(
            "synthetic data needs at least one asset and two dates".into(),
        ));
    }
    if !(0.0..1.0).contains(&spec.correlation) {
        return Err(Error::Parameter("correlation must lie in [0, 1)".into()));
    }
    if spec
        .assets
        .iter()
        .any(|a| a.tail_df.is_some_and(|df| df <= 2.0))
    {
        return Err(Error::Parameter(
            "heavy-tail degrees of freedom must exceed 2".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dates = business_days(spec.start, spec.n_prices);
    let t = spec.n_prices - 1;

    let returns = simulate_log_returns(spec, t, &mut rng);
    let tickers = spec.assets.iter().map(|a| a.ticker.clone()).collect();
    let prices = PricePanel::new(
        dates.clone(),
        tickers,
        prices_from_log_returns(spec.initial_price, &returns),
    )?;

    let yields_3m = yield_path(&dates, 0.012, 0.015, &mut rng);
    let yields_1y = yields_3m
        .iter()
        .map(|&(d, y)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (d, (y + 0.004 + 0.0002 * z).max(0.0))
        })
        .collect();

    let bench_spec = SyntheticSpec {
        assets: vec![SyntheticAsset::gaussian("BENCH", 0.06, 0.15)],
        correlation: 0.0,
        ..spec.clone()
    };
    let bench_returns = simulate_log_returns(&bench_spec, t, &mut rng);
    let benchmark = PricePanel::new(
        dates,
        vec!["BENCH".into()],
        prices_from_log_returns(spec.initial_price, &bench_returns),
    )?;

    Ok(SyntheticDataset {
        prices,
        yields_3m,
        yields_1y,
        benchmark,
    })
}
