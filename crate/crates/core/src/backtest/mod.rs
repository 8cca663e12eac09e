//! Strategy constraints, rolling re-optimization and wealth tracking.
//!
//! Each out-of-sample day `t` is traded with weights estimated on the
//! `window` days strictly before it, so a weight row never depends on the
//! return it is applied to.

mod constraints;

use std::io::Write;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};

pub(crate) use constraints::Formulation;
pub use constraints::{build_constraints, ConstraintSet, StrategySpec};

use crate::cvar::{
    solve_min_cvar, tangent_cvar_portfolio_with, CvarOptions, ScenarioMatrix, TangencyRisk,
};
use crate::marketdata::{portfolio_return, ReturnKind, ReturnPanel, RiskFreeSeries, WealthSeries};
use crate::meanvar::{constrained_mv_portfolio_with, MvObjective, MvOptions, PortfolioLabel};
use crate::solvers::Tolerances;
use crate::stats;
use crate::{Error, Result};

/// Four trading years.
pub const DEFAULT_WINDOW: usize = 1008;

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestSpec {
    pub label: PortfolioLabel,
    pub strategy: StrategySpec,
    pub window: usize,
    /// Target-return grid size for tangent portfolios.
    pub grid_points: usize,
    pub tangency_risk: TangencyRisk,
}

impl BacktestSpec {
    pub fn new(label: PortfolioLabel, strategy: StrategySpec) -> Self {
        Self {
            label,
            strategy,
            window: DEFAULT_WINDOW,
            grid_points: 200,
            tangency_risk: TangencyRisk::Cvar,
        }
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window;
        self
    }

    pub fn with_grid_points(mut self, grid_points: usize) -> Self {
        self.grid_points = grid_points;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightPath {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    /// One row per out-of-sample day.
    pub weights: DMatrix<f64>,
    pub label: PortfolioLabel,
    pub strategy: StrategySpec,
    pub window: usize,
    /// Days whose optimization failed and kept the previous weights.
    pub failures: Vec<NaiveDate>,
}

impl WeightPath {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.weights.row(i).iter().copied().collect()
    }

    /// CSV with header `date,w_<TICKER>,...`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let to_err = |e: csv::Error| Error::Data(format!("writing weights: {e}"));
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["date".to_string()];
        header.extend(self.tickers.iter().map(|t| format!("w_{t}")));
        w.write_record(&header).map_err(to_err)?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.to_string()];
            rec.extend(self.weights.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(to_err)?;
        }
        w.flush()
            .map_err(|e| Error::Data(format!("writing weights: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    pub wealth: WealthSeries,
    pub weight_path: WeightPath,
    /// Daily portfolio returns.
    pub returns: Vec<f64>,
    /// Daily portfolio return minus the daily risk-free rate.
    pub excess_returns: Vec<f64>,
}

/// Weights for one estimation window.
pub fn optimize_window(
    label: PortfolioLabel,
    window_returns: &DMatrix<f64>,
    constraints: &ConstraintSet,
    risk_free: f64,
    spec: &BacktestSpec,
    previous: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    let n = window_returns.ncols();
    let tol = Tolerances::default();
    match label {
        PortfolioLabel::Eqw => Ok(DVector::from_element(n, 1.0 / n as f64)),
        PortfolioLabel::Mvp | PortfolioLabel::Tvp => {
            let (means, cov) = stats::mean_and_covariance(window_returns);
            let objective = if label == PortfolioLabel::Mvp {
                MvObjective::MinVariance
            } else {
                MvObjective::MaxSharpe { risk_free }
            };
            let opts = MvOptions {
                grid_points: spec.grid_points,
                tolerances: tol,
                initial: previous.cloned(),
            };
            constrained_mv_portfolio_with(&means, &cov, None, constraints, objective, &opts)
                .map(|p| p.weights)
        }
        PortfolioLabel::M95 | PortfolioLabel::M99 | PortfolioLabel::T95 | PortfolioLabel::T99 => {
            let confidence = match label {
                PortfolioLabel::M95 | PortfolioLabel::T95 => 0.95,
                _ => 0.99,
            };
            let scen = ScenarioMatrix::new(window_returns.clone())?;
            let opts = CvarOptions {
                tolerances: tol,
                grid_points: spec.grid_points,
                tangency_risk: spec.tangency_risk,
                initial: previous.cloned(),
            };
            if matches!(label, PortfolioLabel::M95 | PortfolioLabel::M99) {
                solve_min_cvar(&scen, confidence, None, constraints, &opts)
                    .map(|s| s.portfolio.weights)
            } else {
                tangent_cvar_portfolio_with(&scen, confidence, risk_free, constraints, &opts)
                    .map(|p| p.weights)
            }
        }
        PortfolioLabel::Custom => Err(Error::Parameter(
            "custom portfolios cannot be re-optimized".into(),
        )),
    }
}

/// Re-optimizes on every trailing window and records the weights applied to
/// the following day. The risk-free rate for tangency is the mean daily rate
/// over the estimation window.
pub fn rolling_optimize(
    panel: &ReturnPanel,
    spec: &BacktestSpec,
    risk_free: &RiskFreeSeries,
) -> Result<WeightPath> {
    let t = panel.len();
    let n = panel.n_assets();
    let window = spec.window;
    if window < n + 2 {
        return Err(Error::Parameter(format!(
            "window of {window} days is too short for {n} assets (needs at least {})",
            n + 2
        )));
    }
    if t <= window {
        return Err(Error::InsufficientData {
            needed: window + 1,
            got: t,
        });
    }
    let constraints = build_constraints(spec.strategy, n)?;
    let days = t - window;
    let mut weights = DMatrix::zeros(days, n);
    let mut failures = Vec::new();
    let mut previous: Option<DVector<f64>> = None;
    let needs_rf = matches!(
        spec.label,
        PortfolioLabel::Tvp | PortfolioLabel::T95 | PortfolioLabel::T99
    );

    for i in 0..days {
        let end = window + i;
        let start = end - window;
        let date = panel.dates()[end];
        let rf = if needs_rf {
            let span = &panel.dates()[start..end];
            risk_free
                .mean_over(span)
                .ok_or_else(|| Error::Coverage(span[0]))?
        } else {
            0.0
        };
        let solved = optimize_window(
            spec.label,
            &panel.window(start, end),
            &constraints,
            rf,
            spec,
            previous.as_ref(),
        );
        let w = match (solved, &previous) {
            (Ok(w), _) => w,
            (Err(e), None) => return Err(e),
            (Err(e), Some(prev)) => {
                log::warn!(
                    "{} {}: optimization for {date} failed ({e}); keeping previous weights",
                    spec.label,
                    spec.strategy
                );
                failures.push(date);
                prev.clone()
            }
        };
        weights.row_mut(i).copy_from(&w.transpose());
        previous = Some(w);
    }
    Ok(WeightPath {
        dates: panel.dates()[window..].to_vec(),
        tickers: panel.tickers().to_vec(),
        weights,
        label: spec.label,
        strategy: spec.strategy,
        window,
        failures,
    })
}

/// Daily-rebalanced wealth from fixed start-of-day weights.
pub fn wealth_track(
    path: &WeightPath,
    panel: &ReturnPanel,
    risk_free: &RiskFreeSeries,
    initial_wealth: f64,
) -> Result<BacktestResult> {
    if panel.kind() != ReturnKind::Arithmetic {
        return Err(Error::KindMismatch {
            expected: ReturnKind::Arithmetic.name(),
            got: panel.kind().name(),
        });
    }
    if path.tickers != panel.tickers() {
        return Err(Error::Alignment(
            "weight path and return panel have different tickers".into(),
        ));
    }
    if !(initial_wealth > 0.0) {
        return Err(Error::Parameter("initial wealth must be positive".into()));
    }
    let mut returns = Vec::with_capacity(path.len());
    let mut excess = Vec::with_capacity(path.len());
    for (i, &date) in path.dates.iter().enumerate() {
        let t = panel
            .position(date)
            .ok_or_else(|| Error::Alignment(format!("no returns for weight date {date}")))?;
        let rf = risk_free
            .rate_on(date)
            .ok_or_else(|| Error::Alignment(format!("no risk-free rate for {date}")))?;
        let r = portfolio_return(&path.row(i), &panel.row(t));
        returns.push(r);
        excess.push(r - rf);
    }
    Ok(BacktestResult {
        wealth: WealthSeries::compound(path.dates.clone(), &returns, initial_wealth),
        weight_path: path.clone(),
        returns,
        excess_returns: excess,
    })
}
