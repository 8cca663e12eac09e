//! Reward-risk ratios on daily excess returns and their rolling-window
//! distributions. Nothing is annualized.
//!
//! Levels are passed as confidence levels (0.95, 0.99) and converted to tail
//! probabilities internally.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::NaiveDate;

use crate::cvar::empirical_var_cvar;
use crate::stats;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    Sharpe,
    Rachev,
    Starr,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Sharpe => "sharpe",
            MetricKind::Rachev => "rachev",
            MetricKind::Starr => "starr",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sharpe" => Ok(MetricKind::Sharpe),
            "rachev" => Ok(MetricKind::Rachev),
            "starr" => Ok(MetricKind::Starr),
            other => Err(Error::Parameter(format!("unknown metric {other:?}"))),
        }
    }
}

/// A ratio together with its confidence levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricSpec {
    Sharpe,
    /// Tail-gain level `beta` over tail-loss level `alpha`.
    Rachev {
        alpha: f64,
        beta: f64,
    },
    Starr {
        alpha: f64,
    },
}

impl MetricSpec {
    pub fn kind(&self) -> MetricKind {
        match self {
            MetricSpec::Sharpe => MetricKind::Sharpe,
            MetricSpec::Rachev { .. } => MetricKind::Rachev,
            MetricSpec::Starr { .. } => MetricKind::Starr,
        }
    }

    /// Tail probabilities `(α, β)` where applicable.
    pub fn tail_probs(&self) -> (Option<f64>, Option<f64>) {
        match *self {
            MetricSpec::Sharpe => (None, None),
            MetricSpec::Rachev { alpha, beta } => (Some(1.0 - alpha), Some(1.0 - beta)),
            MetricSpec::Starr { alpha } => (Some(1.0 - alpha), None),
        }
    }

    pub fn evaluate(&self, excess: &[f64]) -> Result<f64> {
        match *self {
            MetricSpec::Sharpe => sharpe_ratio(excess),
            MetricSpec::Rachev { alpha, beta } => rachev_ratio(excess, alpha, beta),
            MetricSpec::Starr { alpha } => starr_ratio(excess, alpha),
        }
    }

    /// File-name friendly identifier, e.g. `rachev_95_95`.
    pub fn slug(&self) -> String {
        let pct = |c: f64| (c * 100.0).round() as u32;
        match *self {
            MetricSpec::Sharpe => "sharpe".into(),
            MetricSpec::Rachev { alpha, beta } => format!("rachev_{}_{}", pct(alpha), pct(beta)),
            MetricSpec::Starr { alpha } => format!("starr_{}", pct(alpha)),
        }
    }
}

/// `mean(excess) / stdev(excess)` with the `1/(T-1)` sample deviation.
pub fn sharpe_ratio(excess: &[f64]) -> Result<f64> {
    if excess.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: excess.len(),
        });
    }
    let sd = stats::sample_std(excess);
    let scale = excess.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if !(sd > 1e-12 * scale) {
        return Err(Error::UndefinedRatio(
            "excess returns have zero variance".into(),
        ));
    }
    Ok(stats::mean(excess) / sd)
}

/// Expected tail gain at level `beta` over expected tail loss at level `alpha`.
pub fn rachev_ratio(excess: &[f64], alpha: f64, beta: f64) -> Result<f64> {
    let gain = empirical_var_cvar(excess, beta)?.cvar;
    let losses: Vec<f64> = excess.iter().map(|x| -x).collect();
    let loss = empirical_var_cvar(&losses, alpha)?.cvar;
    if !(loss > 0.0) {
        return Err(Error::UndefinedRatio(format!(
            "expected tail loss is {loss}, not positive"
        )));
    }
    Ok(gain / loss)
}

/// `mean(excess)` over the expected tail loss at level `alpha`.
pub fn starr_ratio(excess: &[f64], alpha: f64) -> Result<f64> {
    let losses: Vec<f64> = excess.iter().map(|x| -x).collect();
    let loss = empirical_var_cvar(&losses, alpha)?.cvar;
    if !(loss > 0.0) {
        return Err(Error::UndefinedRatio(format!(
            "expected tail loss is {loss}, not positive"
        )));
    }
    Ok(stats::mean(excess) / loss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioSample {
    pub metric: MetricKind,
    /// Tail probability of the loss side.
    pub alpha: Option<f64>,
    /// Tail probability of the gain side (Rachev only).
    pub beta: Option<f64>,
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioDistribution {
    pub samples: Vec<RatioSample>,
    /// Windows where the ratio was undefined.
    pub skipped: usize,
}

/// One ratio per sub-window `[t, t + sub_window)` at stride `step`. Windows
/// where the ratio is undefined are skipped and counted.
pub fn rolling_ratio_distribution(
    dates: &[NaiveDate],
    excess: &[f64],
    metric: MetricSpec,
    sub_window: usize,
    step: usize,
) -> Result<RatioDistribution> {
    if dates.len() != excess.len() {
        return Err(Error::Alignment(format!(
            "{} dates for {} excess returns",
            dates.len(),
            excess.len()
        )));
    }
    if sub_window == 0 || step == 0 {
        return Err(Error::Parameter(
            "sub-window and step must be positive".into(),
        ));
    }
    if sub_window > excess.len() {
        return Err(Error::InsufficientData {
            needed: sub_window,
            got: excess.len(),
        });
    }
    let (alpha, beta) = metric.tail_probs();
    let mut samples = Vec::new();
    let mut skipped = 0;
    let mut start = 0;
    while start + sub_window <= excess.len() {
        let end = start + sub_window;
        match metric.evaluate(&excess[start..end]) {
            Ok(value) => samples.push(RatioSample {
                metric: metric.kind(),
                alpha,
                beta,
                window_start: dates[start],
                window_end: dates[end - 1],
                value,
            }),
            Err(Error::UndefinedRatio(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
        start += step;
    }
    Ok(RatioDistribution { samples, skipped })
}

/// CSV with header `metric,alpha,beta,window_start,window_end,value`.
pub fn write_samples_csv<W: Write>(samples: &[RatioSample], out: W) -> Result<()> {
    let to_err = |e: csv::Error| Error::Data(format!("writing ratio samples: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "metric",
        "alpha",
        "beta",
        "window_start",
        "window_end",
        "value",
    ])
    .map_err(to_err)?;
    let opt = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_default();
    for s in samples {
        w.write_record([
            s.metric.name().to_string(),
            opt(s.alpha),
            opt(s.beta),
            s.window_start.to_string(),
            s.window_end.to_string(),
            s.value.to_string(),
        ])
        .map_err(to_err)?;
    }
    w.flush()
        .map_err(|e| Error::Data(format!("writing ratio samples: {e}")))
}
