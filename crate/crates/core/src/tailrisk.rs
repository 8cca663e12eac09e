//! Hill tail-index estimation and Hill-plot curves with Wald bands.

use std::io::Write;
use std::str::FromStr;

use crate::stats::normal_quantile;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Tail {
    /// Losses: `-r` for negative returns.
    #[default]
    Lower,
    /// Gains: positive returns.
    Upper,
}

impl Tail {
    pub fn name(self) -> &'static str {
        match self {
            Tail::Lower => "lower",
            Tail::Upper => "upper",
        }
    }

    /// Strictly positive tail values of a return series.
    pub fn extract(self, returns: &[f64]) -> Vec<f64> {
        returns
            .iter()
            .map(|&r| match self {
                Tail::Lower => -r,
                Tail::Upper => r,
            })
            .filter(|&x| x > 0.0)
            .collect()
    }
}

impl FromStr for Tail {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lower" | "loss" | "losses" => Ok(Tail::Lower),
            "upper" | "gain" | "gains" => Ok(Tail::Upper),
            other => Err(Error::Parameter(format!("unknown tail {other:?}"))),
        }
    }
}

/// Hill estimate from values already sorted in descending order.
fn hill_sorted(desc: &[f64], k: usize) -> Result<f64> {
    let threshold = desc[k];
    if desc[0] == threshold {
        return Err(Error::DegenerateEstimate);
    }
    let mut sum = 0.0;
    for &x in &desc[..k] {
        sum += (x / threshold).ln();
    }
    Ok(k as f64 / sum)
}

/// Tail index `α̂` with `1/α̂ = (1/k) Σᵢ₌₁ᵏ ln(X₍ᵢ₎ / X₍ₖ₊₁₎)` over the
/// descending order statistics of the strictly positive values of `sample`.
pub fn hill_estimate(sample: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    let mut pos: Vec<f64> = sample.iter().copied().filter(|&x| x > 0.0).collect();
    if pos.len() < k + 1 {
        return Err(Error::InsufficientTail {
            needed: k + 1,
            available: pos.len(),
        });
    }
    if pos.iter().any(|x| !x.is_finite()) {
        return Err(Error::Data("sample contains non-finite values".into()));
    }
    pos.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    pos.truncate(k + 1);
    pos.sort_unstable_by(|a, b| b.total_cmp(a));
    hill_sorted(&pos, k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HillCurve {
    pub k_values: Vec<usize>,
    pub alpha_hat: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub tail: Tail,
    /// Number of strictly positive tail observations.
    pub n: usize,
    pub confidence: f64,
}

impl HillCurve {
    pub fn len(&self) -> usize {
        self.k_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_values.is_empty()
    }

    /// CSV with header `k,alpha_hat,ci_lower,ci_upper`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let to_err = |e: csv::Error| Error::Data(format!("writing Hill curve: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "alpha_hat", "ci_lower", "ci_upper"])
            .map_err(to_err)?;
        for i in 0..self.len() {
            w.write_record([
                self.k_values[i].to_string(),
                self.alpha_hat[i].to_string(),
                self.ci_lower[i].to_string(),
                self.ci_upper[i].to_string(),
            ])
            .map_err(to_err)?;
        }
        w.flush()
            .map_err(|e| Error::Data(format!("writing Hill curve: {e}")))
    }
}

/// Default Hill-plot range `[10, ⌊n/10⌋]`, shrunk for short tails.
pub fn default_k_range(n: usize) -> Option<(usize, usize)> {
    if n < 2 {
        return None;
    }
    let k_max = (n / 10).max(10).min(n - 1);
    let k_min = 10.min(k_max);
    Some((k_min, k_max))
}

/// Wald band `α̂ (1 ± z/√k)` with `z` the two-sided standard normal quantile.
pub fn wald_band(alpha_hat: f64, k: usize, confidence: f64) -> (f64, f64) {
    let z = normal_quantile(0.5 + confidence / 2.0);
    let half = z / (k as f64).sqrt();
    (alpha_hat * (1.0 - half), alpha_hat * (1.0 + half))
}

/// Hill estimates for every `k` in `k_range` (inclusive), default
/// [`default_k_range`].
pub fn hill_curve(
    returns: &[f64],
    tail: Tail,
    k_range: Option<(usize, usize)>,
    confidence: f64,
) -> Result<HillCurve> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Parameter(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    if returns.len() >= 2 && returns.iter().all(|&x| x == returns[0]) {
        return Err(Error::DegenerateEstimate);
    }
    let mut values = tail.extract(returns);
    let n = values.len();
    if n == 0 {
        return Err(Error::InsufficientTail {
            needed: 2,
            available: 0,
        });
    }
    let (k_min, k_max) = match k_range {
        Some(r) => r,
        None => default_k_range(n).ok_or(Error::InsufficientTail {
            needed: 2,
            available: n,
        })?,
    };
    if k_min == 0 || k_min > k_max {
        return Err(Error::Parameter(format!(
            "invalid k range [{k_min}, {k_max}]"
        )));
    }
    if k_max >= n {
        return Err(Error::InsufficientTail {
            needed: k_max + 1,
            available: n,
        });
    }
    values.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut curve = HillCurve {
        k_values: Vec::new(),
        alpha_hat: Vec::new(),
        ci_lower: Vec::new(),
        ci_upper: Vec::new(),
        tail,
        n,
        confidence,
    };
    for k in k_min..=k_max {
        let a = hill_sorted(&values[..=k], k)?;
        let (lo, hi) = wald_band(a, k, confidence);
        curve.k_values.push(k);
        curve.alpha_hat.push(a);
        curve.ci_lower.push(lo);
        curve.ci_upper.push(hi);
    }
    Ok(curve)
}
