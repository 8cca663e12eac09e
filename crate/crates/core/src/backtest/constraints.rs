use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategySpec {
    LongOnly,
    /// Total short exposure of at most `leverage` times portfolio value.
    LongShort {
        leverage: f64,
    },
}

impl StrategySpec {
    pub fn long_short(leverage: f64) -> Result<Self> {
        if !(leverage > 0.0 && leverage < 1.0) {
            return Err(Error::Parameter(format!(
                "leverage must lie in (0, 1), got {leverage}"
            )));
        }
        Ok(StrategySpec::LongShort { leverage })
    }

    /// The four strategies of the study: long-only and 10/20/30% shorting.
    pub fn standard() -> [StrategySpec; 4] {
        [
            StrategySpec::LongOnly,
            StrategySpec::LongShort { leverage: 0.1 },
            StrategySpec::LongShort { leverage: 0.2 },
            StrategySpec::LongShort { leverage: 0.3 },
        ]
    }

    pub fn leverage(&self) -> Option<f64> {
        match *self {
            StrategySpec::LongOnly => None,
            StrategySpec::LongShort { leverage } => Some(leverage),
        }
    }

    /// Short identifier: `long-only`, `ls10`, `ls20`, ...
    pub fn slug(&self) -> String {
        match *self {
            StrategySpec::LongOnly => "long-only".into(),
            StrategySpec::LongShort { leverage } => format!("ls{}", (leverage * 100.0).round()),
        }
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.slug())
    }
}

impl FromStr for StrategySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "long-only" | "long_only" | "longonly" => Ok(StrategySpec::LongOnly),
            _ => {
                let pct = s
                    .strip_prefix("ls")
                    .and_then(|p| p.parse::<u32>().ok())
                    .ok_or_else(|| Error::Parameter(format!("unknown strategy {s:?}")))?;
                StrategySpec::long_short(pct as f64 / 100.0)
            }
        }
    }
}

/// Fully invested portfolio (`Σw = 1`) with per-asset bounds and an optional
/// cap on total short exposure `Σ max(-wᵢ, 0) ≤ L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub short_budget: Option<f64>,
}

impl ConstraintSet {
    pub fn long_only(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            upper: vec![1.0; n],
            short_budget: None,
        }
    }

    pub fn long_short(n: usize, leverage: f64) -> Self {
        Self {
            lower: vec![-leverage; n],
            upper: vec![1.0 + leverage; n],
            short_budget: Some(leverage),
        }
    }

    /// Budget constraint only.
    pub fn unconstrained(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            short_budget: None,
        }
    }

    pub fn n_assets(&self) -> usize {
        self.lower.len()
    }

    /// Target-return range for frontier grids: the attainable range of
    /// `meansᵀw`, or the asset-mean range when that is unbounded.
    pub fn frontier_range(&self, means: &DVector<f64>) -> Result<(f64, f64)> {
        self.formulation()?.grid_range(means)
    }

    /// Largest violation of budget, bounds or short budget.
    pub fn violation(&self, w: &[f64]) -> f64 {
        assert_eq!(w.len(), self.n_assets());
        let mut worst = (w.iter().sum::<f64>() - 1.0).abs();
        for (j, &x) in w.iter().enumerate() {
            worst = worst.max(self.lower[j] - x).max(x - self.upper[j]);
        }
        if let Some(l) = self.short_budget {
            let shorts: f64 = w.iter().map(|x| (-x).max(0.0)).sum();
            worst = worst.max(shorts - l);
        }
        worst.max(0.0)
    }

    pub fn is_satisfied(&self, w: &[f64], tol: f64) -> bool {
        self.violation(w) <= tol
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.n_assets();
        if n == 0 || self.upper.len() != n {
            return Err(Error::Parameter("constraint set has no assets".into()));
        }
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(Error::Parameter(format!(
                    "invalid bounds [{lo}, {hi}] for asset {j}"
                )));
            }
            if self.short_budget.is_some() && !(lo <= 0.0 && hi >= 0.0) {
                return Err(Error::Parameter(
                    "a short budget requires bounds that contain zero".into(),
                ));
            }
        }
        if let Some(l) = self.short_budget {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(Error::Parameter(format!("invalid short budget {l}")));
            }
        }
        let lo_sum: f64 = self.lower.iter().sum();
        let hi_sum: f64 = self.upper.iter().sum();
        if lo_sum > 1.0 || hi_sum < 1.0 {
            return Err(Error::Infeasible);
        }
        Ok(())
    }

    /// Decision-variable layout shared by the LP and QP formulations.
    ///
    /// Without a short budget the variables are the weights themselves. With
    /// one, `w = u - v` with `u ∈ [0, hi]`, `v ∈ [0, -lo]` and a slack `s ≥ 0`
    /// closing `Σv + s = L`.
    pub(crate) fn formulation(&self) -> Result<Formulation> {
        self.validate()?;
        let n = self.n_assets();
        match self.short_budget {
            None => Ok(Formulation {
                n_assets: n,
                map: DMatrix::identity(n, n),
                eq_matrix: DMatrix::from_element(1, n, 1.0),
                eq_rhs: DVector::from_element(1, 1.0),
                lower: DVector::from_column_slice(&self.lower),
                upper: DVector::from_column_slice(&self.upper),
            }),
            Some(l) => {
                let nx = 2 * n + 1;
                let mut map = DMatrix::zeros(n, nx);
                let mut eq = DMatrix::zeros(2, nx);
                let mut lower = DVector::zeros(nx);
                let mut upper = DVector::zeros(nx);
                for j in 0..n {
                    map[(j, j)] = 1.0;
                    map[(j, n + j)] = -1.0;
                    eq[(0, j)] = 1.0;
                    eq[(0, n + j)] = -1.0;
                    eq[(1, n + j)] = 1.0;
                    upper[j] = self.upper[j];
                    upper[n + j] = -self.lower[j];
                }
                eq[(1, 2 * n)] = 1.0;
                upper[2 * n] = f64::INFINITY;
                lower[2 * n] = 0.0;
                Ok(Formulation {
                    n_assets: n,
                    map,
                    eq_matrix: eq,
                    eq_rhs: DVector::from_vec(vec![1.0, l]),
                    lower,
                    upper,
                })
            }
        }
    }
}

/// Linear description of a constraint set over decision variables `x`,
/// with weights `w = map · x`.
#[derive(Debug, Clone)]
pub(crate) struct Formulation {
    pub n_assets: usize,
    pub map: DMatrix<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl Formulation {
    pub fn n_vars(&self) -> usize {
        self.map.ncols()
    }

    pub fn weights(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.map * x
    }

    /// Equality rows with an extra `meansᵀw = target` row appended.
    pub fn with_target(&self, means: &DVector<f64>, target: f64) -> (DMatrix<f64>, DVector<f64>) {
        let m = self.eq_matrix.nrows();
        let mut eq = self.eq_matrix.clone().insert_row(m, 0.0);
        let row = means.transpose() * &self.map;
        eq.row_mut(m).copy_from(&row);
        let rhs = self.eq_rhs.clone().push(target);
        (eq, rhs)
    }

    /// A feasible point of the decision variables for the given weights, or
    /// `None` if the weights violate the set.
    pub fn lift(&self, w: &DVector<f64>) -> Option<DVector<f64>> {
        let n = self.n_assets;
        if self.n_vars() == n {
            return Some(w.clone());
        }
        let mut x = DVector::zeros(self.n_vars());
        let mut shorts = 0.0;
        for j in 0..n {
            if w[j] >= 0.0 {
                x[j] = w[j];
            } else {
                x[n + j] = -w[j];
                shorts -= w[j];
            }
        }
        x[2 * n] = self.eq_rhs[1] - shorts;
        let inside = (0..x.len()).all(|j| x[j] >= self.lower[j] && x[j] <= self.upper[j]);
        inside.then_some(x)
    }

    /// Target-return span for frontier grids: the attainable range, or the
    /// range of asset means when the set is unbounded in return.
    pub fn grid_range(&self, means: &DVector<f64>) -> Result<(f64, f64)> {
        match self.return_range(means) {
            Err(Error::Solver(crate::solvers::SolverStatus::Unbounded)) => {
                Ok((means.min(), means.max()))
            }
            other => other,
        }
    }

    /// Smallest and largest attainable `meansᵀw`.
    pub fn return_range(&self, means: &DVector<f64>) -> Result<(f64, f64)> {
        use crate::solvers::{solve_lp, LinearProgram};
        let c = (means.transpose() * &self.map).transpose();
        let mut ends = [0.0; 2];
        for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
            let lp = LinearProgram::new(
                &c * sign,
                self.eq_matrix.clone(),
                self.eq_rhs.clone(),
                self.lower.clone(),
                self.upper.clone(),
            )?;
            let sol = solve_lp(&lp);
            if !sol.is_optimal() {
                return Err(match sol.status {
                    crate::solvers::SolverStatus::Infeasible => Error::Infeasible,
                    s => Error::Solver(s),
                });
            }
            ends[k] = sign * sol.objective_value;
        }
        Ok((ends[0], ends[1]))
    }
}

/// Constraints implied by a strategy for `n_assets` assets.
pub fn build_constraints(strategy: StrategySpec, n_assets: usize) -> Result<ConstraintSet> {
    if n_assets == 0 {
        return Err(Error::Parameter("at least one asset is required".into()));
    }
    match strategy {
        StrategySpec::LongOnly => Ok(ConstraintSet::long_only(n_assets)),
        StrategySpec::LongShort { leverage } => {
            StrategySpec::long_short(leverage)?;
            Ok(ConstraintSet::long_short(n_assets, leverage))
        }
    }
}
