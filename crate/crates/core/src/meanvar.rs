//! Mean-variance portfolio selection: the closed-form efficient frontier,
//! minimum-variance and tangent portfolios, and constrained optimization
//! through the quadratic-programming solver.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};

use crate::backtest::{ConstraintSet, Formulation};
use crate::solvers::{
    solve_qp_with, solve_spd_system, QpOptions, QuadraticProgram, SolverSolution, SolverStatus,
    Tolerances,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PortfolioLabel {
    Mvp,
    Tvp,
    M95,
    T95,
    M99,
    T99,
    Eqw,
    Custom,
}

impl PortfolioLabel {
    /// The six optimized portfolios.
    pub const OPTIMIZED: [PortfolioLabel; 6] = [
        PortfolioLabel::Mvp,
        PortfolioLabel::Tvp,
        PortfolioLabel::M95,
        PortfolioLabel::T95,
        PortfolioLabel::M99,
        PortfolioLabel::T99,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PortfolioLabel::Mvp => "MVP",
            PortfolioLabel::Tvp => "TVP",
            PortfolioLabel::M95 => "M95",
            PortfolioLabel::T95 => "T95",
            PortfolioLabel::M99 => "M99",
            PortfolioLabel::T99 => "T99",
            PortfolioLabel::Eqw => "EQW",
            PortfolioLabel::Custom => "custom",
        }
    }
}

impl fmt::Display for PortfolioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PortfolioLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = [
            PortfolioLabel::Mvp,
            PortfolioLabel::Tvp,
            PortfolioLabel::M95,
            PortfolioLabel::T95,
            PortfolioLabel::M99,
            PortfolioLabel::T99,
            PortfolioLabel::Eqw,
            PortfolioLabel::Custom,
        ];
        all.into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parameter(format!("unknown portfolio label {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    pub label: PortfolioLabel,
    pub weights: DVector<f64>,
    pub as_of: Option<NaiveDate>,
}

impl Portfolio {
    pub fn new(label: PortfolioLabel, weights: DVector<f64>) -> Self {
        Self {
            label,
            weights,
            as_of: None,
        }
    }

    pub fn dated(mut self, date: NaiveDate) -> Self {
        self.as_of = Some(date);
        self
    }

    pub fn equal_weight(n: usize) -> Self {
        Self::new(
            PortfolioLabel::Eqw,
            DVector::from_element(n, 1.0 / n as f64),
        )
    }

    pub fn expected_return(&self, means: &DVector<f64>) -> f64 {
        means.dot(&self.weights)
    }

    pub fn variance(&self, covariance: &DMatrix<f64>) -> f64 {
        self.weights.dot(&(covariance * &self.weights))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub target_return: f64,
    /// Standard deviation on the mean-variance frontier, CVaR on a CVaR frontier.
    pub risk: f64,
    pub weights: DVector<f64>,
    pub sharpe_like: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub delta: f64,
    pub w1: DVector<f64>,
    pub w2: DVector<f64>,
    pub means: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// Set when all means coincide and the frontier collapses to the MVP.
    pub degenerate: bool,
    inv_means: DVector<f64>,
    inv_ones: DVector<f64>,
}

impl FrontierCoefficients {
    /// Frontier variance `(B r² - 2C r + A) / Δ` at target return `r`.
    pub fn variance_at(&self, target: f64) -> Result<f64> {
        if self.degenerate {
            return Err(Error::DegenerateFrontier);
        }
        let v = (self.b * target * target - 2.0 * self.c * target + self.a) / self.delta;
        Ok(v.max(0.0))
    }

    /// Return of the minimum-variance portfolio, `C / B`.
    pub fn mvp_return(&self) -> f64 {
        self.c / self.b
    }

    pub fn n_assets(&self) -> usize {
        self.means.len()
    }
}

pub fn frontier_coefficients(
    means: &DVector<f64>,
    covariance: &DMatrix<f64>,
) -> Result<FrontierCoefficients> {
    frontier_coefficients_with(means, covariance, &Tolerances::default())
}

pub fn frontier_coefficients_with(
    means: &DVector<f64>,
    covariance: &DMatrix<f64>,
    tol: &Tolerances,
) -> Result<FrontierCoefficients> {
    let n = means.len();
    if n < 2 {
        return Err(Error::Parameter(format!(
            "the frontier needs at least two assets, got {n}"
        )));
    }
    if covariance.shape() != (n, n) {
        return Err(Error::Parameter(format!(
            "covariance is {}x{}, expected {n}x{n}",
            covariance.nrows(),
            covariance.ncols()
        )));
    }
    let ones = DVector::from_element(n, 1.0);
    let mut solved = solve_spd_system(covariance, &[means.clone(), ones.clone()], tol)?;
    let inv_ones = solved.pop().expect("two right-hand sides");
    let inv_means = solved.pop().expect("two right-hand sides");

    let a = means.dot(&inv_means);
    let b = ones.dot(&inv_ones);
    let c = means.dot(&inv_ones);
    if !(b > 0.0) {
        return Err(Error::SingularMatrix);
    }
    let raw_delta = a * b - c * c;
    let spread = means.max() - means.min();
    let degenerate = spread == 0.0 || raw_delta <= 1e-12 * a * b;
    let (delta, w1, w2) = if degenerate {
        (0.0, DVector::zeros(n), &inv_ones / b)
    } else {
        (
            raw_delta,
            (&inv_means * b - &inv_ones * c) / raw_delta,
            (&inv_ones * a - &inv_means * c) / raw_delta,
        )
    };
    Ok(FrontierCoefficients {
        a,
        b,
        c,
        delta,
        w1,
        w2,
        means: means.clone(),
        covariance: covariance.clone(),
        degenerate,
        inv_means,
        inv_ones,
    })
}

/// Frontier weights `r·w1 + w2` for target return `r`.
pub fn frontier_weights(coeffs: &FrontierCoefficients, target_return: f64) -> Result<DVector<f64>> {
    if coeffs.degenerate {
        return Err(Error::DegenerateFrontier);
    }
    Ok(&coeffs.w1 * target_return + &coeffs.w2)
}

/// `Σ⁻¹e / B`.
pub fn min_variance_portfolio(coeffs: &FrontierCoefficients) -> Portfolio {
    Portfolio::new(PortfolioLabel::Mvp, &coeffs.inv_ones / coeffs.b)
}

/// `Σ⁻¹(r̄ - r_f e) / (C - B r_f)`.
pub fn tangent_portfolio(coeffs: &FrontierCoefficients, risk_free: f64) -> Result<Portfolio> {
    let denom = coeffs.c - coeffs.b * risk_free;
    let scale = coeffs.c.abs() + (coeffs.b * risk_free).abs();
    if denom.abs() <= 1e-14 * scale || denom == 0.0 {
        return Err(Error::TangencyUndefined(format!(
            "excess-return normalization C - B·r_f vanishes at r_f = {risk_free}"
        )));
    }
    let w = (&coeffs.inv_means - &coeffs.inv_ones * risk_free) / denom;
    Ok(Portfolio::new(PortfolioLabel::Tvp, w))
}

/// Evenly spaced target returns from `lo` to `hi` inclusive.
pub fn return_grid(n_points: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if n_points < 2 {
        return Err(Error::Parameter(format!(
            "a frontier needs at least 2 points, got {n_points}"
        )));
    }
    if !(lo < hi) {
        return Err(Error::Parameter(format!("empty return range [{lo}, {hi}]")));
    }
    let step = (hi - lo) / (n_points - 1) as f64;
    Ok((0..n_points)
        .map(|i| {
            if i == n_points - 1 {
                hi
            } else {
                lo + step * i as f64
            }
        })
        .collect())
}

/// Closed-form frontier at evenly spaced targets in `return_range`.
pub fn trace_frontier(
    coeffs: &FrontierCoefficients,
    n_points: usize,
    return_range: (f64, f64),
    risk_free: f64,
) -> Result<Vec<FrontierPoint>> {
    if coeffs.degenerate {
        return Err(Error::DegenerateFrontier);
    }
    return_grid(n_points, return_range.0, return_range.1)?
        .into_iter()
        .map(|r| {
            let weights = frontier_weights(coeffs, r)?;
            let risk = coeffs.variance_at(r)?.sqrt();
            Ok(FrontierPoint {
                target_return: r,
                risk,
                weights,
                sharpe_like: (r - risk_free) / risk,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MvObjective {
    MinVariance,
    /// Highest `(r̄ᵀw - r_f) / σ` over a grid of target returns.
    MaxSharpe {
        risk_free: f64,
    },
}

#[derive(Debug, Clone)]
pub struct MvOptions {
    /// Target-return grid size for [`MvObjective::MaxSharpe`].
    pub grid_points: usize,
    pub tolerances: Tolerances,
    /// Weights to try as a starting point.
    pub initial: Option<DVector<f64>>,
}

impl Default for MvOptions {
    fn default() -> Self {
        Self {
            grid_points: 200,
            tolerances: Tolerances::default(),
            initial: None,
        }
    }
}

pub fn constrained_mv_portfolio(
    means: &DVector<f64>,
    covariance: &DMatrix<f64>,
    target_return: Option<f64>,
    constraints: &ConstraintSet,
    objective: MvObjective,
) -> Result<Portfolio> {
    constrained_mv_portfolio_with(
        means,
        covariance,
        target_return,
        constraints,
        objective,
        &MvOptions::default(),
    )
}

pub fn constrained_mv_portfolio_with(
    means: &DVector<f64>,
    covariance: &DMatrix<f64>,
    target_return: Option<f64>,
    constraints: &ConstraintSet,
    objective: MvObjective,
    opts: &MvOptions,
) -> Result<Portfolio> {
    let n = means.len();
    if covariance.shape() != (n, n) || constraints.n_assets() != n {
        return Err(Error::Parameter(format!(
            "dimension mismatch: {n} means, {}x{} covariance, {} constrained assets",
            covariance.nrows(),
            covariance.ncols(),
            constraints.n_assets()
        )));
    }
    let form = constraints.formulation()?;
    let problem = MvProblem::new(&form, covariance);
    let initial = opts.initial.as_ref().and_then(|w| form.lift(w));

    match objective {
        MvObjective::MinVariance => {
            let (eq, rhs) = match target_return {
                Some(t) => form.with_target(means, t),
                None => (form.eq_matrix.clone(), form.eq_rhs.clone()),
            };
            let sol = problem.solve(eq, rhs, initial, opts.tolerances)?;
            let sol = check(sol)?;
            Ok(Portfolio::new(PortfolioLabel::Mvp, form.weights(&sol.x)))
        }
        MvObjective::MaxSharpe { risk_free } => {
            let (lo, hi) = form.grid_range(means)?;
            let grid = if lo < hi {
                return_grid(opts.grid_points, lo, hi)?
            } else {
                vec![lo]
            };
            let start = initial
                .as_ref()
                .map_or(0, |x| nearest_index(&grid, means.dot(&form.weights(x))));
            let best = tangency_search(grid.len(), start, risk_free, true, |i| {
                let (eq, rhs) = form.with_target(means, grid[i]);
                let Ok(sol) = check(problem.solve(eq, rhs, initial.clone(), opts.tolerances)?)
                else {
                    return Ok(None);
                };
                let w = form.weights(&sol.x);
                let sd = w.dot(&(covariance * &w)).max(0.0).sqrt();
                Ok(Some((means.dot(&w), sd, w)))
            })?;
            let w = best.ok_or_else(|| {
                Error::TangencyUndefined("no grid point with positive risk".into())
            })?;
            Ok(Portfolio::new(PortfolioLabel::Tvp, w))
        }
    }
}

/// Index of the grid value closest to `x`.
pub(crate) fn nearest_index(grid: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (i, g) in grid.iter().enumerate() {
        if (g - x).abs() < (grid[best] - x).abs() {
            best = i;
        }
    }
    best
}

/// Maximizes `(ret - risk_free) / risk` over grid points `0..n`, where
/// `eval(i)` yields `(ret, risk, weights)` or `None` for an infeasible point.
/// Points without positive risk are ignored and ties go to the lowest index.
///
/// With `convex_risk` set, risk is taken to be convex along the grid, which
/// makes every superlevel set of the ratio at a nonnegative level an
/// interval. The walk then goes up from `start`, then down from `start - 1`,
/// and leaves each direction at the first point whose ratio falls below a
/// nonnegative best. Otherwise every point is evaluated.
pub(crate) fn tangency_search<F>(
    n: usize,
    start: usize,
    risk_free: f64,
    convex_risk: bool,
    mut eval: F,
) -> Result<Option<DVector<f64>>>
where
    F: FnMut(usize) -> Result<Option<(f64, f64, DVector<f64>)>>,
{
    let start = start.min(n.saturating_sub(1));
    let mut best: Option<(f64, usize, DVector<f64>)> = None;
    let order = (start..n)
        .map(|i| (i, true))
        .chain((0..start).rev().map(|i| (i, false)));
    let mut skip_up = false;
    for (i, up) in order {
        if up && skip_up {
            continue;
        }
        let Some((ret, risk, w)) = eval(i)? else {
            continue;
        };
        if !(risk > 0.0) {
            continue;
        }
        let ratio = (ret - risk_free) / risk;
        match &best {
            Some((c, j, _)) if !(ratio > *c || (ratio == *c && i < *j)) => {
                if convex_risk && *c >= 0.0 && ratio < *c {
                    if up {
                        skip_up = true;
                    } else {
                        break;
                    }
                }
            }
            _ => best = Some((ratio, i, w)),
        }
    }
    Ok(best.map(|(_, _, w)| w))
}

struct MvProblem<'a> {
    form: &'a Formulation,
    hessian: DMatrix<f64>,
}

impl<'a> MvProblem<'a> {
    fn new(form: &'a Formulation, covariance: &DMatrix<f64>) -> Self {
        let mut hessian = form.map.transpose() * covariance * &form.map;
        let k = hessian.nrows();
        for i in 0..k {
            for j in 0..i {
                let v = 0.5 * (hessian[(i, j)] + hessian[(j, i)]);
                hessian[(i, j)] = v;
                hessian[(j, i)] = v;
            }
        }
        Self { form, hessian }
    }

    fn solve(
        &self,
        eq: DMatrix<f64>,
        rhs: DVector<f64>,
        initial: Option<DVector<f64>>,
        tolerances: Tolerances,
    ) -> Result<SolverSolution> {
        let k = self.form.n_vars();
        let qp = QuadraticProgram::new(
            self.hessian.clone(),
            DVector::zeros(k),
            eq,
            rhs,
            self.form.lower.clone(),
            self.form.upper.clone(),
        )?;
        Ok(solve_qp_with(
            &qp,
            &QpOptions {
                tolerances,
                max_iterations: None,
                initial,
            },
        ))
    }
}

fn check(sol: SolverSolution) -> Result<SolverSolution> {
    match sol.status {
        SolverStatus::Optimal => Ok(sol),
        SolverStatus::Infeasible => Err(Error::Infeasible),
        s => Err(Error::Solver(s)),
    }
}
