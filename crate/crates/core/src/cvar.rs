//! Empirical VaR/CVaR and scenario-based CVaR portfolio optimization.
//!
//! Portfolio problems use the Rockafellar–Uryasev reduction
//!
//! ```text
//! minimize ζ + 1/(αT) Σ zₜ   s.t.  zₜ ≥ -rₜᵀw - ζ,  zₜ ≥ 0,  w ∈ constraint set
//! ```
//!
//! which is solved through its LP dual: the dual has one bounded variable per
//! scenario but only one equality row per primal weight variable, which keeps
//! the simplex basis small. The primal solution is read back from the dual's
//! simplex multipliers.

use nalgebra::{DMatrix, DVector};

use crate::backtest::{ConstraintSet, Formulation};
use crate::meanvar::{
    nearest_index, return_grid, tangency_search, FrontierPoint, Portfolio, PortfolioLabel,
};
use crate::solvers::{solve_lp_with, LinearProgram, LpBasis, LpOptions, SolverStatus, Tolerances};
use crate::stats;
use crate::{Error, Result};

/// Per-day scenario returns, one row per equally likely scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioMatrix {
    returns: DMatrix<f64>,
}

impl ScenarioMatrix {
    pub fn new(returns: DMatrix<f64>) -> Result<Self> {
        if returns.nrows() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: returns.nrows(),
            });
        }
        if returns.ncols() == 0 {
            return Err(Error::Parameter("scenario matrix has no assets".into()));
        }
        if returns.iter().any(|r| !r.is_finite()) {
            return Err(Error::Data("scenario returns must be finite".into()));
        }
        Ok(Self { returns })
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn n_scenarios(&self) -> usize {
        self.returns.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.returns.ncols()
    }

    pub fn means(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.n_assets(),
            self.returns.column_iter().map(|c| c.mean()),
        )
    }

    /// Loss `-rₜᵀw` in each scenario.
    pub fn losses(&self, weights: &DVector<f64>) -> Vec<f64> {
        (&self.returns * weights).iter().map(|r| -r).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvarEstimate {
    pub confidence: f64,
    pub tail_prob: f64,
    pub var: f64,
    pub cvar: f64,
}

fn tail_prob(confidence: f64) -> Result<f64> {
    if !(0.5..1.0).contains(&confidence) {
        return Err(Error::Parameter(format!(
            "confidence must lie in [0.5, 1), got {confidence}"
        )));
    }
    Ok(1.0 - confidence)
}

/// `α·T`, snapped to the nearest integer when within rounding noise of it so
/// that e.g. `(1 - 0.95) · 20` counts as exactly one scenario.
fn tail_mass(alpha: f64, t: usize) -> f64 {
    let x = alpha * t as f64;
    if (x - x.round()).abs() <= 1e-9 * x.max(1.0) {
        x.round()
    } else {
        x
    }
}

/// Number of tail observations `⌈α·T⌉`.
pub fn tail_count(confidence: f64, t: usize) -> Result<usize> {
    let alpha = tail_prob(confidence)?;
    Ok(tail_mass(alpha, t).ceil() as usize)
}

/// CVaR with tail mass exactly `α·T`, counting the boundary scenario
/// fractionally. This is the value the scenario LP assigns to fixed weights.
pub fn fractional_cvar(losses: &[f64], confidence: f64) -> Result<f64> {
    let alpha = tail_prob(confidence)?;
    if losses.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut sorted = losses.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mass = tail_mass(alpha, sorted.len());
    let full = mass.floor() as usize;
    let mut sum: f64 = sorted[..full].iter().sum();
    if full < sorted.len() {
        sum += (mass - full as f64) * sorted[full];
    }
    Ok(sum / mass)
}

/// VaR is the `k`-th largest loss and CVaR the mean of the `k` largest, with
/// `k = ⌈α·T⌉` and `α = 1 - confidence`.
pub fn empirical_var_cvar(losses: &[f64], confidence: f64) -> Result<CvarEstimate> {
    let alpha = tail_prob(confidence)?;
    let t = losses.len();
    if t == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if losses.iter().any(|l| l.is_nan()) {
        return Err(Error::Data("losses contain NaN".into()));
    }
    let k = (tail_mass(alpha, t).ceil() as usize).clamp(1, t);
    let mut sorted = losses.to_vec();
    // descending; the k largest end up in sorted[..k]
    sorted.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    // fixed summation order, so equal tails give bit-identical means
    sorted[..k].sort_unstable_by(|a, b| b.total_cmp(a));
    let var = sorted[k - 1];
    let cvar = sorted[..k].iter().sum::<f64>() / k as f64;
    // guard against summation noise when every tail value equals VaR
    let cvar = cvar.max(var);
    Ok(CvarEstimate {
        confidence,
        tail_prob: alpha,
        var,
        cvar,
    })
}

/// Label used for min-CVaR (`tangent = false`) or tangent-CVaR portfolios.
pub fn cvar_label(confidence: f64, tangent: bool) -> PortfolioLabel {
    match ((confidence * 100.0).round() as u32, tangent) {
        (95, false) => PortfolioLabel::M95,
        (99, false) => PortfolioLabel::M99,
        (95, true) => PortfolioLabel::T95,
        (99, true) => PortfolioLabel::T99,
        _ => PortfolioLabel::Custom,
    }
}

/// Risk denominator used when picking the tangent point of a CVaR frontier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TangencyRisk {
    #[default]
    Cvar,
    StdDev,
}

#[derive(Debug, Clone)]
pub struct CvarOptions {
    pub tolerances: Tolerances,
    /// Target-return grid size for tangent portfolios.
    pub grid_points: usize,
    pub tangency_risk: TangencyRisk,
    /// Weights whose expected return seeds the tangency search.
    pub initial: Option<DVector<f64>>,
}

impl Default for CvarOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            grid_points: 200,
            tangency_risk: TangencyRisk::Cvar,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinCvarSolution {
    pub portfolio: Portfolio,
    /// Optimal LP objective.
    pub cvar: f64,
    /// Optimal threshold `ζ`.
    pub var: f64,
}

pub fn min_cvar_portfolio(
    scenarios: &ScenarioMatrix,
    confidence: f64,
    target_return: Option<f64>,
    constraints: &ConstraintSet,
) -> Result<Portfolio> {
    solve_min_cvar(
        scenarios,
        confidence,
        target_return,
        constraints,
        &CvarOptions::default(),
    )
    .map(|s| s.portfolio)
}

pub fn solve_min_cvar(
    scenarios: &ScenarioMatrix,
    confidence: f64,
    target_return: Option<f64>,
    constraints: &ConstraintSet,
    opts: &CvarOptions,
) -> Result<MinCvarSolution> {
    let form = constraints.formulation()?;
    let model = DualModel::new(scenarios, confidence, &form)?;
    let means = scenarios.means();
    let (eq, rhs) = match target_return {
        Some(t) => form.with_target(&means, t),
        None => (form.eq_matrix.clone(), form.eq_rhs.clone()),
    };
    let (sol, _) = model.solve(&eq, &rhs, None, &opts.tolerances)?;
    Ok(MinCvarSolution {
        portfolio: Portfolio::new(cvar_label(confidence, false), sol.weights),
        cvar: sol.objective,
        var: sol.zeta,
    })
}

/// One min-CVaR solve per evenly spaced target; infeasible targets are
/// skipped with a warning.
pub fn trace_cvar_frontier(
    scenarios: &ScenarioMatrix,
    confidence: f64,
    n_points: usize,
    return_range: (f64, f64),
    constraints: &ConstraintSet,
    risk_free: f64,
) -> Result<Vec<FrontierPoint>> {
    let grid = return_grid(n_points, return_range.0, return_range.1)?;
    let scan = scan_targets(
        scenarios,
        confidence,
        constraints,
        &grid,
        &Tolerances::default(),
    )?;
    Ok(scan
        .into_iter()
        .map(|p| FrontierPoint {
            target_return: p.target,
            risk: p.cvar,
            sharpe_like: (p.target - risk_free) / p.cvar,
            weights: p.weights,
        })
        .collect())
}

/// Grid point maximizing `(r̄ₚ - r_f) / risk` along the CVaR frontier, with the
/// grid spanning the attainable return range.
pub fn tangent_cvar_portfolio(
    scenarios: &ScenarioMatrix,
    confidence: f64,
    risk_free: f64,
    constraints: &ConstraintSet,
) -> Result<Portfolio> {
    tangent_cvar_portfolio_with(
        scenarios,
        confidence,
        risk_free,
        constraints,
        &CvarOptions::default(),
    )
}

pub fn tangent_cvar_portfolio_with(
    scenarios: &ScenarioMatrix,
    confidence: f64,
    risk_free: f64,
    constraints: &ConstraintSet,
    opts: &CvarOptions,
) -> Result<Portfolio> {
    let form = constraints.formulation()?;
    let means = scenarios.means();
    let (lo, hi) = form.grid_range(&means)?;
    let grid = if lo < hi {
        return_grid(opts.grid_points, lo, hi)?
    } else {
        vec![lo]
    };
    let model = DualModel::new(scenarios, confidence, &form)?;
    let start = opts
        .initial
        .as_ref()
        .map_or(0, |w| nearest_index(&grid, means.dot(w)));
    let convex = opts.tangency_risk == TangencyRisk::Cvar;
    let mut bases: Vec<Option<LpBasis>> = vec![None; grid.len()];
    let best = tangency_search(grid.len(), start, risk_free, convex, |i| {
        let warm = [i.wrapping_sub(1), i + 1]
            .into_iter()
            .find_map(|j| bases.get(j).cloned().flatten());
        let (eq, rhs) = form.with_target(&means, grid[i]);
        let sol = match model.solve(&eq, &rhs, warm, &opts.tolerances) {
            Ok((sol, b)) => {
                bases[i] = b;
                sol
            }
            Err(Error::Infeasible) => return Ok(None),
            Err(e) => return Err(e),
        };
        let risk = match opts.tangency_risk {
            TangencyRisk::Cvar => sol.objective,
            TangencyRisk::StdDev => {
                let r: Vec<f64> = (scenarios.returns() * &sol.weights)
                    .iter()
                    .copied()
                    .collect();
                stats::sample_std(&r)
            }
        };
        Ok(Some((grid[i], risk, sol.weights)))
    })?;
    let w =
        best.ok_or_else(|| Error::TangencyUndefined("no frontier point has positive risk".into()))?;
    Ok(Portfolio::new(cvar_label(confidence, true), w))
}

struct ScanPoint {
    target: f64,
    cvar: f64,
    weights: DVector<f64>,
}

fn scan_targets(
    scenarios: &ScenarioMatrix,
    confidence: f64,
    constraints: &ConstraintSet,
    grid: &[f64],
    tol: &Tolerances,
) -> Result<Vec<ScanPoint>> {
    let form = constraints.formulation()?;
    let model = DualModel::new(scenarios, confidence, &form)?;
    let means = scenarios.means();
    let mut basis: Option<LpBasis> = None;
    let mut out = Vec::with_capacity(grid.len());
    for &target in grid {
        let (eq, rhs) = form.with_target(&means, target);
        match model.solve(&eq, &rhs, basis.take(), tol) {
            Ok((sol, b)) => {
                basis = b;
                out.push(ScanPoint {
                    target,
                    cvar: sol.objective,
                    weights: sol.weights,
                });
            }
            Err(Error::Infeasible) => {
                log::warn!("CVaR frontier: target return {target:e} is infeasible, skipped");
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

struct PrimalSolution {
    weights: DVector<f64>,
    zeta: f64,
    objective: f64,
}

/// Dual of the Rockafellar–Uryasev LP over the variables of a constraint
/// formulation. Columns are `[q (T) | η (equality rows) | a (finite lower
/// bounds) | b (finite upper bounds)]`; row 0 is `Σq = 1` and row `1 + j`
/// is stationarity in primal variable `j`.
struct DualModel<'a> {
    form: &'a Formulation,
    /// `T x k`, scenario returns mapped onto the decision variables.
    gains: DMatrix<f64>,
    tail_weight: f64,
    lower_idx: Vec<usize>,
    upper_idx: Vec<usize>,
}

impl<'a> DualModel<'a> {
    fn new(scenarios: &ScenarioMatrix, confidence: f64, form: &'a Formulation) -> Result<Self> {
        if scenarios.n_assets() != form.n_assets {
            return Err(Error::Parameter(format!(
                "{} scenario assets but {} constrained assets",
                scenarios.n_assets(),
                form.n_assets
            )));
        }
        let alpha = tail_prob(confidence)?;
        let t = scenarios.n_scenarios();
        let k = form.n_vars();
        Ok(Self {
            form,
            gains: scenarios.returns() * &form.map,
            tail_weight: 1.0 / tail_mass(alpha, t),
            lower_idx: (0..k).filter(|&j| form.lower[j].is_finite()).collect(),
            upper_idx: (0..k).filter(|&j| form.upper[j].is_finite()).collect(),
        })
    }

    fn program(&self, eq: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<LinearProgram> {
        let (t, k) = self.gains.shape();
        let m = eq.nrows();
        let (na, nb) = (self.lower_idx.len(), self.upper_idx.len());
        let cols = t + m + na + nb;
        let mut a = DMatrix::zeros(k + 1, cols);
        let mut cost = DVector::zeros(cols);
        let mut lo = DVector::zeros(cols);
        let mut hi = DVector::from_element(cols, f64::INFINITY);

        for s in 0..t {
            a[(0, s)] = 1.0;
            for j in 0..k {
                a[(1 + j, s)] = self.gains[(s, j)];
            }
            hi[s] = self.tail_weight;
        }
        for i in 0..m {
            let c = t + i;
            for j in 0..k {
                a[(1 + j, c)] = eq[(i, j)];
            }
            cost[c] = -rhs[i];
            lo[c] = f64::NEG_INFINITY;
        }
        for (p, &j) in self.lower_idx.iter().enumerate() {
            let c = t + m + p;
            a[(1 + j, c)] = 1.0;
            cost[c] = -self.form.lower[j];
        }
        for (p, &j) in self.upper_idx.iter().enumerate() {
            let c = t + m + na + p;
            a[(1 + j, c)] = -1.0;
            cost[c] = self.form.upper[j];
        }
        let mut b = DVector::zeros(k + 1);
        b[0] = 1.0;
        LinearProgram::new(cost, a, b, lo, hi)
    }

    fn solve(
        &self,
        eq: &DMatrix<f64>,
        rhs: &DVector<f64>,
        warm_start: Option<LpBasis>,
        tol: &Tolerances,
    ) -> Result<(PrimalSolution, Option<LpBasis>)> {
        let lp = self.program(eq, rhs)?;
        let (sol, basis) = solve_lp_with(
            &lp,
            &LpOptions {
                tolerances: *tol,
                max_iterations: None,
                warm_start,
            },
        );
        match sol.status {
            SolverStatus::Optimal => {}
            // an unbounded dual certifies an empty primal feasible set
            SolverStatus::Unbounded => return Err(Error::Infeasible),
            SolverStatus::Infeasible => return Err(Error::Solver(SolverStatus::Unbounded)),
            s => return Err(Error::Solver(s)),
        }
        let k = self.form.n_vars();
        let mut x = DVector::from_fn(k, |j, _| -sol.duals[1 + j]);
        for j in 0..k {
            x[j] = x[j].clamp(self.form.lower[j], self.form.upper[j]);
        }
        Ok((
            PrimalSolution {
                weights: self.form.weights(&x),
                zeta: -sol.duals[0],
                objective: -sol.objective_value,
            },
            basis,
        ))
    }
}
