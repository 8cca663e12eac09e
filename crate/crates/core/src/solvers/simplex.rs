use nalgebra::{DMatrix, DVector};

use super::{LinearProgram, SolverSolution, SolverStatus, Tolerances};

/// Final basis of a simplex solve, reusable as a warm start for a problem
/// with the same constraint matrix and bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpBasis {
    /// Column index (original variables first, then one artificial per row)
    /// of the basic variable in each row.
    pub basic: Vec<usize>,
    /// For every column, whether a nonbasic variable sits at its upper bound.
    pub at_upper: Vec<bool>,
}

#[derive(Debug, Clone, Default)]
pub struct LpOptions {
    pub tolerances: Tolerances,
    /// Defaults to `50 * (rows + columns)`.
    pub max_iterations: Option<usize>,
    pub warm_start: Option<LpBasis>,
}

pub fn solve_lp(problem: &LinearProgram) -> SolverSolution {
    solve_lp_with(problem, &LpOptions::default()).0
}

/// Bounded-variable two-phase simplex with Bland's rule.
///
/// Returns the solution and, when a basis was reached, the final basis.
pub fn solve_lp_with(
    problem: &LinearProgram,
    opts: &LpOptions,
) -> (SolverSolution, Option<LpBasis>) {
    let mut tableau = Tableau::new(problem, opts);
    let cap = opts
        .max_iterations
        .unwrap_or(50 * (problem.n_rows() + problem.n_vars()).max(1));

    let warm = opts
        .warm_start
        .as_ref()
        .map(|b| tableau.load_basis(b))
        .unwrap_or(false);

    if !warm {
        tableau.cold_start();
        match tableau.run(Phase::One, cap) {
            RunOutcome::Optimal => {}
            RunOutcome::Unbounded => {
                // phase one is bounded below by zero; treat as numerical failure
                return (
                    SolverSolution::failed(
                        problem.n_vars(),
                        SolverStatus::Infeasible,
                        tableau.iterations,
                    ),
                    None,
                );
            }
            RunOutcome::MaxIterations => {
                return (
                    SolverSolution::failed(
                        problem.n_vars(),
                        SolverStatus::MaxIterations,
                        tableau.iterations,
                    ),
                    None,
                );
            }
        }
        let infeasibility: f64 = (0..tableau.m)
            .filter(|&i| tableau.basis[i] >= tableau.n)
            .map(|i| tableau.xb[i].abs())
            .sum();
        let scale = problem.eq_rhs.amax().max(1.0);
        if infeasibility > opts.tolerances.feasibility * scale {
            return (
                SolverSolution::failed(
                    problem.n_vars(),
                    SolverStatus::Infeasible,
                    tableau.iterations,
                ),
                None,
            );
        }
        tableau.close_artificials();
    }

    let status = match tableau.run(Phase::Two, cap) {
        RunOutcome::Optimal => SolverStatus::Optimal,
        RunOutcome::Unbounded => SolverStatus::Unbounded,
        RunOutcome::MaxIterations => SolverStatus::MaxIterations,
    };
    if status != SolverStatus::Optimal {
        return (
            SolverSolution::failed(problem.n_vars(), status, tableau.iterations),
            None,
        );
    }
    tableau.refactor();
    let duals = tableau.duals();
    let x = DVector::from_iterator(problem.n_vars(), (0..tableau.n).map(|j| tableau.value(j)));
    let objective_value = problem.objective.dot(&x);
    let basis = tableau.basis();
    (
        SolverSolution {
            x,
            objective_value,
            status,
            duals,
            iterations: tableau.iterations,
        },
        Some(basis),
    )
}

/// Consecutive degenerate pivots before switching to Bland's rule.
const BLAND_AFTER: usize = 50;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

enum RunOutcome {
    Optimal,
    Unbounded,
    MaxIterations,
}

struct Tableau<'a> {
    problem: &'a LinearProgram,
    tol: Tolerances,
    m: usize,
    n: usize,
    /// `[A | S]` with one signed artificial column per row.
    full: DMatrix<f64>,
    /// `B⁻¹ [A | S]`, row-major: row `i` starts at `i * cols`.
    tab: Vec<f64>,
    cols: usize,
    xb: Vec<f64>,
    basis: Vec<usize>,
    /// Row of each basic column, `usize::MAX` when nonbasic.
    row_of: Vec<usize>,
    /// Current value of every nonbasic column.
    xn: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    iterations: usize,
    pivots_since_refactor: usize,
}

impl<'a> Tableau<'a> {
    fn new(problem: &'a LinearProgram, opts: &LpOptions) -> Self {
        let m = problem.n_rows();
        let n = problem.n_vars();
        let cols = n + m;
        let mut full = DMatrix::<f64>::zeros(m, cols);
        full.columns_mut(0, n).copy_from(&problem.eq_matrix);
        for i in 0..m {
            full[(i, n + i)] = 1.0;
        }
        let mut lo = vec![0.0; cols];
        let mut hi = vec![0.0; cols];
        for j in 0..n {
            lo[j] = problem.lower[j];
            hi[j] = problem.upper[j];
        }
        let mut xn = vec![0.0; cols];
        for j in 0..n {
            xn[j] = initial_value(lo[j], hi[j]);
        }
        Self {
            problem,
            tol: opts.tolerances,
            m,
            n,
            full,
            tab: vec![0.0; m * cols],
            cols,
            xb: vec![0.0; m],
            basis: (n..cols).collect(),
            row_of: (0..cols)
                .map(|j| if j >= n { j - n } else { usize::MAX })
                .collect(),
            xn,
            lo,
            hi,
            iterations: 0,
            pivots_since_refactor: 0,
        }
    }

    fn value(&self, j: usize) -> f64 {
        match self.row_of[j] {
            usize::MAX => self.xn[j],
            r => self.xb[r],
        }
    }

    fn residual(&self) -> Vec<f64> {
        let mut r: Vec<f64> = self.problem.eq_rhs.iter().copied().collect();
        for j in 0..self.cols {
            if self.row_of[j] == usize::MAX && self.xn[j] != 0.0 {
                for i in 0..self.m {
                    r[i] -= self.full[(i, j)] * self.xn[j];
                }
            }
        }
        r
    }

    fn cold_start(&mut self) {
        let (m, n, cols) = (self.m, self.n, self.cols);
        for j in 0..cols {
            self.row_of[j] = usize::MAX;
        }
        for j in 0..n {
            self.xn[j] = initial_value(self.lo[j], self.hi[j]);
        }
        for i in 0..m {
            self.full[(i, n + i)] = 1.0;
        }
        let r = self.residual();
        for i in 0..m {
            let s = if r[i] < 0.0 { -1.0 } else { 1.0 };
            self.full[(i, n + i)] = s;
            self.basis[i] = n + i;
            self.row_of[n + i] = i;
            self.lo[n + i] = 0.0;
            self.hi[n + i] = f64::INFINITY;
            self.xn[n + i] = 0.0;
            self.xb[i] = r[i].abs();
            for j in 0..cols {
                self.tab[i * cols + j] = s * self.full[(i, j)];
            }
        }
    }

    /// Artificials become fixed at zero; any still basic are pivoted out
    /// where the row allows it.
    fn close_artificials(&mut self) {
        let (n, cols) = (self.n, self.cols);
        for j in n..cols {
            self.lo[j] = 0.0;
            self.hi[j] = 0.0;
            if self.row_of[j] == usize::MAX {
                self.xn[j] = 0.0;
            }
        }
        for r in 0..self.m {
            if self.basis[r] < n {
                continue;
            }
            let row = &self.tab[r * cols..r * cols + n];
            let entering = (0..n)
                .filter(|&j| self.row_of[j] == usize::MAX)
                .find(|&j| row[j].abs() > 1e3 * self.tol.pivot);
            if let Some(j) = entering {
                let delta = self.xb[r] / self.tab[r * cols + j];
                for i in 0..self.m {
                    self.xb[i] -= self.tab[i * cols + j] * delta;
                }
                self.xb[r] = self.xn[j] + delta;
                let leaving = self.basis[r];
                self.xn[leaving] = 0.0;
                self.pivot(r, j);
            }
        }
    }

    fn costs(&self, phase: Phase) -> Vec<f64> {
        let mut c = vec![0.0; self.cols];
        match phase {
            Phase::One => {
                for j in self.n..self.cols {
                    c[j] = 1.0;
                }
            }
            Phase::Two => {
                for j in 0..self.n {
                    c[j] = self.problem.objective[j];
                }
            }
        }
        c
    }

    fn run(&mut self, phase: Phase, cap: usize) -> RunOutcome {
        let c = self.costs(phase);
        let cols = self.cols;
        let mut d = vec![0.0; cols];
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= cap {
                return RunOutcome::MaxIterations;
            }
            // reduced costs d = c - c_Bᵀ B⁻¹A
            d.copy_from_slice(&c);
            for i in 0..self.m {
                let cb = c[self.basis[i]];
                if cb != 0.0 {
                    let row = &self.tab[i * cols..(i + 1) * cols];
                    for (dj, &t) in d.iter_mut().zip(row) {
                        *dj -= cb * t;
                    }
                }
            }
            // Dantzig pricing, falling back to Bland's rule while degenerate
            // pivots keep repeating.
            let bland = degenerate_run >= BLAND_AFTER;
            let mut entering = None;
            let mut best = 0.0;
            for j in 0..cols {
                if self.row_of[j] != usize::MAX || self.lo[j] == self.hi[j] {
                    continue;
                }
                let candidate = if d[j] < -self.tol.optimality && self.xn[j] < self.hi[j] {
                    Some(1.0)
                } else if d[j] > self.tol.optimality && self.xn[j] > self.lo[j] {
                    Some(-1.0)
                } else {
                    None
                };
                if let Some(dir) = candidate {
                    if bland {
                        entering = Some((j, dir));
                        break;
                    }
                    if d[j].abs() > best {
                        best = d[j].abs();
                        entering = Some((j, dir));
                    }
                }
            }
            let Some((j, dir)) = entering else {
                return RunOutcome::Optimal;
            };

            let mut theta = f64::INFINITY;
            let mut leave: Option<(usize, bool)> = None;
            for i in 0..self.m {
                let alpha = self.tab[i * cols + j] * dir;
                let b = self.basis[i];
                let limit = if alpha > self.tol.pivot && self.lo[b].is_finite() {
                    ((self.xb[i] - self.lo[b]) / alpha).max(0.0)
                } else if alpha < -self.tol.pivot && self.hi[b].is_finite() {
                    ((self.hi[b] - self.xb[i]) / -alpha).max(0.0)
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((r, _)) => limit < theta || (limit == theta && b < self.basis[r]),
                };
                if better {
                    theta = limit;
                    leave = Some((i, alpha > 0.0));
                }
            }
            let flip = self.hi[j] - self.lo[j];
            self.iterations += 1;
            if flip <= theta {
                if !flip.is_finite() {
                    return RunOutcome::Unbounded;
                }
                for i in 0..self.m {
                    self.xb[i] -= self.tab[i * cols + j] * dir * flip;
                }
                self.xn[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
                continue;
            }
            let (r, to_lower) = leave.expect("finite ratio implies a leaving row");
            if theta == 0.0 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            for i in 0..self.m {
                self.xb[i] -= self.tab[i * cols + j] * dir * theta;
            }
            let leaving = self.basis[r];
            self.xn[leaving] = if to_lower {
                self.lo[leaving]
            } else {
                self.hi[leaving]
            };
            self.xb[r] = self.xn[j] + dir * theta;
            self.pivot(r, j);
            self.pivots_since_refactor += 1;
            if self.pivots_since_refactor >= 100 {
                self.refactor();
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols;
        let p = self.tab[r * cols + j];
        for k in 0..cols {
            self.tab[r * cols + k] /= p;
        }
        let (before, rest) = self.tab.split_at_mut(r * cols);
        let (pivot_row, after) = rest.split_at_mut(cols);
        for row in before.chunks_mut(cols).chain(after.chunks_mut(cols)) {
            let f = row[j];
            if f != 0.0 {
                for (x, &pr) in row.iter_mut().zip(pivot_row.iter()) {
                    *x -= f * pr;
                }
            }
        }
        let leaving = self.basis[r];
        self.row_of[leaving] = usize::MAX;
        self.basis[r] = j;
        self.row_of[j] = r;
    }

    fn basis_inverse(&self) -> Option<DMatrix<f64>> {
        let m = self.m;
        let mut b = DMatrix::<f64>::zeros(m, m);
        for (r, &j) in self.basis.iter().enumerate() {
            b.set_column(r, &self.full.column(j));
        }
        b.try_inverse()
    }

    /// Recomputes `B⁻¹A` and the basic values from scratch.
    fn refactor(&mut self) -> bool {
        self.pivots_since_refactor = 0;
        let Some(binv) = self.basis_inverse() else {
            return false;
        };
        let t = &binv * &self.full;
        let cols = self.cols;
        for i in 0..self.m {
            for k in 0..cols {
                self.tab[i * cols + k] = t[(i, k)];
            }
        }
        let r = DVector::from_vec(self.residual());
        let xb = &binv * r;
        self.xb.copy_from_slice(xb.as_slice());
        true
    }

    fn load_basis(&mut self, basis: &LpBasis) -> bool {
        if basis.basic.len() != self.m || basis.at_upper.len() != self.cols {
            return false;
        }
        let mut seen = vec![false; self.cols];
        for &j in &basis.basic {
            if j >= self.cols || seen[j] {
                return false;
            }
            seen[j] = true;
        }
        for j in self.n..self.cols {
            self.lo[j] = 0.0;
            self.hi[j] = 0.0;
        }
        for j in 0..self.cols {
            self.row_of[j] = usize::MAX;
            self.xn[j] = if j >= self.n {
                0.0
            } else if basis.at_upper[j] && self.hi[j].is_finite() {
                self.hi[j]
            } else {
                initial_value(self.lo[j], self.hi[j])
            };
        }
        for (r, &j) in basis.basic.iter().enumerate() {
            self.basis[r] = j;
            self.row_of[j] = r;
        }
        if !self.refactor() {
            return false;
        }
        let slack = self.tol.feasibility * self.problem.eq_rhs.amax().max(1.0);
        (0..self.m).all(|i| {
            let b = self.basis[i];
            self.xb[i] >= self.lo[b] - slack && self.xb[i] <= self.hi[b] + slack
        })
    }

    fn duals(&self) -> DVector<f64> {
        let c = self.costs(Phase::Two);
        let cb = DVector::from_iterator(self.m, self.basis.iter().map(|&j| c[j]));
        match self.basis_inverse() {
            Some(binv) => binv.transpose() * cb,
            None => DVector::from_element(self.m, f64::NAN),
        }
    }

    fn basis(&self) -> LpBasis {
        LpBasis {
            basic: self.basis.clone(),
            at_upper: (0..self.cols)
                .map(|j| {
                    self.row_of[j] == usize::MAX
                        && self.hi[j].is_finite()
                        && self.xn[j] == self.hi[j]
                        && self.lo[j] != self.hi[j]
                })
                .collect(),
        }
    }
}

fn initial_value(lo: f64, hi: f64) -> f64 {
    if lo.is_finite() {
        lo
    } else if hi.is_finite() {
        hi
    } else {
        0.0
    }
}
