//! Dense numerical kernels: Cholesky solves for SPD systems, a bounded-variable
//! simplex method for linear programs, and a primal active-set method for
//! convex quadratic programs with equality and bound constraints.
//!
//! All kernels are pure functions over immutable problem descriptions.

mod active_set;
mod cholesky;
mod simplex;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub use active_set::{solve_qp, solve_qp_with, QpOptions};
pub use cholesky::{cholesky, solve_spd_system};
pub use simplex::{solve_lp, solve_lp_with, LpBasis, LpOptions};

/// Numerical tolerances shared by every solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Maximum absolute constraint violation accepted as feasible.
    pub feasibility: f64,
    /// Maximum KKT stationarity residual, relative to the problem scale.
    pub stationarity: f64,
    /// Ridge added to an SPD matrix diagonal, relative to `trace / n`.
    pub ridge: f64,
    /// Smallest pivot magnitude the simplex will divide by.
    pub pivot: f64,
    /// Reduced-cost threshold for simplex optimality.
    pub optimality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-8,
            stationarity: 1e-8,
            ridge: 1e-8,
            pivot: 1e-11,
            optimality: 1e-11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct SolverSolution {
    pub x: DVector<f64>,
    pub objective_value: f64,
    pub status: SolverStatus,
    /// Equality-row multipliers `y` with reduced costs `c - Aᵀy`.
    /// Empty unless the solver produces them (LP only).
    pub duals: DVector<f64>,
    pub iterations: usize,
}

impl SolverSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolverStatus::Optimal
    }

    fn failed(n: usize, status: SolverStatus, iterations: usize) -> Self {
        Self {
            x: DVector::from_element(n, f64::NAN),
            objective_value: f64::NAN,
            status,
            duals: DVector::zeros(0),
            iterations,
        }
    }
}

/// `minimize cᵀx  s.t.  Ax = b,  lo ≤ x ≤ hi` (bounds may be infinite).
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl LinearProgram {
    pub fn new(
        objective: DVector<f64>,
        eq_matrix: DMatrix<f64>,
        eq_rhs: DVector<f64>,
        lower: DVector<f64>,
        upper: DVector<f64>,
    ) -> crate::Result<Self> {
        let n = objective.len();
        check_shapes(n, &eq_matrix, &eq_rhs, &lower, &upper)?;
        Ok(Self {
            objective,
            eq_matrix,
            eq_rhs,
            lower,
            upper,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.eq_rhs.len()
    }
}

/// `minimize ½xᵀQx + cᵀx  s.t.  Ax = b,  lo ≤ x ≤ hi` with `Q` symmetric PSD.
#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl QuadraticProgram {
    pub fn new(
        hessian: DMatrix<f64>,
        linear: DVector<f64>,
        eq_matrix: DMatrix<f64>,
        eq_rhs: DVector<f64>,
        lower: DVector<f64>,
        upper: DVector<f64>,
    ) -> crate::Result<Self> {
        let n = linear.len();
        if hessian.nrows() != n || hessian.ncols() != n {
            return Err(crate::Error::Parameter(format!(
                "hessian is {}x{}, expected {n}x{n}",
                hessian.nrows(),
                hessian.ncols()
            )));
        }
        let scale = hessian.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (hessian[(i, j)] - hessian[(j, i)]).abs() > 1e-12 * scale {
                    return Err(crate::Error::Parameter("hessian is not symmetric".into()));
                }
            }
        }
        let min_eig = SymmetricEigen::new(hessian.clone()).eigenvalues.min();
        if n > 0 && min_eig < -1e-10 * scale {
            return Err(crate::Error::Parameter(format!(
                "hessian is not positive semidefinite (eigenvalue {min_eig:e})"
            )));
        }
        check_shapes(n, &eq_matrix, &eq_rhs, &lower, &upper)?;
        Ok(Self {
            hessian,
            linear,
            eq_matrix,
            eq_rhs,
            lower,
            upper,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x)
    }
}

fn check_shapes(
    n: usize,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> crate::Result<()> {
    if a.ncols() != n || a.nrows() != b.len() || lo.len() != n || hi.len() != n {
        return Err(crate::Error::Parameter(format!(
            "inconsistent problem dimensions: n={n}, A={}x{}, b={}, bounds={}/{}",
            a.nrows(),
            a.ncols(),
            b.len(),
            lo.len(),
            hi.len()
        )));
    }
    for j in 0..n {
        if lo[j].is_nan() || hi[j].is_nan() || lo[j] > hi[j] {
            return Err(crate::Error::Parameter(format!(
                "invalid bounds [{}, {}] on variable {j}",
                lo[j], hi[j]
            )));
        }
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(crate::Error::Parameter("non-finite constraint data".into()));
    }
    Ok(())
}
