use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{solve_lp, LinearProgram, QuadraticProgram, SolverSolution, SolverStatus, Tolerances};

#[derive(Debug, Clone, Default)]
pub struct QpOptions {
    pub tolerances: Tolerances,
    /// Defaults to `100 * n`.
    pub max_iterations: Option<usize>,
    /// Starting point. Used only if it satisfies every constraint; otherwise a
    /// feasible vertex is found with the simplex method.
    pub initial: Option<DVector<f64>>,
}

pub fn solve_qp(problem: &QuadraticProgram) -> SolverSolution {
    solve_qp_with(problem, &QpOptions::default())
}

/// Primal active-set method over bound constraints.
///
/// The working set holds variables fixed at one of their bounds. Each
/// iteration minimizes the objective over the free variables on the null
/// space of the equality rows; zero-curvature directions with a nonzero
/// gradient component are followed as rays until a bound blocks them.
pub fn solve_qp_with(problem: &QuadraticProgram, opts: &QpOptions) -> SolverSolution {
    let n = problem.n_vars();
    let tol = opts.tolerances;
    let cap = opts.max_iterations.unwrap_or(100 * n.max(1));
    let lo = &problem.lower;
    let hi = &problem.upper;

    let rows = independent_rows(&problem.eq_matrix);
    let a = problem.eq_matrix.select_rows(&rows);
    let b = problem.eq_rhs.select_rows(&rows);

    let Some(mut x) = starting_point(problem, &a, &b, opts) else {
        return SolverSolution::failed(n, SolverStatus::Infeasible, 0);
    };

    let qscale = problem.hessian.amax();
    let gscale = (qscale * x.amax().max(1.0))
        .max(problem.linear.amax())
        .max(f64::MIN_POSITIVE);
    let gtol = tol.stationarity * gscale;
    let curvature_tol = 1e-10 * qscale;
    let bound_tol = 1e-12;

    // working[j] = Some(true) at upper bound, Some(false) at lower bound
    let mut working: Vec<Option<bool>> = vec![None; n];
    for j in 0..n {
        if lo[j] == hi[j] || (x[j] - lo[j]).abs() <= bound_tol {
            working[j] = Some(false);
            x[j] = lo[j];
        } else if (hi[j] - x[j]).abs() <= bound_tol {
            working[j] = Some(true);
            x[j] = hi[j];
        }
    }
    restore_rank(&a, &mut working, lo, hi);

    let mut iterations = 0;
    loop {
        if iterations >= cap {
            return SolverSolution::failed(n, SolverStatus::MaxIterations, iterations);
        }
        iterations += 1;

        let g = &problem.hessian * &x + &problem.linear;
        let free: Vec<usize> = (0..n).filter(|&j| working[j].is_none()).collect();

        let step = if free.is_empty() {
            Step::Stationary
        } else {
            subspace_step(problem, &a, &free, &g, curvature_tol, gtol)
        };

        match step {
            Step::Stationary => {
                let nu = equality_multipliers(&a, &free, &g);
                let at = a.transpose();
                let mut release = None;
                let mut worst = gtol;
                for j in 0..n {
                    let Some(upper) = working[j] else { continue };
                    if lo[j] == hi[j] {
                        continue;
                    }
                    let mu = g[j] - at.row(j).dot(&nu.transpose());
                    let violation = if upper { mu } else { -mu };
                    if violation > worst {
                        worst = violation;
                        release = Some(j);
                    }
                }
                match release {
                    Some(j) => working[j] = None,
                    None => {
                        let mut duals = DVector::zeros(problem.eq_rhs.len());
                        for (k, &r) in rows.iter().enumerate() {
                            duals[r] = nu[k];
                        }
                        return SolverSolution {
                            objective_value: problem.objective(&x),
                            x,
                            status: SolverStatus::Optimal,
                            duals,
                            iterations,
                        };
                    }
                }
            }
            Step::Move { direction, ray } => {
                let mut alpha = if ray { f64::INFINITY } else { 1.0 };
                let mut blocking = None;
                for (k, &j) in free.iter().enumerate() {
                    let p = direction[k];
                    let limit = if p < 0.0 && lo[j].is_finite() {
                        ((x[j] - lo[j]) / -p).max(0.0)
                    } else if p > 0.0 && hi[j].is_finite() {
                        ((hi[j] - x[j]) / p).max(0.0)
                    } else {
                        continue;
                    };
                    if limit < alpha {
                        alpha = limit;
                        blocking = Some((j, p > 0.0));
                    }
                }
                if !alpha.is_finite() {
                    return SolverSolution::failed(n, SolverStatus::Unbounded, iterations);
                }
                for (k, &j) in free.iter().enumerate() {
                    x[j] += alpha * direction[k];
                }
                if let Some((j, upper)) = blocking {
                    working[j] = Some(upper);
                    x[j] = if upper { hi[j] } else { lo[j] };
                }
            }
        }
    }
}

enum Step {
    Stationary,
    Move { direction: DVector<f64>, ray: bool },
}

fn subspace_step(
    problem: &QuadraticProgram,
    a: &DMatrix<f64>,
    free: &[usize],
    g: &DVector<f64>,
    curvature_tol: f64,
    gtol: f64,
) -> Step {
    let af = a.select_columns(free);
    let gf = g.select_rows(free);
    let z = null_space(&af);
    if z.ncols() == 0 {
        return Step::Stationary;
    }
    let qf = problem.hessian.select_rows(free).select_columns(free);
    let h = z.transpose() * &qf * &z;
    let h = (&h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(h);
    let gz = z.transpose() * &gf;
    let coeffs = eig.eigenvectors.transpose() * &gz;

    let mut ray = DVector::<f64>::zeros(z.ncols());
    let mut newton = DVector::<f64>::zeros(z.ncols());
    let mut has_ray = false;
    for k in 0..z.ncols() {
        let lambda = eig.eigenvalues[k];
        let v = eig.eigenvectors.column(k);
        if lambda <= curvature_tol {
            if coeffs[k].abs() > gtol {
                ray -= v * coeffs[k];
                has_ray = true;
            }
        } else {
            newton -= v * (coeffs[k] / lambda);
        }
    }
    if has_ray {
        let d = flush_noise(&z * ray);
        let scale = d.amax();
        return Step::Move {
            direction: d / scale,
            ray: true,
        };
    }
    let d = flush_noise(&z * newton);
    if d.amax() <= 1e-13 {
        Step::Stationary
    } else {
        Step::Move {
            direction: d,
            ray: false,
        }
    }
}

/// Zeroes components at round-off level relative to the largest one. A
/// variable pinned by the equality rows would otherwise pick up a tiny
/// component from the null-space basis and block the step at length zero.
fn flush_noise(mut d: DVector<f64>) -> DVector<f64> {
    let cut = 1e-12 * d.amax();
    for v in d.iter_mut() {
        if v.abs() <= cut {
            *v = 0.0;
        }
    }
    d
}

/// Orthonormal basis of `{p : A p = 0}` for a full-row-rank `A`.
fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, k) = a.shape();
    if m == 0 {
        return DMatrix::identity(k, k);
    }
    if m >= k {
        return DMatrix::zeros(k, 0);
    }
    let gram = a.transpose() * a;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let cols: Vec<usize> = order.into_iter().take(k - m).collect();
    eig.eigenvectors.select_columns(&cols)
}

fn equality_multipliers(a: &DMatrix<f64>, free: &[usize], g: &DVector<f64>) -> DVector<f64> {
    let m = a.nrows();
    if m == 0 {
        return DVector::zeros(0);
    }
    let af = a.select_columns(free);
    let gf = g.select_rows(free);
    let normal = &af * af.transpose();
    let rhs = &af * gf;
    normal.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(m))
}

/// Greedy selection of linearly independent rows (modified Gram-Schmidt).
fn independent_rows(a: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut keep = Vec::new();
    for i in 0..a.nrows() {
        let mut v: DVector<f64> = a.row(i).transpose();
        let norm0 = v.norm();
        if norm0 == 0.0 {
            continue;
        }
        for q in &basis {
            let c = q.dot(&v);
            v -= q * c;
        }
        let norm = v.norm();
        if norm > 1e-10 * norm0 {
            basis.push(v / norm);
            keep.push(i);
        }
    }
    keep
}

fn rank(a: &DMatrix<f64>) -> usize {
    independent_rows(&a.transpose()).len()
}

/// Frees working-set variables until the free columns of `A` have full row
/// rank, so the working set stays linearly independent.
fn restore_rank(
    a: &DMatrix<f64>,
    working: &mut [Option<bool>],
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) {
    let m = a.nrows();
    let free_cols =
        |w: &[Option<bool>]| -> Vec<usize> { (0..w.len()).filter(|&j| w[j].is_none()).collect() };
    let mut current = rank(&a.select_columns(&free_cols(working)));
    if current == m {
        return;
    }
    let candidates: Vec<usize> = (0..working.len())
        .filter(|&j| working[j].is_some() && lo[j] != hi[j])
        .collect();
    for j in candidates {
        let saved = working[j];
        working[j] = None;
        let r = rank(&a.select_columns(&free_cols(working)));
        if r > current {
            current = r;
            if current == m {
                return;
            }
        } else {
            working[j] = saved;
        }
    }
}

fn starting_point(
    problem: &QuadraticProgram,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    opts: &QpOptions,
) -> Option<DVector<f64>> {
    let n = problem.n_vars();
    if let Some(x0) = &opts.initial {
        if x0.len() == n {
            let inside = (0..n).all(|j| x0[j] >= problem.lower[j] && x0[j] <= problem.upper[j]);
            let residual = if a.nrows() == 0 {
                0.0
            } else {
                (a * x0 - b).amax()
            };
            if inside && residual <= 1e-12 * b.amax().max(1.0) {
                return Some(x0.clone());
            }
        }
    }
    let lp = LinearProgram {
        objective: DVector::zeros(n),
        eq_matrix: a.clone(),
        eq_rhs: b.clone(),
        lower: problem.lower.clone(),
        upper: problem.upper.clone(),
    };
    let s = solve_lp(&lp);
    if !s.is_optimal() {
        return None;
    }
    let mut x = s.x;
    for j in 0..n {
        x[j] = x[j].clamp(problem.lower[j], problem.upper[j]);
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const INF: f64 = f64::INFINITY;

    fn qp(q: &[f64], c: &[f64], a: &[f64], b: &[f64], lo: &[f64], hi: &[f64]) -> QuadraticProgram {
        let n = c.len();
        let m = b.len();
        QuadraticProgram::new(
            DMatrix::from_row_slice(n, n, q),
            DVector::from_column_slice(c),
            DMatrix::from_row_slice(m, n, a),
            DVector::from_column_slice(b),
            DVector::from_column_slice(lo),
            DVector::from_column_slice(hi),
        )
        .unwrap()
    }

    #[test]
    fn symmetric_split() {
        let p = qp(
            &[1.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0],
            &[1.0, 1.0],
            &[1.0],
            &[-INF; 2],
            &[INF; 2],
        );
        let s = solve_qp(&p);
        assert_eq!(s.status, SolverStatus::Optimal);
        assert_abs_diff_eq!(s.x[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn clamped_by_upper_bound() {
        let p = qp(
            &[1.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0],
            &[1.0, 1.0],
            &[1.0],
            &[-INF; 2],
            &[0.2, INF],
        );
        let s = solve_qp(&p);
        assert_eq!(s.status, SolverStatus::Optimal);
        assert_abs_diff_eq!(s.x[0], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 0.8, epsilon = 1e-12);
    }

    #[test]
    fn inverse_variance_weights() {
        let p = qp(
            &[1.0, 0.0, 0.0, 4.0],
            &[0.0, 0.0],
            &[1.0, 1.0],
            &[1.0],
            &[-INF; 2],
            &[INF; 2],
        );
        let s = solve_qp(&p);
        assert_abs_diff_eq!(s.x[0], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_bounds() {
        let p = qp(
            &[1.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0],
            &[1.0, 1.0],
            &[3.0],
            &[0.0; 2],
            &[1.0; 2],
        );
        assert_eq!(solve_qp(&p).status, SolverStatus::Infeasible);
    }

    #[test]
    fn linear_objective_follows_ray_to_vertex() {
        // zero Hessian: minimize -x0 on the simplex
        let p = qp(
            &[0.0; 4],
            &[-1.0, 0.0],
            &[1.0, 1.0],
            &[1.0],
            &[0.0; 2],
            &[INF; 2],
        );
        let s = solve_qp(&p);
        assert_eq!(s.status, SolverStatus::Optimal);
        assert_abs_diff_eq!(s.x[0], 1.0, epsilon = 1e-12);
        let p = qp(
            &[0.0; 4],
            &[-1.0, 0.0],
            &[1.0, 1.0],
            &[1.0],
            &[-INF; 2],
            &[INF; 2],
        );
        assert_eq!(solve_qp(&p).status, SolverStatus::Unbounded);
    }

    #[test]
    fn singular_split_hessian() {
        // w = u - v with Q = [[1,-1],[-1,1]] and budget u - v = 1, v <= 0.3
        let p = qp(
            &[1.0, -1.0, -1.0, 1.0],
            &[0.0, 0.0],
            &[1.0, -1.0],
            &[1.0],
            &[0.0, 0.0],
            &[1.3, 0.3],
        );
        let s = solve_qp(&p);
        assert_eq!(s.status, SolverStatus::Optimal);
        assert_abs_diff_eq!(s.x[0] - s.x[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.objective_value, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn iteration_cap() {
        let eye = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let p = qp(&eye, &[0.0; 3], &[1.0; 3], &[1.0], &[0.0; 3], &[INF; 3]);
        let s = solve_qp_with(
            &p,
            &QpOptions {
                max_iterations: Some(1),
                ..Default::default()
            },
        );
        assert_eq!(s.status, SolverStatus::MaxIterations);
    }

    #[test]
    fn warm_start_gives_same_answer() {
        let p = qp(
            &[2.0, 0.5, 0.5, 1.0],
            &[0.0, 0.0],
            &[1.0, 1.0],
            &[1.0],
            &[0.0; 2],
            &[1.0; 2],
        );
        let cold = solve_qp(&p);
        let warm = solve_qp_with(
            &p,
            &QpOptions {
                initial: Some(DVector::from_vec(vec![0.5, 0.5])),
                ..Default::default()
            },
        );
        assert_abs_diff_eq!(cold.x[0], warm.x[0], epsilon = 1e-12);
    }
}
