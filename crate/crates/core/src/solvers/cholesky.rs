use nalgebra::{DMatrix, DVector};

use super::Tolerances;
use crate::{Error, Result};

/// Lower-triangular Cholesky factor `L` with `M = LLᵀ`, or `None` if `M` is
/// not numerically positive definite.
pub fn cholesky(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return None;
    }
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

fn substitute(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut y = b.clone();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// Solves `M x = b` for every right-hand side, with `M` symmetric positive
/// definite. If the factorization fails, a ridge of
/// `tol.ridge * trace(M) / n` is added to the diagonal once and the
/// factorization retried.
pub fn solve_spd_system(
    matrix: &DMatrix<f64>,
    rhs: &[DVector<f64>],
    tol: &Tolerances,
) -> Result<Vec<DVector<f64>>> {
    let n = matrix.nrows();
    if matrix.ncols() != n || n == 0 {
        return Err(Error::Parameter(format!(
            "expected a non-empty square matrix, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if let Some(b) = rhs.iter().find(|b| b.len() != n) {
        return Err(Error::Parameter(format!(
            "right-hand side has length {}, expected {n}",
            b.len()
        )));
    }
    let l = match cholesky(matrix) {
        Some(l) => l,
        None => {
            let ridge = tol.ridge * matrix.trace() / n as f64;
            if !(ridge > 0.0) {
                return Err(Error::SingularMatrix);
            }
            let mut bumped = matrix.clone();
            for i in 0..n {
                bumped[(i, i)] += ridge;
            }
            cholesky(&bumped).ok_or(Error::SingularMatrix)?
        }
    };
    Ok(rhs.iter().map(|b| substitute(&l, b)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn solve1(m: DMatrix<f64>, b: &[f64]) -> DVector<f64> {
        let rhs = DVector::from_column_slice(b);
        solve_spd_system(&m, &[rhs], &Tolerances::default())
            .unwrap()
            .remove(0)
    }

    #[test]
    fn identity_and_diagonal() {
        let x = solve1(DMatrix::identity(2, 2), &[3.0, 4.0]);
        assert_eq!(x.as_slice(), &[3.0, 4.0]);
        let x = solve1(
            DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0])),
            &[2.0, 4.0],
        );
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn two_by_two_elimination() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let x = solve1(m, &[3.0, 3.0]);
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn multiple_right_hand_sides() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let rhs = vec![
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0]),
        ];
        let xs = solve_spd_system(&m, &rhs, &Tolerances::default()).unwrap();
        let inv = m.clone().try_inverse().unwrap();
        for (k, x) in xs.iter().enumerate() {
            for i in 0..2 {
                assert_abs_diff_eq!(x[i], inv[(i, k)], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn hilbert_residual() {
        let n = 4;
        let m = DMatrix::from_fn(n, n, |i, j| 1.0 / (i + j + 1) as f64);
        let b = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5]);
        let x = solve_spd_system(&m, std::slice::from_ref(&b), &Tolerances::default())
            .unwrap()
            .remove(0);
        let r = (&m * &x - &b).amax();
        assert!(r <= 1e-7 * b.amax(), "residual {r}");
    }

    #[test]
    fn singular_after_ridge() {
        let m = DMatrix::<f64>::zeros(3, 3);
        let b = DVector::from_element(3, 1.0);
        assert!(matches!(
            solve_spd_system(&m, &[b], &Tolerances::default()),
            Err(Error::SingularMatrix)
        ));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = DVector::from_element(2, 1.0);
        assert!(solve_spd_system(&indefinite, &[b], &Tolerances::default()).is_err());
    }

    #[test]
    fn ridge_rescues_rank_deficient() {
        // rank-one covariance of two perfectly collinear assets
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(cholesky(&m).is_none());
        let b = DVector::from_element(2, 1.0);
        let x = solve_spd_system(&m, &[b], &Tolerances::default())
            .unwrap()
            .remove(0);
        assert!(x.iter().all(|v| v.is_finite()));
        assert_abs_diff_eq!(x[0], x[1], epsilon = 1e-6);
    }
}
