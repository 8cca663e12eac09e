//! Sample moments used across the crate.

use nalgebra::{DMatrix, DVector};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `1/(n-1)` normalization.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

pub fn sample_std(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

/// Column means and `1/(T-1)` sample covariance of a `T x N` matrix.
pub fn mean_and_covariance(data: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let (t, n) = data.shape();
    let means = DVector::from_iterator(n, data.column_iter().map(|c| c.sum() / t as f64));
    let mut centered = data.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    let mut cov = centered.transpose() * &centered / (t as f64 - 1.0);
    // exact symmetry
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    (means, cov)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(p)
}
