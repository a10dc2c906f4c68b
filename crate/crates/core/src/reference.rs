//! Ideal (zero wire resistance) results computed with dense linear algebra,
//! and the error metrics used against them.

use faer::{Mat, Side};

use crate::error::{check_dim, Error, Result};

/// `G^{-1} b` by dense LU with partial pivoting.
pub fn ideal_inverse(g: &Mat<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = g.nrows();
    check_dim("right-hand side", n, b.len())?;
    let lu = g.partial_piv_lu();
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let x = faer::linalg::solvers::Solve::solve(&lu, &rhs);
    let x: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { pivot: 0 });
    }
    Ok(x)
}

/// `G^T v`.
pub fn ideal_mvm(g: &Mat<f64>, v: &[f64]) -> Result<Vec<f64>> {
    let n = g.nrows();
    check_dim("input vector", n, v.len())?;
    Ok((0..g.ncols()).map(|j| (0..n).map(|i| g[(i, j)] * v[i]).sum()).collect())
}

fn is_symmetric(g: &Mat<f64>) -> bool {
    let n = g.nrows();
    let scale = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .fold(0.0f64, |m, (i, j)| m.max(g[(i, j)].abs()));
    (0..n).all(|i| (0..i).all(|j| (g[(i, j)] - g[(j, i)]).abs() <= 1e-14 * scale))
}

/// Dominant eigenpair `(lambda_max, x)` with `||x|| = 1` and the largest
/// entry of `x` positive. Symmetric inputs use a dense symmetric eigensolver;
/// others use power iteration.
pub fn dominant_eigen(g: &Mat<f64>) -> Result<(f64, Vec<f64>)> {
    let n = g.nrows();
    check_dim("matrix columns", n, g.ncols())?;
    if is_symmetric(g) {
        let evd = g
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Degenerate(format!("eigendecomposition failed: {e:?}")))?;
        let s = evd.S();
        let u = evd.U();
        let lambda = s[n - 1];
        let v: Vec<f64> = (0..n).map(|i| u[(i, n - 1)]).collect();
        return Ok((lambda, crate::egv::normalize_eigenvector(&v)?));
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let y: Vec<f64> = (0..n).map(|i| (0..n).map(|j| g[(i, j)] * x[j]).sum()).collect();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Degenerate("matrix annihilates the iterate".into()));
        }
        let next: Vec<f64> = y.iter().map(|v| v / norm).collect();
        let delta = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        lambda = next.iter().zip(&y).map(|(a, b)| a * b).sum();
        x = next;
        if delta < 1e-14 {
            break;
        }
    }
    Ok((lambda, crate::egv::normalize_eigenvector(&x)?))
}

/// `||x - x_ref|| / ||x_ref||` (Euclidean).
pub fn relative_error(x: &[f64], x_ref: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(x_ref).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den: f64 = x_ref.iter().map(|b| b * b).sum::<f64>().sqrt();
    num / den
}

/// Distance between directions: both vectors normalized, `x` sign-aligned to
/// `x_ref`, then `||x - x_ref||`.
pub fn eigenvector_error(x: &[f64], x_ref: &[f64]) -> f64 {
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nr = x_ref.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dot: f64 = x.iter().zip(x_ref).map(|(a, b)| a * b).sum();
    let s = if dot < 0.0 { -1.0 } else { 1.0 };
    x.iter()
        .zip(x_ref)
        .map(|(a, b)| (s * a / nx - b / nr).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_mvm() {
        let g = Mat::from_fn(2, 2, |i, j| [[2.0, 1.0], [1.0, 3.0]][i][j]);
        let x = ideal_inverse(&g, &[3.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        let g2 = Mat::from_fn(2, 2, |i, j| [[1.0, 2.0], [3.0, 4.0]][i][j]);
        assert_eq!(ideal_mvm(&g2, &[1.0, 1.0]).unwrap(), vec![4.0, 6.0]);
    }

    #[test]
    fn dominant_eigen_symmetric_and_general() {
        let g = Mat::from_fn(2, 2, |i, j| [[2.0, 1.0], [1.0, 2.0]][i][j]);
        let (l, v) = dominant_eigen(&g).unwrap();
        assert!((l - 3.0).abs() < 1e-13);
        assert!((v[0] - v[1]).abs() < 1e-13 && v[0] > 0.0);
        let h = Mat::from_fn(2, 2, |i, j| [[2.0, 1.0], [0.5, 2.0]][i][j]);
        let (l, v) = dominant_eigen(&h).unwrap();
        assert!((l - (2.0 + 0.5f64.sqrt())).abs() < 1e-12);
        assert!((v[0] / v[1] - 2.0f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn metrics() {
        assert_eq!(relative_error(&[1.0, 1.0], &[1.0, 1.0]), 0.0);
        assert!((relative_error(&[1.1, 0.0], &[1.0, 0.0]) - 0.1).abs() < 1e-15);
        assert!(eigenvector_error(&[-2.0, -2.0], &[1.0, 1.0]) < 1e-15);
    }
}
