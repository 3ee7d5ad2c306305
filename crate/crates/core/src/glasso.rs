//! Single-condition graphical lasso by block coordinate descent on the
//! covariance estimate (Friedman, Hastie & Tibshirani).
//!
//! Maximizes `log det Θ − tr(ΣΘ) − λ Σ_{i≠j} |θ_ij|` with an unpenalized
//! diagonal. It shares no code with the ADMM solver and serves as the
//! independent reference for its `λ2 = 0` behaviour.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GlassoFit {
    pub precision: DMatrix<f64>,
    pub covariance: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `lambda` weighs each ordered off-diagonal pair, matching the joint solver's
/// `λ1` at `λ2 = 0`.
pub fn graphical_lasso(sigma: &DMatrix<f64>, lambda: f64, tol: f64, max_iters: usize) -> Result<GlassoFit> {
    let p = sigma.nrows();
    if !sigma.is_square() {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: sigma.ncols(),
        });
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    // stationarity: |w_ij - s_ij| <= λ off the diagonal
    let threshold = lambda;
    let mut w = sigma.clone();
    let mut beta = DMatrix::<f64>::zeros(p.saturating_sub(1), p);
    let mean_abs_offdiag = {
        let total: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| sigma[(i, j)].abs())
            .sum();
        let count = (p * p.saturating_sub(1)).max(1) as f64;
        (total / count).max(1e-12)
    };

    let mut converged = false;
    let mut iterations = 0;
    for sweep in 1..=max_iters {
        iterations = sweep;
        let w_old = w.clone();
        for j in 0..p {
            let others: Vec<usize> = (0..p).filter(|&i| i != j).collect();
            let w11 = w.select_rows(others.iter()).select_columns(others.iter());
            let s12 = DVector::from_iterator(others.len(), others.iter().map(|&i| sigma[(i, j)]));
            let mut b: DVector<f64> = beta.column(j).into_owned();
            lasso_cd(&w11, &s12, threshold, &mut b, tol * 1e-2, 10_000);
            beta.set_column(j, &b);
            let w12 = &w11 * &b;
            for (idx, &i) in others.iter().enumerate() {
                w[(i, j)] = w12[idx];
                w[(j, i)] = w12[idx];
            }
        }
        let change: f64 = (&w - &w_old).abs().sum() / (p * p) as f64;
        if change < tol * mean_abs_offdiag {
            converged = true;
            break;
        }
    }

    let mut precision = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        let others: Vec<usize> = (0..p).filter(|&i| i != j).collect();
        let b = beta.column(j);
        let w12 = DVector::from_iterator(others.len(), others.iter().map(|&i| w[(i, j)]));
        let theta_jj = 1.0 / (w[(j, j)] - w12.dot(&b));
        precision[(j, j)] = theta_jj;
        for (idx, &i) in others.iter().enumerate() {
            precision[(i, j)] = -b[idx] * theta_jj;
        }
    }
    // The column solves are not exactly symmetric; keep the support of
    // either side and average the values.
    for i in 0..p {
        for j in (i + 1)..p {
            let (a, b) = (precision[(i, j)], precision[(j, i)]);
            let v = if a == 0.0 || b == 0.0 { a + b } else { 0.5 * (a + b) };
            precision[(i, j)] = v;
            precision[(j, i)] = v;
        }
    }
    Ok(GlassoFit {
        precision,
        covariance: w,
        iterations,
        converged,
    })
}

/// Coordinate descent for `min ½ bᵀ W b − sᵀ b + t‖b‖₁`, warm-started at `b`.
fn lasso_cd(w: &DMatrix<f64>, s: &DVector<f64>, t: f64, b: &mut DVector<f64>, tol: f64, max_iters: usize) {
    let m = s.len();
    for _ in 0..max_iters {
        let mut max_delta = 0.0f64;
        for j in 0..m {
            let mut r = s[j];
            for k in 0..m {
                if k != j {
                    r -= w[(k, j)] * b[k];
                }
            }
            let new = r.signum() * (r.abs() - t).max(0.0) / w[(j, j)];
            max_delta = max_delta.max((new - b[j]).abs());
            b[j] = new;
        }
        if max_delta < tol {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_penalty_inverts_covariance() {
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 1.0]);
        let fit = graphical_lasso(&s, 0.0, 1e-10, 1000).unwrap();
        let inv = s.try_inverse().unwrap();
        assert!((fit.precision - inv).abs().max() < 1e-6);
    }

    #[test]
    fn large_penalty_gives_diagonal() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]);
        // |s_12| = 0.4 <= λ
        let fit = graphical_lasso(&s, 0.5, 1e-10, 100).unwrap();
        assert_eq!(fit.precision[(0, 1)], 0.0);
        assert!((fit.precision[(0, 0)] - 1.0).abs() < 1e-12);
    }
}
