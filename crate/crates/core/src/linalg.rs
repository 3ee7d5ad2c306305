//! Small dense linear-algebra helpers shared by the estimators and solvers.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub fn is_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Averages `m` with its transpose in place so the result is exactly symmetric.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if !is_finite(m) {
        return Err(Error::InvalidParameter(
            "eigendecomposition of a matrix with non-finite entries".into(),
        ));
    }
    Ok(m.clone().symmetric_eigen())
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigen(m)?.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// `V diag(values) Vᵀ`, symmetrized.
pub fn reconstruct(vectors: &DMatrix<f64>, values: impl Iterator<Item = f64>) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (mut col, v) in scaled.column_iter_mut().zip(values) {
        col *= v;
    }
    let mut out = scaled * vectors.transpose();
    symmetrize(&mut out);
    out
}

/// `log det` of a positive-definite matrix via Cholesky.
pub fn log_det_pd(m: &DMatrix<f64>) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite {
            context: String::new(),
        })?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// `tr(A B)` for symmetric `A`, i.e. the sum of the elementwise product.
pub fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
