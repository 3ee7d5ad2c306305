//! Generalized correlation estimates for one condition.
//!
//! The default estimator is Kendall's tau-b mapped through `sin(π/2 · τ)`,
//! which estimates the latent Pearson correlation of a transelliptical
//! distribution. The raw sine-transformed matrix need not be positive
//! semidefinite, so every estimate is repaired with [`ensure_psd`].

use std::cmp::Ordering;

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_PSD_FLOOR: f64 = 1e-8;

/// Observations for one condition: rows are samples, columns are variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    values: DMatrix<f64>,
    variable_names: Vec<String>,
    condition_label: String,
}

impl SampleMatrix {
    pub fn new(
        values: DMatrix<f64>,
        variable_names: Vec<String>,
        condition_label: impl Into<String>,
    ) -> Result<Self> {
        let (n, p) = values.shape();
        if n < 2 {
            return Err(Error::TooSmall {
                what: "observations",
                min: 2,
                got: n,
            });
        }
        if p < 2 {
            return Err(Error::TooSmall {
                what: "variables",
                min: 2,
                got: p,
            });
        }
        if variable_names.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: variable_names.len(),
            });
        }
        for row in 0..n {
            for col in 0..p {
                if !values[(row, col)].is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        Ok(SampleMatrix {
            values,
            variable_names,
            condition_label: condition_label.into(),
        })
    }

    /// Builds a matrix with generated names `V0..Vp`.
    pub fn with_default_names(values: DMatrix<f64>, condition_label: impl Into<String>) -> Result<Self> {
        let names = default_names(values.ncols());
        Self::new(values, names, condition_label)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    pub fn condition_label(&self) -> &str {
        &self.condition_label
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_variables(&self) -> usize {
        self.values.ncols()
    }

    /// New matrix made of the given rows (repeats allowed), same names and label.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let values = self.values.select_rows(rows.iter());
        Self::new(values, self.variable_names.clone(), self.condition_label.clone())
    }
}

pub fn default_names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("V{i}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    #[default]
    KendallSine,
    Pearson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub values: DMatrix<f64>,
    pub estimator_kind: EstimatorKind,
    /// Number of observations the estimate was computed from.
    pub n_samples: usize,
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }
}

fn cmp_finite(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).expect("finite values")
}

/// Kendall's tau-b between two equally long vectors.
///
/// Ties are corrected for; a constant vector yields 0.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooSmall {
            what: "observations",
            min: 2,
            got: x.len(),
        });
    }
    if let Some(i) = x.iter().chain(y).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: i % x.len(),
            col: i / x.len(),
        });
    }
    let rx = dense_ranks(x);
    let ry = dense_ranks(y);
    Ok(RankedColumn::new(rx).tau_b(&RankedColumn::new(ry)))
}

/// Dense ranks (0-based, ties share a rank).
fn dense_ranks(v: &[f64]) -> Vec<u32> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| cmp_finite(v[a], v[b]));
    let mut ranks = vec![0u32; v.len()];
    let mut rank = 0u32;
    for w in 0..order.len() {
        if w > 0 && cmp_finite(v[order[w - 1]], v[order[w]]) != Ordering::Equal {
            rank += 1;
        }
        ranks[order[w]] = rank;
    }
    ranks
}

/// A column reduced to dense ranks plus its count of tied pairs.
struct RankedColumn {
    ranks: Vec<u32>,
    tied_pairs: u64,
}

impl RankedColumn {
    fn new(ranks: Vec<u32>) -> Self {
        let mut counts = vec![0u64; ranks.len()];
        for &r in &ranks {
            counts[r as usize] += 1;
        }
        let tied_pairs = counts.iter().map(|&t| t * t.saturating_sub(1) / 2).sum();
        RankedColumn { ranks, tied_pairs }
    }

    fn is_constant(&self) -> bool {
        self.ranks.iter().all(|&r| r == 0)
    }

    /// Knight's O(n log n) tau-b.
    fn tau_b(&self, other: &RankedColumn) -> f64 {
        let n = self.ranks.len() as u64;
        let total = n * (n - 1) / 2;
        let mut keys: Vec<u64> = self
            .ranks
            .iter()
            .zip(&other.ranks)
            .map(|(&a, &b)| ((a as u64) << 32) | b as u64)
            .collect();
        keys.sort_unstable();

        let mut joint_ties = 0u64;
        let mut run = 1u64;
        for w in 1..keys.len() {
            if keys[w] == keys[w - 1] {
                run += 1;
            } else {
                joint_ties += run * (run - 1) / 2;
                run = 1;
            }
        }
        joint_ties += run * (run - 1) / 2;

        let mut seq: Vec<u32> = keys.iter().map(|k| (k & 0xffff_ffff) as u32).collect();
        let mut buf = vec![0u32; seq.len()];
        let swaps = count_inversions(&mut seq, &mut buf);

        let numerator = total as i64 - self.tied_pairs as i64 - other.tied_pairs as i64
            + joint_ties as i64
            - 2 * swaps as i64;
        tau_b_from_counts(numerator, total, self.tied_pairs, other.tied_pairs)
    }
}

/// `(C - D) / sqrt((n0 - tx)(n0 - ty))`, 0 when either side is constant.
fn tau_b_from_counts(concordant_minus_discordant: i64, total: u64, tx: u64, ty: u64) -> f64 {
    let denom = (total - tx) * (total - ty);
    if denom == 0 {
        return 0.0;
    }
    concordant_minus_discordant as f64 / (denom as f64).sqrt()
}

/// Stable merge sort counting strict inversions.
fn count_inversions(seq: &mut [u32], buf: &mut [u32]) -> u64 {
    let n = seq.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = seq.split_at_mut(mid);
        let (lb, rb) = buf.split_at_mut(mid);
        count_inversions(left, lb) + count_inversions(right, rb)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if seq[j] < seq[i] {
            buf[k] = seq[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = seq[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + (mid - i)].copy_from_slice(&seq[i..mid]);
    k += mid - i;
    buf[k..k + (n - j)].copy_from_slice(&seq[j..n]);
    seq.copy_from_slice(&buf[..n]);
    swaps
}

/// Estimates the p×p correlation matrix of one condition.
///
/// Constant columns are reported with a warning and get an identity row and
/// column. The result is passed through [`ensure_psd`] (plus a shrink toward
/// the identity for the Kendall estimator, so the diagonal stays exactly 1).
pub fn estimate_correlation(data: &SampleMatrix, kind: EstimatorKind) -> Result<CorrelationMatrix> {
    estimate_correlation_with_floor(data, kind, DEFAULT_PSD_FLOOR)
}

pub fn estimate_correlation_with_floor(
    data: &SampleMatrix,
    kind: EstimatorKind,
    floor: f64,
) -> Result<CorrelationMatrix> {
    let raw = match kind {
        EstimatorKind::KendallSine => kendall_sine_matrix(data),
        EstimatorKind::Pearson => pearson_matrix(data),
    };
    let mut values = ensure_psd(&raw, floor)?;
    if values != raw {
        values = restore_unit_diagonal(values, floor)?;
    }
    Ok(CorrelationMatrix {
        values,
        estimator_kind: kind,
        n_samples: data.n_samples(),
    })
}

fn warn_constant(data: &SampleMatrix, col: usize) {
    warn!(
        "condition `{}`: variable `{}` is constant; treating it as uncorrelated",
        data.condition_label(),
        data.variable_names()[col]
    );
}

fn kendall_sine_matrix(data: &SampleMatrix) -> DMatrix<f64> {
    let p = data.n_variables();
    let columns: Vec<RankedColumn> = (0..p)
        .map(|j| {
            let col: Vec<f64> = data.values().column(j).iter().copied().collect();
            RankedColumn::new(dense_ranks(&col))
        })
        .collect();
    for (j, c) in columns.iter().enumerate() {
        if c.is_constant() {
            warn_constant(data, j);
        }
    }
    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
        .collect();
    let taus: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| columns[i].tau_b(&columns[j]))
        .collect();
    let mut out = DMatrix::identity(p, p);
    for (&(i, j), tau) in pairs.iter().zip(taus) {
        let v = (std::f64::consts::FRAC_PI_2 * tau).sin();
        out[(i, j)] = v;
        out[(j, i)] = v;
    }
    out
}

fn pearson_matrix(data: &SampleMatrix) -> DMatrix<f64> {
    let x = data.values();
    let (n, p) = x.shape();
    let means = x.row_mean();
    let mut centered = x.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let sd: Vec<f64> = (0..p).map(|j| cov[(j, j)].sqrt()).collect();
    let mut out = DMatrix::identity(p, p);
    for (j, s) in sd.iter().enumerate() {
        if *s == 0.0 {
            warn_constant(data, j);
        }
    }
    for i in 0..p {
        for j in (i + 1)..p {
            let v = if sd[i] > 0.0 && sd[j] > 0.0 {
                (cov[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Clips eigenvalues below `floor` up to `floor`.
///
/// Matrices whose spectrum already clears the floor are returned unchanged.
pub fn ensure_psd(m: &DMatrix<f64>, floor: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    if !(floor > 0.0) {
        return Err(Error::InvalidParameter(format!("psd floor must be positive, got {floor}")));
    }
    let eig = linalg::eigen(m)?;
    if eig.eigenvalues.iter().all(|&v| v >= floor) {
        return Ok(m.clone());
    }
    Ok(linalg::reconstruct(
        &eig.eigenvectors,
        eig.eigenvalues.iter().map(|&v| v.max(floor)),
    ))
}

/// Rescales a repaired correlation matrix back to unit diagonal, then mixes in
/// just enough identity to keep the minimum eigenvalue at `floor`.
fn restore_unit_diagonal(m: DMatrix<f64>, floor: f64) -> Result<DMatrix<f64>> {
    let p = m.nrows();
    let scale: Vec<f64> = (0..p).map(|i| 1.0 / m[(i, i)].sqrt()).collect();
    let mut r = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            m[(i, j)] * scale[i] * scale[j]
        }
    });
    linalg::symmetrize(&mut r);
    let lowest = linalg::min_eigenvalue(&r)?;
    if lowest < floor {
        // (1 - t) * lowest + t = floor, with a hair of slack for rounding
        let t = ((floor - lowest) / (1.0 - lowest) * (1.0 + 1e-9)).min(1.0);
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    r[(i, j)] *= 1.0 - t;
                }
            }
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force pair enumeration.
    fn tau_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0u64, 0u64);
        for i in 0..n {
            for j in (i + 1)..n {
                let sx = (x[i] - x[j]).signum() * (x[i] != x[j]) as i32 as f64;
                let sy = (y[i] - y[j]).signum() * (y[i] != y[j]) as i32 as f64;
                if sx == 0.0 {
                    tx += 1;
                }
                if sy == 0.0 {
                    ty += 1;
                }
                let s = sx * sy;
                if s > 0.0 {
                    c += 1;
                } else if s < 0.0 {
                    d += 1;
                }
            }
        }
        let n0 = (n * (n - 1) / 2) as u64;
        let denom = (n0 - tx) * (n0 - ty);
        if denom == 0 {
            0.0
        } else {
            (c - d) as f64 / (denom as f64).sqrt()
        }
    }

    #[test]
    fn tau_examples() {
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        // 6 pairs: 5 concordant, 1 discordant
        let t = kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((t - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn tau_errors_and_constant() {
        assert!(matches!(
            kendall_tau(&[1.0, 2.0], &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(kendall_tau(&[1.0], &[1.0]), Err(Error::TooSmall { .. })));
        assert!(kendall_tau(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
        assert_eq!(kendall_tau(&[2.0, 2.0, 2.0], &[1.0, 5.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn signed_zero_counts_as_tie() {
        let t = kendall_tau(&[0.0, -0.0, 1.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t, tau_oracle(&[0.0, 0.0, 1.0], &[1.0, 2.0, 3.0]));
    }

    fn tied_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0i32..6, n).prop_map(|v| v.into_iter().map(f64::from).collect())
    }

    proptest! {
        #[test]
        fn tau_matches_oracle_with_ties((x, y) in (2usize..60).prop_flat_map(|n| (tied_vec(n), tied_vec(n)))) {
            prop_assert_eq!(kendall_tau(&x, &y).unwrap(), tau_oracle(&x, &y));
        }

        #[test]
        fn tau_symmetric(x in prop::collection::vec(-5.0f64..5.0, 30), y in prop::collection::vec(-5.0f64..5.0, 30)) {
            prop_assert_eq!(kendall_tau(&x, &y).unwrap(), kendall_tau(&y, &x).unwrap());
        }

        #[test]
        fn tau_invariant_under_monotone_map(
            x in prop::collection::vec(-3.0f64..3.0, 40),
            y in prop::collection::vec(-3.0f64..3.0, 40),
            a in 0.1f64..4.0,
            b in -2.0f64..2.0,
        ) {
            let fx: Vec<f64> = x.iter().map(|v| (a * v + b).exp() + v.powi(3)).collect();
            prop_assert_eq!(kendall_tau(&fx, &y).unwrap(), kendall_tau(&x, &y).unwrap());
        }
    }

    #[test]
    fn sine_transform_values() {
        // x = (1,2,3,4), y = (1,3,2,4) has tau = 2/3, so the entry is sin(pi/3)
        let data = DMatrix::from_column_slice(4, 2, &[1.0, 2.0, 3.0, 4.0, 1.0, 3.0, 2.0, 4.0]);
        let s = SampleMatrix::with_default_names(data, "a").unwrap();
        let c = estimate_correlation(&s, EstimatorKind::KendallSine).unwrap();
        assert!((c.values[(0, 1)] - 0.866_025_403_784_438_6).abs() < 1e-12);
        assert_eq!(c.values[(0, 0)], 1.0);

        let same = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        let s = SampleMatrix::with_default_names(same, "a").unwrap();
        let c = estimate_correlation(&s, EstimatorKind::KendallSine).unwrap();
        // tau = 1 gives a singular matrix; repair keeps it near 1
        assert!(c.values[(0, 1)] > 0.999_999);
        assert!(linalg::min_eigenvalue(&c.values).unwrap() >= DEFAULT_PSD_FLOOR * (1.0 - 1e-6));
    }

    #[test]
    fn constant_column_gives_identity_pattern() {
        let data = DMatrix::from_column_slice(
            4,
            3,
            &[1.0, 2.0, 3.0, 4.0, 7.0, 7.0, 7.0, 7.0, 2.0, 1.0, 4.0, 3.0],
        );
        let s = SampleMatrix::with_default_names(data, "a").unwrap();
        for kind in [EstimatorKind::KendallSine, EstimatorKind::Pearson] {
            let c = estimate_correlation(&s, kind).unwrap();
            assert_eq!(c.values[(1, 0)], 0.0);
            assert_eq!(c.values[(1, 2)], 0.0);
            assert_eq!(c.values[(1, 1)], 1.0);
        }
    }

    #[test]
    fn pearson_matches_direct_formula() {
        let data = DMatrix::from_column_slice(5, 2, &[1.0, 2.0, 4.0, 3.0, 6.0, 2.0, 1.0, 5.0, 4.0, 4.0]);
        let s = SampleMatrix::with_default_names(data.clone(), "a").unwrap();
        let c = estimate_correlation(&s, EstimatorKind::Pearson).unwrap();
        let x: Vec<f64> = data.column(0).iter().copied().collect();
        let y: Vec<f64> = data.column(1).iter().copied().collect();
        let mx = x.iter().sum::<f64>() / 5.0;
        let my = y.iter().sum::<f64>() / 5.0;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        assert!((c.values[(0, 1)] - sxy / (sxx * syy).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ensure_psd_examples() {
        let eye = DMatrix::<f64>::identity(3, 3);
        assert_eq!(ensure_psd(&eye, 1e-8).unwrap(), eye);

        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -0.5]));
        let r = ensure_psd(&m, 1e-8).unwrap();
        assert!((r[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((r[(1, 1)] - 1e-8).abs() < 1e-15);
        assert_eq!(r[(0, 1)], 0.0);

        assert!(ensure_psd(&DMatrix::from_element(2, 2, f64::NAN), 1e-8).is_err());
    }

    #[test]
    fn ensure_psd_random_indefinite() {
        // eigenvalues (2, 1, 0.5, -0.7) in a rotated basis
        let q = DMatrix::from_row_slice(4, 4, &[
            0.5, 0.5, 0.5, 0.5, 0.5, -0.5, 0.5, -0.5, 0.5, 0.5, -0.5, -0.5, 0.5, -0.5, -0.5, 0.5,
        ]);
        let d = nalgebra::DVector::from_vec(vec![2.0, 1.0, 0.5, -0.7]);
        let m = &q * DMatrix::from_diagonal(&d) * q.transpose();
        let r = ensure_psd(&m, 1e-8).unwrap();
        // independent check: characteristic-polynomial-free test via Cholesky of r - (floor/2) I
        let shifted = &r - DMatrix::<f64>::identity(4, 4) * 0.5e-8;
        assert!(shifted.cholesky().is_some());
        assert!(linalg::min_eigenvalue(&r).unwrap() >= 1e-8 - 1e-12);
    }

    #[test]
    fn sample_matrix_validation() {
        let bad = DMatrix::from_column_slice(2, 2, &[1.0, f64::INFINITY, 0.0, 1.0]);
        assert!(matches!(
            SampleMatrix::with_default_names(bad, "a"),
            Err(Error::NonFinite { row: 1, col: 0 })
        ));
        let thin = DMatrix::from_column_slice(1, 2, &[1.0, 2.0]);
        assert!(SampleMatrix::with_default_names(thin, "a").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn kendall_estimate_is_symmetric_unit_diag_and_pd(
            vals in prop::collection::vec(-3.0f64..3.0, 12 * 6),
        ) {
            let data = DMatrix::from_column_slice(12, 6, &vals);
            let s = SampleMatrix::with_default_names(data, "a").unwrap();
            let c = estimate_correlation(&s, EstimatorKind::KendallSine).unwrap();
            for i in 0..6 {
                prop_assert_eq!(c.values[(i, i)], 1.0);
                for j in 0..6 {
                    prop_assert_eq!(c.values[(i, j)], c.values[(j, i)]);
                }
            }
            prop_assert!(linalg::min_eigenvalue(&c.values).unwrap() >= DEFAULT_PSD_FLOOR * (1.0 - 1e-6));
        }
    }
}
