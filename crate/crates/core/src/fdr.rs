//! Permutation-split FDR estimate for data without ground truth.
//!
//! All conditions are pooled and re-split at random into groups of the
//! original sizes. The re-split groups share one distribution, so every
//! difference learned between them is a false discovery. The estimate is
//! `min(1, mean null discoveries / max(1, real discoveries))`.
//!
//! The estimate is known to be optimistic; treat it as a relative guide
//! across settings, not as the true FDR.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{CorrelationMatrix, EstimatorKind, SampleMatrix};
use crate::diffnet::{check_grid, count_differences, estimate_all, networks_from_solution, shared_variable_names};
use crate::error::{Error, Result};
use crate::jgl::{solve_jgl, PenaltyParams};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrEstimate {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Splits that completed.
    pub n_splits: usize,
    pub null_discovery_counts: Vec<usize>,
    pub real_discovery_count: usize,
    pub fdr_hat: f64,
}

impl FdrEstimate {
    /// Nothing was discovered on the real data.
    pub fn is_degenerate(&self) -> bool {
        self.real_discovery_count == 0
    }
}

pub fn fdr_ratio(null_counts: &[usize], real_count: usize) -> f64 {
    if null_counts.is_empty() {
        return f64::NAN;
    }
    let mean_null = null_counts.iter().sum::<usize>() as f64 / null_counts.len() as f64;
    (mean_null / real_count.max(1) as f64).min(1.0)
}

/// Assigns the pooled rows `0..sizes.sum()` to groups of the given sizes
/// without replacement.
pub fn pooled_split(sizes: &[usize], seed: u64, split: usize) -> Vec<Vec<usize>> {
    let total: usize = sizes.iter().sum();
    let mut rows: Vec<usize> = (0..total).collect();
    rows.shuffle(&mut stream_rng(seed, Stream::FdrSplit(split)));
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &n in sizes {
        out.push(rows[start..start + n].to_vec());
        start += n;
    }
    out
}

fn pool(data: &[SampleMatrix]) -> Result<SampleMatrix> {
    let names = shared_variable_names(data)?;
    let p = names.len();
    let total: usize = data.iter().map(SampleMatrix::n_samples).sum();
    let mut values = nalgebra::DMatrix::<f64>::zeros(total, p);
    let mut row = 0;
    for d in data {
        values.rows_mut(row, d.n_samples()).copy_from(d.values());
        row += d.n_samples();
    }
    SampleMatrix::new(values, names.to_vec(), "pooled")
}

/// Correlation estimates for the real data and for every pooled split.
/// Failed splits are logged and left out.
struct SplitCorrelations {
    real: Vec<CorrelationMatrix>,
    splits: Vec<Vec<CorrelationMatrix>>,
}

fn prepare(data: &[SampleMatrix], kind: EstimatorKind, n_splits: usize, seed: u64) -> Result<SplitCorrelations> {
    if n_splits == 0 {
        return Err(Error::TooSmall {
            what: "splits",
            min: 1,
            got: 0,
        });
    }
    if data.len() < 2 {
        return Err(Error::TooSmall {
            what: "conditions",
            min: 2,
            got: data.len(),
        });
    }
    let real = estimate_all(data, kind)?;
    let pooled = pool(data)?;
    let sizes: Vec<usize> = data.iter().map(SampleMatrix::n_samples).collect();
    let splits = (0..n_splits)
        .into_par_iter()
        .filter_map(|s| {
            let run = || -> Result<Vec<CorrelationMatrix>> {
                let groups = pooled_split(&sizes, seed, s);
                let parts = groups
                    .iter()
                    .map(|rows| pooled.select_rows(rows))
                    .collect::<Result<Vec<_>>>()?;
                estimate_all(&parts, kind)
            };
            run().map_err(|e| log::warn!("fdr split {s} skipped: {e}")).ok()
        })
        .collect();
    Ok(SplitCorrelations { real, splits })
}

fn discoveries(corrs: &[CorrelationMatrix], params: &PenaltyParams, names: &std::sync::Arc<Vec<String>>) -> Result<usize> {
    let solution = solve_jgl(corrs, params)?;
    count_differences(&networks_from_solution(&solution, std::sync::Arc::clone(names))?)
}

fn estimate_from(prepared: &SplitCorrelations, params: &PenaltyParams, names: &std::sync::Arc<Vec<String>>) -> Result<FdrEstimate> {
    let real_discovery_count = discoveries(&prepared.real, params, names)?;
    let null_discovery_counts: Vec<usize> = prepared
        .splits
        .par_iter()
        .enumerate()
        .filter_map(|(s, corrs)| {
            discoveries(corrs, params, names)
                .map_err(|e| log::warn!("fdr split {s} skipped: {e}"))
                .ok()
        })
        .collect();
    if null_discovery_counts.is_empty() {
        return Err(Error::InvalidParameter("every fdr split failed".into()));
    }
    Ok(FdrEstimate {
        lambda1: params.lambda1,
        lambda2: params.lambda2,
        n_splits: null_discovery_counts.len(),
        fdr_hat: fdr_ratio(&null_discovery_counts, real_discovery_count),
        null_discovery_counts,
        real_discovery_count,
    })
}

/// FDR estimate at one `(λ1, λ2)` setting.
pub fn estimate_fdr(
    data: &[SampleMatrix],
    params: &PenaltyParams,
    kind: EstimatorKind,
    n_splits: usize,
    seed: u64,
) -> Result<FdrEstimate> {
    params.validate()?;
    let names = shared_variable_names(data)?;
    let prepared = prepare(data, kind, n_splits, seed)?;
    estimate_from(&prepared, params, &names)
}

/// FDR estimates along a `λ2` grid at fixed `λ1`. The same splits are reused
/// for every grid point.
pub fn fdr_curve(
    data: &[SampleMatrix],
    params: &PenaltyParams,
    lambda2_grid: &[f64],
    kind: EstimatorKind,
    n_splits: usize,
    seed: u64,
) -> Result<Vec<FdrEstimate>> {
    check_grid(lambda2_grid, 0.0, 1.0, "lambda2")?;
    params.validate()?;
    let names = shared_variable_names(data)?;
    let prepared = prepare(data, kind, n_splits, seed)?;
    lambda2_grid
        .iter()
        .map(|&l2| estimate_from(&prepared, &params.with_lambdas(params.lambda1, l2), &names))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate, SyntheticScenario};

    #[test]
    fn ratio_definition() {
        assert_eq!(fdr_ratio(&[0, 0, 0], 0), 0.0);
        assert_eq!(fdr_ratio(&[2, 4], 6), 0.5);
        assert_eq!(fdr_ratio(&[10, 20], 3), 1.0);
        assert_eq!(fdr_ratio(&[1, 0], 0), 0.5);
    }

    #[test]
    fn splits_partition_rows() {
        let sizes = [7, 3, 5];
        for s in 0..20 {
            let groups = pooled_split(&sizes, 9, s);
            assert_eq!(groups.iter().map(Vec::len).collect::<Vec<_>>(), sizes);
            let mut all: Vec<usize> = groups.concat();
            all.sort_unstable();
            assert_eq!(all, (0..15).collect::<Vec<_>>());
        }
        assert_eq!(pooled_split(&sizes, 9, 0), pooled_split(&sizes, 9, 0));
        assert_ne!(pooled_split(&sizes, 9, 0), pooled_split(&sizes, 9, 1));
    }

    fn scenario() -> SyntheticScenario {
        SyntheticScenario {
            p: 10,
            m: 10,
            p_move: 0.3,
            n_conditions: 2,
            n_per_condition: 50,
            seed: 4,
        }
    }

    #[test]
    fn full_similarity_gives_no_discoveries() {
        let data = generate(&scenario()).unwrap();
        let params = PenaltyParams::new(0.2, 1.0).unwrap();
        let est = estimate_fdr(&data.samples, &params, EstimatorKind::KendallSine, 3, 1).unwrap();
        assert_eq!(est.null_discovery_counts.len(), 3);
        assert_eq!(est.real_discovery_count, 0);
        assert!(est.is_degenerate());
        assert_eq!(est.fdr_hat, 0.0);
    }

    #[test]
    fn curve_shape_and_determinism() {
        let data = generate(&scenario()).unwrap();
        let params = PenaltyParams::new(0.15, 0.0).unwrap();
        let grid = [0.0, 0.5, 1.0];
        let a = fdr_curve(&data.samples, &params, &grid, EstimatorKind::KendallSine, 2, 5).unwrap();
        let b = fdr_curve(&data.samples, &params, &grid, EstimatorKind::KendallSine, 2, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert_eq!(a[2].real_discovery_count, 0);
        assert!(a.iter().all(|e| (0.0..=1.0).contains(&e.fdr_hat)));
    }
}
