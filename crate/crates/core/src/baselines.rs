//! Bootstrap baseline: resample, learn each condition independently
//! (`λ2 = 0`), and count how often every pair shows up as a difference.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::correlation::{EstimatorKind, SampleMatrix};
use crate::diffnet::{
    check_grid, differential_confusion, fit_networks, pairwise_differences, shared_variable_names,
    EdgeSet, PrCurve, PrPoint, SweptParam,
};
use crate::error::{Error, Result};
use crate::jgl::PenaltyParams;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    /// `P_B(e)` for every pair seen as a difference at least once.
    pub frequencies: BTreeMap<(usize, usize), f64>,
    pub node_names: Arc<Vec<String>>,
    /// Replicas that completed; failed ones are dropped from the denominator.
    pub n_bootstraps: usize,
    pub lambda1: f64,
    /// Joint solves performed, including failed ones.
    pub solver_calls: usize,
}

impl BootstrapResult {
    pub fn frequency(&self, i: usize, j: usize) -> f64 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.frequencies.get(&key).copied().unwrap_or(0.0)
    }

    /// Pairs inferred as differences at cutoff `c`: `P_B(e) ≥ c`, except that
    /// `c = 0` means "seen in any replica" (`P_B(e) > 0`).
    pub fn inferred_at(&self, c: f64) -> EdgeSet {
        let edges = self
            .frequencies
            .iter()
            .filter(|(_, &f)| if c == 0.0 { f > 0.0 } else { f >= c })
            .map(|(&e, _)| e);
        EdgeSet::from_edges(Arc::clone(&self.node_names), edges).expect("valid pairs")
    }
}

/// Row indices for one replica of a condition with `n` rows.
///
/// Draws depend only on `(seed, replica, n)`, so conditions of equal size are
/// resampled with the same index pattern within a replica.
pub fn resample_rows(seed: u64, replica: usize, n: usize) -> Vec<usize> {
    let mut rng = stream_rng(seed, Stream::Bootstrap(replica));
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Runs `n_bootstraps` resample-and-learn replicas at `λ1 = params.lambda1`,
/// `λ2 = 0`. A pair counts as a difference in a replica if it differs between
/// any two conditions.
pub fn bootstrap_differences(
    data: &[SampleMatrix],
    params: &PenaltyParams,
    kind: EstimatorKind,
    n_bootstraps: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    if n_bootstraps == 0 {
        return Err(Error::TooSmall {
            what: "bootstraps",
            min: 1,
            got: 0,
        });
    }
    let names = shared_variable_names(data)?;
    let independent = params.with_lambdas(params.lambda1, 0.0);
    independent.validate()?;

    let replicas: Vec<Option<Vec<(usize, usize)>>> = (0..n_bootstraps)
        .into_par_iter()
        .map(|b| {
            let run = || -> Result<Vec<(usize, usize)>> {
                let resampled = data
                    .iter()
                    .map(|d| d.select_rows(&resample_rows(seed, b, d.n_samples())))
                    .collect::<Result<Vec<_>>>()?;
                let (_, networks) = fit_networks(&resampled, kind, &independent)?;
                let mut diff: Vec<(usize, usize)> = pairwise_differences(&networks)?
                    .iter()
                    .flat_map(|(_, d)| d.iter())
                    .collect();
                diff.sort_unstable();
                diff.dedup();
                Ok(diff)
            };
            match run() {
                Ok(d) => Some(d),
                Err(e) => {
                    log::warn!("bootstrap replica {b} failed and is skipped: {e}");
                    None
                }
            }
        })
        .collect();

    let completed = replicas.iter().flatten().count();
    if completed == 0 {
        return Err(Error::InvalidParameter("every bootstrap replica failed".into()));
    }
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for diff in replicas.iter().flatten() {
        for &e in diff {
            *counts.entry(e).or_default() += 1;
        }
    }
    Ok(BootstrapResult {
        frequencies: counts
            .into_iter()
            .map(|(e, c)| (e, c as f64 / completed as f64))
            .collect(),
        node_names: names,
        n_bootstraps: completed,
        lambda1: params.lambda1,
        solver_calls: n_bootstraps,
    })
}

/// Precision and recall of the inferred set at each cutoff.
pub fn bootstrap_pr_curve(result: &BootstrapResult, true_diff: &EdgeSet, c_grid: &[f64]) -> Result<PrCurve> {
    check_grid(c_grid, 0.0, f64::MAX, "cutoff")?;
    let points = c_grid
        .iter()
        .map(|&c| Ok(PrPoint::from_counts(c, differential_confusion(true_diff, &result.inferred_at(c))?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PrCurve {
        swept_param: SweptParam::CutoffC,
        lambda1: Some(result.lambda1),
        points,
    })
}
