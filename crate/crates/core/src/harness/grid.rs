//! Precomputed `(λ1, λ2)` grid of learned networks for interactive browsing.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{EstimatorKind, SampleMatrix};
use crate::diffnet::{estimate_all, networks_from_solution, pairwise_differences, shared_variable_names, EdgeSet};
use crate::error::{Error, Result};
use crate::fdr::fdr_curve;
use crate::jgl::{solve_jgl, PenaltyParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDifference {
    /// Indices of the two conditions compared.
    pub conditions: [usize; 2],
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Edge list per condition, as node index pairs `i < j`.
    pub networks: Vec<Vec<[usize; 2]>>,
    pub differences: Vec<CellDifference>,
    pub n_discoveries: usize,
    pub fdr_hat: Option<f64>,
    pub converged: bool,
    /// Set when the solve failed; the cell then holds no edges.
    pub error: Option<String>,
}

/// Cells are stored row-major: all `λ2` values for the first `λ1`, then the
/// next `λ1`, and so on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridArtifact {
    pub variable_names: Vec<String>,
    pub condition_labels: Vec<String>,
    pub lambda1_grid: Vec<f64>,
    pub lambda2_grid: Vec<f64>,
    pub config_hash: String,
    pub cells: Vec<GridCell>,
}

fn pairs(set: &EdgeSet) -> Vec<[usize; 2]> {
    set.iter().map(|(i, j)| [i, j]).collect()
}

impl GridArtifact {
    pub fn cell(&self, i1: usize, i2: usize) -> &GridCell {
        &self.cells[i1 * self.lambda2_grid.len() + i2]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(format!("grid artifact: {m}")));
        let (n1, n2) = (self.lambda1_grid.len(), self.lambda2_grid.len());
        if n1 == 0 || n2 == 0 {
            return bad("empty grid".into());
        }
        if self.cells.len() != n1 * n2 {
            return bad(format!("{} cells for a {n1}x{n2} grid", self.cells.len()));
        }
        let p = self.variable_names.len();
        let k = self.condition_labels.len();
        for (idx, c) in self.cells.iter().enumerate() {
            if c.lambda1 != self.lambda1_grid[idx / n2] || c.lambda2 != self.lambda2_grid[idx % n2] {
                return bad(format!("cell {idx} is out of order"));
            }
            if c.error.is_none() && c.networks.len() != k {
                return bad(format!("cell {idx} has {} networks for {k} conditions", c.networks.len()));
            }
            let edges = c.networks.iter().flatten().chain(c.differences.iter().flat_map(|d| &d.edges));
            for &[i, j] in edges {
                if i >= j || j >= p {
                    return bad(format!("cell {idx} has invalid edge ({i}, {j})"));
                }
            }
            if c.differences.iter().any(|d| d.conditions[0] >= k || d.conditions[1] >= k) {
                return bad(format!("cell {idx} names an unknown condition"));
            }
        }
        Ok(())
    }
}

/// Solves every cell and, when `fdr_splits > 0`, attaches an FDR estimate
/// per cell. Cells are independent and solved in parallel.
#[allow(clippy::too_many_arguments)]
pub fn build_grid(
    data: &[SampleMatrix],
    lambda1_grid: &[f64],
    lambda2_grid: &[f64],
    solver: &PenaltyParams,
    kind: EstimatorKind,
    fdr_splits: usize,
    seed: u64,
    config_hash: &str,
) -> Result<GridArtifact> {
    crate::diffnet::check_grid(lambda1_grid, 0.0, f64::MAX, "lambda1")?;
    crate::diffnet::check_grid(lambda2_grid, 0.0, 1.0, "lambda2")?;
    let names = shared_variable_names(data)?;
    let corrs = estimate_all(data, kind)?;
    let settings: Vec<(f64, f64)> = lambda1_grid
        .iter()
        .flat_map(|&l1| lambda2_grid.iter().map(move |&l2| (l1, l2)))
        .collect();
    let mut cells: Vec<GridCell> = settings
        .par_iter()
        .map(|&(l1, l2)| {
            let run = || -> Result<GridCell> {
                let solution = solve_jgl(&corrs, &solver.with_lambdas(l1, l2))?;
                let networks = networks_from_solution(&solution, Arc::clone(&names))?;
                let diffs = pairwise_differences(&networks)?;
                Ok(GridCell {
                    lambda1: l1,
                    lambda2: l2,
                    networks: networks.iter().map(pairs).collect(),
                    n_discoveries: diffs.iter().map(|(_, d)| d.len()).sum(),
                    differences: diffs
                        .iter()
                        .map(|&((a, b), ref d)| CellDifference {
                            conditions: [a, b],
                            edges: pairs(d),
                        })
                        .collect(),
                    fdr_hat: None,
                    converged: solution.converged,
                    error: None,
                })
            };
            run().unwrap_or_else(|e| {
                log::warn!("grid cell lambda1 = {l1}, lambda2 = {l2} failed: {e}");
                GridCell {
                    lambda1: l1,
                    lambda2: l2,
                    networks: Vec::new(),
                    differences: Vec::new(),
                    n_discoveries: 0,
                    fdr_hat: None,
                    converged: false,
                    error: Some(e.to_string()),
                }
            })
        })
        .collect();

    if fdr_splits > 0 {
        for (i1, &l1) in lambda1_grid.iter().enumerate() {
            match fdr_curve(data, &solver.with_lambdas(l1, 0.0), lambda2_grid, kind, fdr_splits, seed) {
                Ok(curve) => {
                    for (i2, est) in curve.iter().enumerate() {
                        cells[i1 * lambda2_grid.len() + i2].fdr_hat = Some(est.fdr_hat);
                    }
                }
                Err(e) => log::warn!("fdr at lambda1 = {l1} failed: {e}"),
            }
        }
    }

    let artifact = GridArtifact {
        variable_names: names.to_vec(),
        condition_labels: data.iter().map(|d| d.condition_label().to_string()).collect(),
        lambda1_grid: lambda1_grid.to_vec(),
        lambda2_grid: lambda2_grid.to_vec(),
        config_hash: config_hash.to_string(),
        cells,
    };
    artifact.validate()?;
    Ok(artifact)
}
