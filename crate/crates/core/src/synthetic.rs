//! Ground-truth network pairs with Gaussian training data.
//!
//! A random base graph is drawn, each further condition is obtained by
//! rewiring one endpoint of some of its edges, every network gets a
//! diagonally dominant precision matrix on its support, and samples are
//! drawn from `N(0, Θ⁻¹)`.

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::correlation::{default_names, SampleMatrix};
use crate::diffnet::{diff_edges, EdgeSet};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Smallest magnitude accepted for an edge weight.
pub const MIN_EDGE_WEIGHT: f64 = 0.1;
/// Margin added on top of the absolute row sum on the diagonal.
pub const DIAGONAL_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    pub p: usize,
    pub m: usize,
    pub p_move: f64,
    #[serde(rename = "k", alias = "K")]
    pub n_conditions: usize,
    pub n_per_condition: usize,
    pub seed: u64,
}

impl SyntheticScenario {
    /// The desk-scale benchmark: 100 nodes, 100 edges, 20% rewiring, two
    /// conditions with 200 samples each.
    pub fn desk(seed: u64) -> Self {
        SyntheticScenario {
            p: 100,
            m: 100,
            p_move: 0.2,
            n_conditions: 2,
            n_per_condition: 200,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let max = self.p * self.p.saturating_sub(1) / 2;
        if self.m > max {
            return Err(Error::TooManyEdges {
                requested: self.m,
                nodes: self.p,
                max,
            });
        }
        if !(0.0..=1.0).contains(&self.p_move) {
            return Err(Error::InvalidParameter(format!("p_move must lie in [0, 1], got {}", self.p_move)));
        }
        if self.n_conditions < 2 {
            return Err(Error::TooSmall {
                what: "conditions",
                min: 2,
                got: self.n_conditions,
            });
        }
        if self.p < 2 || self.n_per_condition < 2 {
            return Err(Error::InvalidParameter("need p >= 2 and n_per_condition >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub edge_sets: Vec<EdgeSet>,
    pub precisions: Vec<DMatrix<f64>>,
    /// Symmetric difference of the first two conditions' networks.
    pub true_differences: EdgeSet,
}

/// A generated benchmark: the truth plus one sample matrix per condition.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub scenario: SyntheticScenario,
    pub truth: GroundTruth,
    pub samples: Vec<SampleMatrix>,
}

/// Decodes the linear index of a pair `(i, j)`, `i < j`, in row-major order of
/// the strict upper triangle.
fn pair_from_index(mut idx: usize, p: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row_len = p - 1 - i;
        if idx < row_len {
            return (i, i + 1 + idx);
        }
        idx -= row_len;
        i += 1;
    }
}

/// `m` distinct edges drawn uniformly without replacement.
pub fn generate_base_graph<R: Rng + ?Sized>(
    names: Arc<Vec<String>>,
    m: usize,
    rng: &mut R,
) -> Result<EdgeSet> {
    let p = names.len();
    let max = p * p.saturating_sub(1) / 2;
    if m > max {
        return Err(Error::TooManyEdges {
            requested: m,
            nodes: p,
            max,
        });
    }
    let mut picked: Vec<usize> = index::sample(rng, max, m).into_vec();
    picked.sort_unstable();
    EdgeSet::from_edges(names, picked.into_iter().map(|idx| pair_from_index(idx, p)))
}

/// Moves one endpoint of each edge with probability `p_move`.
///
/// The moved endpoint is picked uniformly from the two, and its replacement
/// uniformly from the nodes that create neither a self-loop, a duplicate,
/// nor the original edge again. When no such node exists the edge is kept
/// and a warning is logged.
pub fn rewire<R: Rng + ?Sized>(base: &EdgeSet, p_move: f64, rng: &mut R) -> Result<EdgeSet> {
    if !(0.0..=1.0).contains(&p_move) {
        return Err(Error::InvalidParameter(format!("p_move must lie in [0, 1], got {p_move}")));
    }
    let p = base.n_nodes();
    let original: Vec<(usize, usize)> = base.iter().collect();
    let mut current: BTreeSet<(usize, usize)> = original.iter().copied().collect();
    let mut blocked = 0usize;
    for &(i, j) in &original {
        if !rng.random_bool(p_move) {
            continue;
        }
        let (anchor, moved) = if rng.random_bool(0.5) { (i, j) } else { (j, i) };
        let candidates: Vec<usize> = (0..p)
            .filter(|&c| {
                c != anchor && c != moved && !current.contains(&(anchor.min(c), anchor.max(c)))
            })
            .collect();
        if candidates.is_empty() {
            blocked += 1;
            continue;
        }
        let c = candidates[rng.random_range(0..candidates.len())];
        current.remove(&(i, j));
        current.insert((anchor.min(c), anchor.max(c)));
    }
    if blocked > 0 {
        log::warn!("rewire: {blocked} edge(s) could not be moved and were kept");
    }
    EdgeSet::from_edges(base.shared_names(), current)
}

/// Sparse, diagonally dominant precision matrix supported on `edges`.
///
/// Each edge weight is a standard normal draw with magnitude at least
/// [`MIN_EDGE_WEIGHT`]; each diagonal entry is its row's absolute sum plus
/// [`DIAGONAL_MARGIN`].
pub fn build_precision_matrix<R: Rng + ?Sized>(edges: &EdgeSet, rng: &mut R) -> DMatrix<f64> {
    let p = edges.n_nodes();
    let mut theta = DMatrix::<f64>::zeros(p, p);
    for (i, j) in edges.iter() {
        let w = loop {
            let w: f64 = rng.sample(StandardNormal);
            if w.abs() >= MIN_EDGE_WEIGHT {
                break w;
            }
        };
        theta[(i, j)] = w;
        theta[(j, i)] = w;
    }
    for i in 0..p {
        let row: f64 = (0..p).filter(|&j| j != i).map(|j| theta[(i, j)].abs()).sum();
        theta[(i, i)] = row + DIAGONAL_MARGIN;
    }
    theta
}

/// `n` draws from `N(0, Θ⁻¹)`.
///
/// With `Θ = L Lᵀ`, each row solves `Lᵀ x = z` for standard normal `z`, so
/// `cov(x) = (L Lᵀ)⁻¹`.
pub fn sample_gaussian<R: Rng + ?Sized>(
    precision: &DMatrix<f64>,
    n: usize,
    names: Vec<String>,
    label: &str,
    rng: &mut R,
) -> Result<SampleMatrix> {
    let p = precision.nrows();
    let chol = precision
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite {
            context: " (precision matrix for sampling)".into(),
        })?;
    let lt = chol.l().transpose();
    let mut values = DMatrix::<f64>::zeros(n, p);
    for r in 0..n {
        let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = lt
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::NotPositiveDefinite { context: String::new() })?;
        values.set_row(r, &x.transpose());
    }
    SampleMatrix::new(values, names, label)
}

pub fn condition_label(k: usize) -> String {
    format!("cond{k}")
}

/// Builds every network, precision matrix and sample matrix of a scenario
/// from its seed.
pub fn generate(scenario: &SyntheticScenario) -> Result<SyntheticData> {
    scenario.validate()?;
    let names = Arc::new(default_names(scenario.p));
    let base = generate_base_graph(
        Arc::clone(&names),
        scenario.m,
        &mut stream_rng(scenario.seed, Stream::BaseGraph),
    )?;
    let mut edge_sets = vec![base.clone()];
    for k in 1..scenario.n_conditions {
        let mut rng = stream_rng(scenario.seed, Stream::Rewire(k));
        edge_sets.push(rewire(&base, scenario.p_move, &mut rng)?);
    }
    let precisions: Vec<DMatrix<f64>> = edge_sets
        .iter()
        .enumerate()
        .map(|(k, e)| build_precision_matrix(e, &mut stream_rng(scenario.seed, Stream::EdgeWeights(k))))
        .collect();
    let samples = precisions
        .iter()
        .enumerate()
        .map(|(k, theta)| {
            sample_gaussian(
                theta,
                scenario.n_per_condition,
                names.to_vec(),
                &condition_label(k),
                &mut stream_rng(scenario.seed, Stream::Sampling(k)),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let true_differences = diff_edges(&edge_sets[0], &edge_sets[1])?;
    Ok(SyntheticData {
        scenario: *scenario,
        truth: GroundTruth {
            edge_sets,
            precisions,
            true_differences,
        },
        samples,
    })
}

/// Every condition sampled from one network and one precision matrix, so
/// there are no true differences.
pub fn generate_null(scenario: &SyntheticScenario) -> Result<SyntheticData> {
    scenario.validate()?;
    let names = Arc::new(default_names(scenario.p));
    let base = generate_base_graph(
        Arc::clone(&names),
        scenario.m,
        &mut stream_rng(scenario.seed, Stream::BaseGraph),
    )?;
    let theta = build_precision_matrix(&base, &mut stream_rng(scenario.seed, Stream::EdgeWeights(0)));
    let samples = (0..scenario.n_conditions)
        .map(|k| {
            sample_gaussian(
                &theta,
                scenario.n_per_condition,
                names.to_vec(),
                &condition_label(k),
                &mut stream_rng(scenario.seed, Stream::Sampling(k)),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticData {
        scenario: SyntheticScenario {
            p_move: 0.0,
            ..*scenario
        },
        truth: GroundTruth {
            edge_sets: vec![base.clone(); scenario.n_conditions],
            precisions: vec![theta; scenario.n_conditions],
            true_differences: EdgeSet::empty(names),
        },
        samples,
    })
}
