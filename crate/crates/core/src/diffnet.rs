//! Networks, differences between them, and how well learned differences
//! match the truth.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{estimate_correlation, CorrelationMatrix, EstimatorKind, SampleMatrix};
use crate::error::{Error, Result};
use crate::jgl::{solve_jgl, PenaltyParams, PrecisionMatrixSet};

/// Undirected edges over a fixed, named node set. Pairs are stored `(i, j)`
/// with `i < j`.
#[derive(Clone, PartialEq, Eq)]
pub struct EdgeSet {
    node_names: Arc<Vec<String>>,
    edges: BTreeSet<(usize, usize)>,
}

impl fmt::Debug for EdgeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EdgeSet")
            .field("nodes", &self.node_names.len())
            .field("edges", &self.edges)
            .finish()
    }
}

fn ordered(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl EdgeSet {
    pub fn empty(node_names: Arc<Vec<String>>) -> Self {
        EdgeSet {
            node_names,
            edges: BTreeSet::new(),
        }
    }

    pub fn from_edges(
        node_names: Arc<Vec<String>>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut set = Self::empty(node_names);
        for (i, j) in edges {
            if !set.insert(i, j)? {
                return Err(Error::InvalidParameter(format!("duplicate edge ({i}, {j})")));
            }
        }
        Ok(set)
    }

    /// Inserts `{i, j}`; returns whether it was new.
    pub fn insert(&mut self, i: usize, j: usize) -> Result<bool> {
        let p = self.n_nodes();
        if i == j {
            return Err(Error::InvalidParameter(format!("self-loop on node {i}")));
        }
        if i >= p || j >= p {
            return Err(Error::InvalidParameter(format!("edge ({i}, {j}) outside {p} nodes")));
        }
        Ok(self.edges.insert(ordered(i, j)))
    }

    pub fn remove(&mut self, i: usize, j: usize) -> bool {
        self.edges.remove(&ordered(i, j))
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&ordered(i, j))
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.node_names.len()
    }

    /// Number of unordered node pairs, `p(p−1)/2`.
    pub fn n_pairs(&self) -> usize {
        let p = self.n_nodes();
        p * p.saturating_sub(1) / 2
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn shared_names(&self) -> Arc<Vec<String>> {
        Arc::clone(&self.node_names)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|&&(i, j)| i == node || j == node).count()
    }

    pub fn same_nodes(&self, other: &EdgeSet) -> bool {
        Arc::ptr_eq(&self.node_names, &other.node_names) || self.node_names == other.node_names
    }

    fn check_nodes(&self, other: &EdgeSet) -> Result<()> {
        if self.same_nodes(other) {
            Ok(())
        } else {
            Err(Error::NodeSetMismatch)
        }
    }

    pub fn intersection(&self, other: &EdgeSet) -> Result<EdgeSet> {
        self.check_nodes(other)?;
        Ok(EdgeSet {
            node_names: self.shared_names(),
            edges: self.edges.intersection(&other.edges).copied().collect(),
        })
    }

    pub fn difference(&self, other: &EdgeSet) -> Result<EdgeSet> {
        self.check_nodes(other)?;
        Ok(EdgeSet {
            node_names: self.shared_names(),
            edges: self.edges.difference(&other.edges).copied().collect(),
        })
    }

    fn count_common(&self, other: &EdgeSet) -> usize {
        self.edges.intersection(&other.edges).count()
    }
}

/// Network of every off-diagonal non-zero of `theta`.
pub fn extract_network(theta: &DMatrix<f64>, names: Arc<Vec<String>>) -> Result<EdgeSet> {
    let p = theta.nrows();
    if !theta.is_square() || names.len() != p {
        return Err(Error::DimensionMismatch {
            expected: names.len(),
            got: p,
        });
    }
    let mut set = EdgeSet::empty(names);
    for i in 0..p {
        for j in (i + 1)..p {
            let (a, b) = (theta[(i, j)] != 0.0, theta[(j, i)] != 0.0);
            if a != b {
                return Err(Error::AsymmetricSupport { row: i, col: j });
            }
            if a {
                set.edges.insert((i, j));
            }
        }
    }
    Ok(set)
}

/// Edges present in exactly one of the two networks.
pub fn diff_edges(a: &EdgeSet, b: &EdgeSet) -> Result<EdgeSet> {
    a.check_nodes(b)?;
    Ok(EdgeSet {
        node_names: a.shared_names(),
        edges: a.edges.symmetric_difference(&b.edges).copied().collect(),
    })
}

/// Differences for every condition pair `(a, b)` with `a < b`.
pub fn pairwise_differences(networks: &[EdgeSet]) -> Result<Vec<((usize, usize), EdgeSet)>> {
    let mut out = Vec::new();
    for a in 0..networks.len() {
        for b in (a + 1)..networks.len() {
            out.push(((a, b), diff_edges(&networks[a], &networks[b])?));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Edge,
    Differential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
    pub level: Level,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }

    pub fn n_discoveries(&self) -> usize {
        self.true_pos + self.false_pos
    }

    /// `tp / (tp + fp)`; 1 when nothing was discovered.
    pub fn precision(&self) -> f64 {
        match self.n_discoveries() {
            0 => 1.0,
            d => self.true_pos as f64 / d as f64,
        }
    }

    /// `tp / (tp + fn)`; 1 when there was nothing to find.
    pub fn recall(&self) -> f64 {
        match self.true_pos + self.false_neg {
            0 => 1.0,
            d => self.true_pos as f64 / d as f64,
        }
    }

    fn add(self, other: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            true_pos: self.true_pos + other.true_pos,
            false_pos: self.false_pos + other.false_pos,
            false_neg: self.false_neg + other.false_neg,
            true_neg: self.true_neg + other.true_neg,
            level: self.level,
        }
    }
}

fn confusion(truth: &EdgeSet, learned: &EdgeSet, level: Level) -> Result<ConfusionCounts> {
    truth.check_nodes(learned)?;
    let tp = truth.count_common(learned);
    let fp = learned.len() - tp;
    let fn_ = truth.len() - tp;
    Ok(ConfusionCounts {
        true_pos: tp,
        false_pos: fp,
        false_neg: fn_,
        true_neg: truth.n_pairs() - tp - fp - fn_,
        level,
    })
}

pub fn edge_confusion(truth: &EdgeSet, learned: &EdgeSet) -> Result<ConfusionCounts> {
    confusion(truth, learned, Level::Edge)
}

/// Scores learned differences against true differences, ignoring which
/// network holds each edge.
pub fn differential_confusion(true_diff: &EdgeSet, learned_diff: &EdgeSet) -> Result<ConfusionCounts> {
    confusion(true_diff, learned_diff, Level::Differential)
}

/// Strict variant: a learned difference only counts as a true positive when
/// it sits in the same network as the true difference. A pair found on the
/// wrong side counts both as a false positive and a false negative, so
/// `total()` can exceed the number of pairs.
pub fn differential_confusion_directional(
    true_a: &EdgeSet,
    true_b: &EdgeSet,
    learned_a: &EdgeSet,
    learned_b: &EdgeSet,
) -> Result<ConfusionCounts> {
    let true_diff = diff_edges(true_a, true_b)?;
    let learned_diff = diff_edges(learned_a, learned_b)?;
    learned_a.check_nodes(true_a)?;
    let tp = learned_diff
        .iter()
        .filter(|&(i, j)| true_diff.contains(i, j) && learned_a.contains(i, j) == true_a.contains(i, j))
        .count();
    let fp = learned_diff.len() - tp;
    let fn_ = true_diff.len() - tp;
    Ok(ConfusionCounts {
        true_pos: tp,
        false_pos: fp,
        false_neg: fn_,
        true_neg: true_diff.n_pairs() - learned_diff.len() - true_diff.difference(&learned_diff)?.len(),
        level: Level::Differential,
    })
}

/// Differential confusion summed over every condition pair.
pub fn multi_differential_confusion(truth: &[EdgeSet], learned: &[EdgeSet]) -> Result<ConfusionCounts> {
    if truth.len() != learned.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: learned.len(),
        });
    }
    let true_diffs = pairwise_differences(truth)?;
    let learned_diffs = pairwise_differences(learned)?;
    let mut total = ConfusionCounts {
        true_pos: 0,
        false_pos: 0,
        false_neg: 0,
        true_neg: 0,
        level: Level::Differential,
    };
    for ((_, t), (_, l)) in true_diffs.iter().zip(&learned_diffs) {
        total = total.add(differential_confusion(t, l)?);
    }
    Ok(total)
}

/// Networks read off the solver's consensus iterate.
pub fn networks_from_solution(solution: &PrecisionMatrixSet, names: Arc<Vec<String>>) -> Result<Vec<EdgeSet>> {
    solution
        .consensus
        .iter()
        .map(|z| extract_network(z, Arc::clone(&names)))
        .collect()
}

/// Checks that every condition has the same variable names and returns them.
pub fn shared_variable_names(data: &[SampleMatrix]) -> Result<Arc<Vec<String>>> {
    let first = data.first().ok_or(Error::TooSmall {
        what: "conditions",
        min: 1,
        got: 0,
    })?;
    for d in &data[1..] {
        if d.variable_names() != first.variable_names() {
            return Err(Error::HeaderMismatch {
                condition: d.condition_label().to_string(),
            });
        }
    }
    Ok(Arc::new(first.variable_names().to_vec()))
}

pub fn estimate_all(data: &[SampleMatrix], kind: EstimatorKind) -> Result<Vec<CorrelationMatrix>> {
    data.iter().map(|d| estimate_correlation(d, kind)).collect()
}

/// Correlations, joint solve and per-condition networks in one call.
pub fn fit_networks(
    data: &[SampleMatrix],
    kind: EstimatorKind,
    params: &PenaltyParams,
) -> Result<(PrecisionMatrixSet, Vec<EdgeSet>)> {
    let names = shared_variable_names(data)?;
    let corrs = estimate_all(data, kind)?;
    let solution = solve_jgl(&corrs, params)?;
    let networks = networks_from_solution(&solution, names)?;
    Ok((solution, networks))
}

/// Total number of learned differences over all condition pairs.
pub fn count_differences(networks: &[EdgeSet]) -> Result<usize> {
    Ok(pairwise_differences(networks)?.iter().map(|(_, d)| d.len()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParam {
    Lambda2,
    CutoffC,
    Lambda1,
}

impl SweptParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweptParam::Lambda2 => "lambda2",
            SweptParam::CutoffC => "cutoff_c",
            SweptParam::Lambda1 => "lambda1",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrPoint {
    pub value: f64,
    pub precision: f64,
    pub recall: f64,
    pub n_discoveries: usize,
    pub counts: Option<ConfusionCounts>,
    /// Set when the solve behind this point failed.
    pub error: Option<String>,
}

impl PrPoint {
    pub fn from_counts(value: f64, counts: ConfusionCounts) -> Self {
        PrPoint {
            value,
            precision: counts.precision(),
            recall: counts.recall(),
            n_discoveries: counts.n_discoveries(),
            counts: Some(counts),
            error: None,
        }
    }

    fn failed(value: f64, err: &Error) -> Self {
        PrPoint {
            value,
            precision: f64::NAN,
            recall: f64::NAN,
            n_discoveries: 0,
            counts: None,
            error: Some(err.to_string()),
        }
    }

    /// Whether the point carries a real precision (something was discovered).
    pub fn has_discoveries(&self) -> bool {
        self.error.is_none() && self.n_discoveries > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub swept_param: SweptParam,
    /// λ1 held fixed along a λ2 sweep, if any.
    pub lambda1: Option<f64>,
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    /// Largest precision among points that discovered something.
    pub fn max_precision(&self) -> Option<f64> {
        self.points
            .iter()
            .filter(|p| p.has_discoveries())
            .map(|p| p.precision)
            .reduce(f64::max)
    }

    pub fn point_at(&self, value: f64) -> Option<&PrPoint> {
        self.points.iter().find(|p| p.value == value)
    }
}

pub(crate) fn check_grid(grid: &[f64], lo: f64, hi: f64, what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter(format!("{what} grid is empty")));
    }
    if grid.iter().any(|v| !(lo..=hi).contains(v)) {
        let range = if hi == f64::MAX { format!("be at least {lo}") } else { format!("lie in [{lo}, {hi}]") };
        return Err(Error::InvalidParameter(format!("{what} grid values must {range}")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!("{what} grid must be strictly ascending")));
    }
    Ok(())
}

/// One joint solve per `λ2` value at fixed `λ1` (taken from `params`), each
/// scored against the true networks. Failed solves are recorded on their
/// point and do not stop the sweep.
pub fn sweep_lambda2(
    corrs: &[CorrelationMatrix],
    params: &PenaltyParams,
    lambda2_grid: &[f64],
    truth: &[EdgeSet],
) -> Result<PrCurve> {
    check_grid(lambda2_grid, 0.0, 1.0, "lambda2")?;
    if truth.len() != corrs.len() {
        return Err(Error::DimensionMismatch {
            expected: corrs.len(),
            got: truth.len(),
        });
    }
    let names = truth.first().map(EdgeSet::shared_names).ok_or(Error::TooSmall {
        what: "conditions",
        min: 2,
        got: 0,
    })?;
    let points = lambda2_grid
        .par_iter()
        .map(|&l2| {
            let run = || -> Result<PrPoint> {
                let solution = solve_jgl(corrs, &params.with_lambdas(params.lambda1, l2))?;
                let learned = networks_from_solution(&solution, Arc::clone(&names))?;
                Ok(PrPoint::from_counts(l2, multi_differential_confusion(truth, &learned)?))
            };
            run().unwrap_or_else(|e| {
                log::warn!("lambda2 = {l2}: {e}");
                PrPoint::failed(l2, &e)
            })
        })
        .collect();
    Ok(PrCurve {
        swept_param: SweptParam::Lambda2,
        lambda1: Some(params.lambda1),
        points,
    })
}

/// One `λ2` sweep per `λ1`.
pub fn sweep_lambda1(
    corrs: &[CorrelationMatrix],
    params: &PenaltyParams,
    lambda1_grid: &[f64],
    lambda2_grid: &[f64],
    truth: &[EdgeSet],
) -> Result<Vec<PrCurve>> {
    check_grid(lambda1_grid, 0.0, f64::MAX, "lambda1")?;
    lambda1_grid
        .iter()
        .map(|&l1| sweep_lambda2(corrs, &params.with_lambdas(l1, 0.0), lambda2_grid, truth))
        .collect()
}

/// Pointwise mean of curves over the same grid (e.g. across seeds).
///
/// Precision is averaged over the curves that discovered something at that
/// point (NaN if none did); recall and discovery counts over all curves.
pub fn average_curves(curves: &[PrCurve]) -> Result<PrCurve> {
    let first = curves.first().ok_or(Error::TooSmall {
        what: "curves",
        min: 1,
        got: 0,
    })?;
    for c in curves {
        let same_grid = c.points.len() == first.points.len()
            && c.points.iter().zip(&first.points).all(|(a, b)| a.value == b.value);
        if !same_grid {
            return Err(Error::InvalidParameter("curves are on different grids".into()));
        }
    }
    let points = (0..first.points.len())
        .map(|idx| {
            let at: Vec<&PrPoint> = curves.iter().map(|c| &c.points[idx]).filter(|p| p.error.is_none()).collect();
            let with_disc: Vec<f64> = at.iter().filter(|p| p.n_discoveries > 0).map(|p| p.precision).collect();
            let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
            let recalls: Vec<f64> = at.iter().map(|p| p.recall).collect();
            let disc = if at.is_empty() {
                0
            } else {
                (at.iter().map(|p| p.n_discoveries).sum::<usize>() as f64 / at.len() as f64).round() as usize
            };
            PrPoint {
                value: first.points[idx].value,
                precision: mean(&with_disc),
                recall: mean(&recalls),
                n_discoveries: disc,
                counts: None,
                error: None,
            }
        })
        .collect();
    Ok(PrCurve {
        swept_param: first.swept_param,
        lambda1: first.lambda1,
        points,
    })
}
