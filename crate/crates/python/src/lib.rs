//! Python bindings for the `diffnet` crate.
//!
//! Matrices cross the boundary as lists of rows.

use std::path::PathBuf;
use std::sync::Arc;

use diffnet::baselines::bootstrap_differences;
use diffnet::correlation::default_names;
use diffnet::diffnet::{diff_edges, differential_confusion, estimate_all, networks_from_solution, sweep_lambda2};
use diffnet::fdr::estimate_fdr;
use diffnet::harness::{run_experiment as run_experiment_rs, ExperimentConfig};
use diffnet::jgl::{self, PenaltyParams};
use diffnet::synthetic::{self, SyntheticScenario};
use diffnet::{CorrelationMatrix, EstimatorKind, SampleMatrix};
use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: diffnet::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn estimator(name: &str) -> PyResult<EstimatorKind> {
    match name {
        "kendall_sine" => Ok(EstimatorKind::KendallSine),
        "pearson" => Ok(EstimatorKind::Pearson),
        other => Err(PyValueError::new_err(format!("unknown estimator `{other}`"))),
    }
}

fn samples(data: Vec<Vec<Vec<f64>>>, names: Option<Vec<String>>) -> PyResult<Vec<SampleMatrix>> {
    data.iter()
        .enumerate()
        .map(|(k, d)| {
            let m = matrix(d)?;
            let names = names.clone().unwrap_or_else(|| default_names(m.ncols()));
            SampleMatrix::new(m, names, synthetic::condition_label(k)).map_err(err)
        })
        .collect()
}

/// Kendall's tau-b of two equally long sequences.
#[pyfunction]
fn kendall_tau(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    diffnet::kendall_tau(&x, &y).map_err(err)
}

/// Correlation matrix of an `n x p` sample table.
#[pyfunction]
#[pyo3(signature = (data, estimator = "kendall_sine"))]
fn estimate_correlation(data: Vec<Vec<f64>>, estimator: &str) -> PyResult<Vec<Vec<f64>>> {
    let m = SampleMatrix::with_default_names(matrix(&data)?, "data").map_err(err)?;
    let c = diffnet::estimate_correlation(&m, self::estimator(estimator)?).map_err(err)?;
    Ok(rows(&c.values))
}

#[pyfunction]
fn soft_threshold(x: f64, t: f64) -> f64 {
    jgl::soft_threshold(x, t)
}

/// Minimizer of `0.5*|x - v|^2 + t1*|x|_1 + t2*|x|_2`.
#[pyfunction]
fn prox_group_lasso(v: Vec<f64>, t1: f64, t2: f64) -> Vec<f64> {
    jgl::prox_group_lasso(&v, t1, t2)
}

/// Undirected edge set over named nodes; edges are index pairs `i < j`.
#[pyclass(name = "EdgeSet", frozen)]
struct PyEdgeSet {
    inner: diffnet::EdgeSet,
}

#[pymethods]
impl PyEdgeSet {
    #[new]
    fn new(node_names: Vec<String>, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        let inner = diffnet::EdgeSet::from_edges(Arc::new(node_names), edges).map_err(err)?;
        Ok(PyEdgeSet { inner })
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.iter().collect()
    }

    fn node_names(&self) -> Vec<String> {
        self.inner.node_names().to_vec()
    }

    fn contains(&self, i: usize, j: usize) -> bool {
        self.inner.contains(i, j)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("EdgeSet({} nodes, {} edges)", self.inner.n_nodes(), self.inner.len())
    }
}

fn wrap(sets: Vec<diffnet::EdgeSet>) -> Vec<PyEdgeSet> {
    sets.into_iter().map(|inner| PyEdgeSet { inner }).collect()
}

/// Edges present in exactly one of the two networks.
#[pyfunction]
fn differences(a: &PyEdgeSet, b: &PyEdgeSet) -> PyResult<PyEdgeSet> {
    Ok(PyEdgeSet {
        inner: diff_edges(&a.inner, &b.inner).map_err(err)?,
    })
}

/// Confusion counts of learned against true differences.
#[pyfunction]
fn confusion<'py>(py: Python<'py>, true_diff: &PyEdgeSet, learned_diff: &PyEdgeSet) -> PyResult<Bound<'py, PyDict>> {
    let c = differential_confusion(&true_diff.inner, &learned_diff.inner).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("true_pos", c.true_pos)?;
    d.set_item("false_pos", c.false_pos)?;
    d.set_item("false_neg", c.false_neg)?;
    d.set_item("true_neg", c.true_neg)?;
    d.set_item("precision", c.precision())?;
    d.set_item("recall", c.recall())?;
    Ok(d)
}

#[pyclass(name = "JglSolution", frozen)]
struct PyJglSolution {
    inner: jgl::PrecisionMatrixSet,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    iterations: usize,
}

#[pymethods]
impl PyJglSolution {
    /// Learned precision matrices, one per condition.
    #[getter]
    fn thetas(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.thetas.iter().map(rows).collect()
    }

    #[getter]
    fn residuals(&self) -> (f64, f64) {
        (self.inner.final_residuals.primal, self.inner.final_residuals.dual)
    }

    #[getter]
    fn objective_trace(&self) -> Vec<f64> {
        self.inner.trace.objective.clone()
    }

    /// Per-condition networks, with optional variable names.
    #[pyo3(signature = (names = None))]
    fn networks(&self, names: Option<Vec<String>>) -> PyResult<Vec<PyEdgeSet>> {
        let p = self.inner.thetas.first().map_or(0, |t| t.nrows());
        let names = Arc::new(names.unwrap_or_else(|| default_names(p)));
        Ok(wrap(networks_from_solution(&self.inner, names).map_err(err)?))
    }
}

/// Joint graphical lasso over a list of correlation matrices.
#[pyfunction]
#[pyo3(signature = (correlations, lambda1, lambda2, rho = 1.0, max_iters = 500, tol = 1e-5, n_samples = None))]
#[allow(clippy::too_many_arguments)]
fn solve_jgl(
    correlations: Vec<Vec<Vec<f64>>>,
    lambda1: f64,
    lambda2: f64,
    rho: f64,
    max_iters: usize,
    tol: f64,
    n_samples: Option<usize>,
) -> PyResult<PyJglSolution> {
    let corrs = correlations
        .iter()
        .map(|c| {
            Ok(CorrelationMatrix {
                values: matrix(c)?,
                estimator_kind: EstimatorKind::KendallSine,
                n_samples: n_samples.unwrap_or(0),
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    let params = PenaltyParams {
        rho,
        max_iters,
        tol,
        ..PenaltyParams::new(lambda1, lambda2).map_err(err)?
    };
    let inner = diffnet::solve_jgl(&corrs, &params).map_err(err)?;
    Ok(PyJglSolution {
        converged: inner.converged,
        iterations: inner.iterations,
        inner,
    })
}

#[pyclass(name = "SyntheticData", frozen)]
struct PySyntheticData {
    inner: synthetic::SyntheticData,
}

#[pymethods]
impl PySyntheticData {
    /// Sample tables, one per condition.
    #[getter]
    fn samples(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.samples.iter().map(|s| rows(s.values())).collect()
    }

    #[getter]
    fn variable_names(&self) -> Vec<String> {
        self.inner.samples[0].variable_names().to_vec()
    }

    #[getter]
    fn networks(&self) -> Vec<PyEdgeSet> {
        wrap(self.inner.truth.edge_sets.clone())
    }

    #[getter]
    fn true_differences(&self) -> PyEdgeSet {
        PyEdgeSet {
            inner: self.inner.truth.true_differences.clone(),
        }
    }

    #[getter]
    fn precisions(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.truth.precisions.iter().map(rows).collect()
    }
}

/// Synthetic benchmark: a random base network, rewired copies, and Gaussian
/// samples from each. `null=True` samples every condition from the base.
#[pyfunction]
#[pyo3(signature = (p = 100, m = 100, p_move = 0.2, k = 2, n_per_condition = 200, seed = 0, null = false))]
fn generate(p: usize, m: usize, p_move: f64, k: usize, n_per_condition: usize, seed: u64, null: bool) -> PyResult<PySyntheticData> {
    let s = SyntheticScenario {
        p,
        m,
        p_move,
        n_conditions: k,
        n_per_condition,
        seed,
    };
    let inner = if null { synthetic::generate_null(&s) } else { synthetic::generate(&s) }.map_err(err)?;
    Ok(PySyntheticData { inner })
}

/// Precision-recall points along a lambda2 grid, scored against `truth`.
#[pyfunction]
#[pyo3(signature = (samples, truth, lambda1, lambda2_grid, estimator = "kendall_sine"))]
fn sweep<'py>(
    py: Python<'py>,
    samples: Vec<Vec<Vec<f64>>>,
    truth: Vec<PyRef<'py, PyEdgeSet>>,
    lambda1: f64,
    lambda2_grid: Vec<f64>,
    estimator: &str,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let names = truth.first().map(|t| t.inner.node_names().to_vec());
    let data = self::samples(samples, names)?;
    let corrs = estimate_all(&data, self::estimator(estimator)?).map_err(err)?;
    let truth: Vec<diffnet::EdgeSet> = truth.iter().map(|t| t.inner.clone()).collect();
    let params = PenaltyParams::new(lambda1, 0.0).map_err(err)?;
    let curve = py
        .detach(|| sweep_lambda2(&corrs, &params, &lambda2_grid, &truth))
        .map_err(err)?;
    curve
        .points
        .iter()
        .map(|pt| {
            let d = PyDict::new(py);
            d.set_item("lambda2", pt.value)?;
            d.set_item("precision", pt.precision)?;
            d.set_item("recall", pt.recall)?;
            d.set_item("n_discoveries", pt.n_discoveries)?;
            Ok(d)
        })
        .collect()
}

/// Permutation-split FDR estimate at one setting.
#[pyfunction]
#[pyo3(signature = (samples, lambda1, lambda2, n_splits = 20, seed = 0, estimator = "kendall_sine"))]
fn fdr<'py>(
    py: Python<'py>,
    samples: Vec<Vec<Vec<f64>>>,
    lambda1: f64,
    lambda2: f64,
    n_splits: usize,
    seed: u64,
    estimator: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let data = self::samples(samples, None)?;
    let kind = self::estimator(estimator)?;
    let params = PenaltyParams::new(lambda1, lambda2).map_err(err)?;
    let e = py
        .detach(|| estimate_fdr(&data, &params, kind, n_splits, seed))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("fdr_hat", e.fdr_hat)?;
    d.set_item("n_discoveries", e.real_discovery_count)?;
    d.set_item("null_discovery_counts", e.null_discovery_counts)?;
    Ok(d)
}

/// Bootstrap difference frequencies under independent learning, keyed by
/// node index pair.
#[pyfunction]
#[pyo3(signature = (samples, lambda1, n_bootstraps = 100, seed = 0, estimator = "kendall_sine"))]
fn bootstrap<'py>(
    py: Python<'py>,
    samples: Vec<Vec<Vec<f64>>>,
    lambda1: f64,
    n_bootstraps: usize,
    seed: u64,
    estimator: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let data = self::samples(samples, None)?;
    let kind = self::estimator(estimator)?;
    let params = PenaltyParams::new(lambda1, 0.0).map_err(err)?;
    let r = py
        .detach(|| bootstrap_differences(&data, &params, kind, n_bootstraps, seed))
        .map_err(err)?;
    let d = PyDict::new(py);
    for (&(i, j), &f) in &r.frequencies {
        d.set_item((i, j), f)?;
    }
    Ok(d)
}

/// Runs a harness experiment from a TOML config; returns written file paths.
#[pyfunction]
#[pyo3(signature = (config_toml, output_dir = None))]
fn run_experiment(py: Python<'_>, config_toml: &str, output_dir: Option<PathBuf>) -> PyResult<Vec<PathBuf>> {
    let mut config = ExperimentConfig::from_toml_str(config_toml).map_err(err)?;
    if let Some(dir) = output_dir {
        config.output_dir = dir;
    }
    let report = py.detach(|| run_experiment_rs(&config)).map_err(err)?;
    Ok(report.artifacts.iter().map(|a| report.output_dir.join(a)).collect())
}

#[pymodule]
fn pydiffnet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEdgeSet>()?;
    m.add_class::<PyJglSolution>()?;
    m.add_class::<PySyntheticData>()?;
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(soft_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(prox_group_lasso, m)?)?;
    m.add_function(wrap_pyfunction!(differences, m)?)?;
    m.add_function(wrap_pyfunction!(confusion, m)?)?;
    m.add_function(wrap_pyfunction!(solve_jgl, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(fdr, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
