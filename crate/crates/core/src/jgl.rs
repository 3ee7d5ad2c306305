//! Joint graphical lasso with the group penalty, solved by ADMM.
//!
//! Maximizes, over positive-definite `Θ_1..Θ_K`,
//!
//! ```text
//! Σ_k [log det Θ_k − tr(Σ_k Θ_k)]
//!   − λ1 Σ_{i≠j} [(1 − λ2) Σ_k |θ_k,ij| + λ2 (Σ_k θ_k,ij²)^½]
//! ```
//!
//! `λ1` sets the overall sparsity and `λ2 ∈ [0, 1]` the bias toward a shared
//! support: `λ2 = 0` decouples the conditions, `λ2 = 1` forces identical
//! supports.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::linalg;

/// How each condition's likelihood term is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Every condition counts once.
    #[default]
    Unweighted,
    /// Each condition's term is multiplied by its sample count.
    SampleCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub rho: f64,
    pub max_iters: usize,
    pub tol: f64,
    #[serde(default)]
    pub weighting: Weighting,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        PenaltyParams {
            lambda1: 0.0,
            lambda2: 0.0,
            rho: 1.0,
            max_iters: 500,
            tol: 1e-5,
            weighting: Weighting::Unweighted,
        }
    }
}

impl PenaltyParams {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        let p = PenaltyParams {
            lambda1,
            lambda2,
            ..Default::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_lambdas(self, lambda1: f64, lambda2: f64) -> Self {
        PenaltyParams {
            lambda1,
            lambda2,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return bad(format!("lambda1 must be >= 0, got {}", self.lambda1));
        }
        if !(0.0..=1.0).contains(&self.lambda2) {
            return bad(format!("lambda2 must lie in [0, 1], got {}", self.lambda2));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be > 0, got {}", self.rho));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be > 0, got {}", self.tol));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual)
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverTrace {
    pub objective: Vec<f64>,
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
}

impl SolverTrace {
    pub fn len(&self) -> usize {
        self.objective.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objective.is_empty()
    }

    fn push(&mut self, objective: f64, r: Residuals) {
        self.objective.push(objective);
        self.primal.push(r.primal);
        self.dual.push(r.dual);
    }
}

#[derive(Debug, Clone)]
pub struct PrecisionMatrixSet {
    /// Θ-iterate values, zeroed wherever the consensus variable is zero.
    pub thetas: Vec<DMatrix<f64>>,
    /// The consensus (sparse) iterate the support is read from.
    pub consensus: Vec<DMatrix<f64>>,
    pub params: PenaltyParams,
    pub converged: bool,
    pub iterations: usize,
    pub final_residuals: Residuals,
    pub trace: SolverTrace,
}

impl PrecisionMatrixSet {
    pub fn n_conditions(&self) -> usize {
        self.thetas.len()
    }
}

pub fn soft_threshold(x: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    x.signum() * (x.abs() - t).max(0.0)
}

/// Proximal operator of `t1‖x‖₁ + t2‖x‖₂`.
///
/// Soft-thresholds every coordinate by `t1`, then shrinks the whole vector
/// toward zero by `t2` in Euclidean norm.
pub fn prox_group_lasso(v: &[f64], t1: f64, t2: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    prox_group_lasso_in_place(&mut out, t1, t2);
    out
}

fn prox_group_lasso_in_place(v: &mut [f64], t1: f64, t2: f64) {
    for x in v.iter_mut() {
        *x = soft_threshold(*x, t1);
    }
    if t2 == 0.0 {
        return;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= t2 {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else {
        let scale = 1.0 - t2 / norm;
        v.iter_mut().for_each(|x| *x *= scale);
    }
}

fn condition_weights(corrs: &[CorrelationMatrix], weighting: Weighting) -> Vec<f64> {
    match weighting {
        Weighting::Unweighted => vec![1.0; corrs.len()],
        Weighting::SampleCounts => corrs.iter().map(|c| c.n_samples as f64).collect(),
    }
}

fn penalty(thetas: &[DMatrix<f64>], lambda1: f64, lambda2: f64) -> f64 {
    if lambda1 == 0.0 {
        return 0.0;
    }
    let p = thetas[0].nrows();
    let mut total = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i == j {
                continue;
            }
            let l1: f64 = thetas.iter().map(|t| t[(i, j)].abs()).sum();
            let l2: f64 = thetas.iter().map(|t| t[(i, j)].powi(2)).sum::<f64>().sqrt();
            total += (1.0 - lambda2) * l1 + lambda2 * l2;
        }
    }
    lambda1 * total
}

/// The (maximization) objective at `thetas`. Larger is better.
pub fn objective_value(
    thetas: &[DMatrix<f64>],
    corrs: &[CorrelationMatrix],
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    objective_weighted(thetas, corrs, lambda1, lambda2, Weighting::Unweighted)
}

pub fn objective_weighted(
    thetas: &[DMatrix<f64>],
    corrs: &[CorrelationMatrix],
    lambda1: f64,
    lambda2: f64,
    weighting: Weighting,
) -> Result<f64> {
    check_dims(corrs)?;
    if thetas.len() != corrs.len() {
        return Err(Error::DimensionMismatch {
            expected: corrs.len(),
            got: thetas.len(),
        });
    }
    let weights = condition_weights(corrs, weighting);
    let mut likelihood = 0.0;
    for (k, (theta, corr)) in thetas.iter().zip(corrs).enumerate() {
        if theta.shape() != corr.values.shape() {
            return Err(Error::DimensionMismatch {
                expected: corr.dim(),
                got: theta.nrows(),
            });
        }
        let log_det = linalg::log_det_pd(theta).map_err(|_| Error::NotPositiveDefinite {
            context: format!(" (condition {k})"),
        })?;
        likelihood += weights[k] * (log_det - linalg::trace_product(&corr.values, theta));
    }
    Ok(likelihood - penalty(thetas, lambda1, lambda2))
}

fn check_dims(corrs: &[CorrelationMatrix]) -> Result<usize> {
    let first = corrs.first().ok_or(Error::TooSmall {
        what: "conditions",
        min: 1,
        got: 0,
    })?;
    let p = first.dim();
    for c in corrs {
        if !c.values.is_square() || c.dim() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: c.dim(),
            });
        }
    }
    Ok(p)
}

/// Closed-form minimizer of `w(−log det Θ + tr(ΣΘ)) + (ρ/2)‖Θ − A‖²_F`.
fn theta_update(target: &DMatrix<f64>, sigma: &DMatrix<f64>, rho: f64, weight: f64) -> Result<DMatrix<f64>> {
    let m = target * rho - sigma * weight;
    let eig = linalg::eigen(&m)?;
    let values = eig.eigenvalues.iter().map(|&d| {
        let root = (d * d + 4.0 * rho * weight).sqrt();
        if d >= 0.0 {
            (d + root) / (2.0 * rho)
        } else {
            // same root, written without cancellation
            2.0 * weight / (root - d)
        }
    });
    Ok(linalg::reconstruct(&eig.eigenvectors, values))
}

fn frobenius_sum(ms: &[DMatrix<f64>]) -> f64 {
    ms.iter().map(|m| m.norm()).sum()
}

/// `Σ_k ‖a_k − b_k‖_F`
fn frobenius_diff_sum(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).sum()
}

struct Iterate {
    theta: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
}

/// Solves the joint problem for all conditions at once.
///
/// Starts from `Θ = Z = I`, `U = 0` and stops once both scaled residuals are
/// below `params.tol`. On hitting `max_iters` the iterate with the smallest
/// residual is returned with `converged = false`.
pub fn solve_jgl(corrs: &[CorrelationMatrix], params: &PenaltyParams) -> Result<PrecisionMatrixSet> {
    params.validate()?;
    let p = check_dims(corrs)?;
    for c in corrs {
        if !linalg::is_finite(&c.values) {
            return Err(Error::InvalidParameter("correlation matrix has non-finite entries".into()));
        }
    }
    let k_count = corrs.len();
    let rho = params.rho;
    let weights = condition_weights(corrs, params.weighting);
    let t1 = params.lambda1 * (1.0 - params.lambda2) / rho;
    let t2 = params.lambda1 * params.lambda2 / rho;

    let mut theta = vec![DMatrix::<f64>::identity(p, p); k_count];
    let mut z = theta.clone();
    let mut u = vec![DMatrix::<f64>::zeros(p, p); k_count];
    let mut trace = SolverTrace::default();
    let mut best: Option<(Residuals, usize, Iterate)> = None;
    let mut group = vec![0.0; k_count];

    for iter in 1..=params.max_iters {
        theta = (0..k_count)
            .into_par_iter()
            .map(|k| theta_update(&(&z[k] - &u[k]), &corrs[k].values, rho, weights[k]))
            .collect::<Result<Vec<_>>>()?;
        if theta.iter().any(|t| !linalg::is_finite(t)) {
            return Err(Error::SolverDiverged { iteration: iter });
        }

        let z_prev = std::mem::take(&mut z);
        z = theta.iter().zip(&u).map(|(t, u)| t + u).collect();
        for i in 0..p {
            for j in (i + 1)..p {
                for k in 0..k_count {
                    group[k] = z[k][(i, j)];
                }
                prox_group_lasso_in_place(&mut group, t1, t2);
                for k in 0..k_count {
                    z[k][(i, j)] = group[k];
                    z[k][(j, i)] = group[k];
                }
            }
        }

        for k in 0..k_count {
            u[k] += &theta[k] - &z[k];
        }

        let primal = frobenius_diff_sum(&theta, &z) / guard(frobenius_sum(&theta));
        let dual = rho * frobenius_diff_sum(&z, &z_prev) / guard(frobenius_sum(&u));
        let residuals = Residuals { primal, dual };
        if !primal.is_finite() || !dual.is_finite() {
            return Err(Error::SolverDiverged { iteration: iter });
        }
        trace.push(
            objective_at_iterate(&theta, corrs, params, &weights),
            residuals,
        );

        if residuals.max() < params.tol {
            return finish(theta, z, *params, true, iter, residuals, trace);
        }
        if best.as_ref().is_none_or(|(r, _, _)| residuals.max() < r.max()) {
            best = Some((
                residuals,
                iter,
                Iterate {
                    theta: theta.clone(),
                    z: z.clone(),
                },
            ));
        }
    }

    let (residuals, _, it) = best.expect("max_iters > 0");
    log::warn!(
        "joint graphical lasso did not converge in {} iterations (best residual {:.3e})",
        params.max_iters,
        residuals.max()
    );
    let iterations = params.max_iters;
    finish(it.theta, it.z, *params, false, iterations, residuals, trace)
}

fn guard(v: f64) -> f64 {
    if v == 0.0 {
        1.0
    } else {
        v
    }
}

fn objective_at_iterate(
    theta: &[DMatrix<f64>],
    corrs: &[CorrelationMatrix],
    params: &PenaltyParams,
    weights: &[f64],
) -> f64 {
    let likelihood: f64 = theta
        .iter()
        .zip(corrs)
        .zip(weights)
        .map(|((t, c), w)| {
            linalg::log_det_pd(t).unwrap_or(f64::NEG_INFINITY) * w
                - w * linalg::trace_product(&c.values, t)
        })
        .sum();
    likelihood - penalty(theta, params.lambda1, params.lambda2)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    theta: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
    params: PenaltyParams,
    converged: bool,
    iterations: usize,
    residuals: Residuals,
    trace: SolverTrace,
) -> Result<PrecisionMatrixSet> {
    let mut thetas = Vec::with_capacity(theta.len());
    for (k, (t, zk)) in theta.into_iter().zip(&z).enumerate() {
        let masked = t.zip_map(zk, |tv, zv| if zv == 0.0 { 0.0 } else { tv });
        let out = if masked.clone().cholesky().is_some() {
            masked
        } else if zk.clone().cholesky().is_some() {
            log::warn!("condition {k}: masked iterate is not positive definite, reporting the consensus iterate");
            zk.clone()
        } else {
            return Err(Error::NotPositiveDefinite {
                context: format!(" (solver output for condition {k})"),
            });
        };
        thetas.push(out);
    }
    Ok(PrecisionMatrixSet {
        thetas,
        consensus: z,
        params,
        converged,
        iterations,
        final_residuals: residuals,
        trace,
    })
}
