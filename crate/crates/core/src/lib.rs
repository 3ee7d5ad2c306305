//! Differential dependency-network analysis.
//!
//! Learns one sparse precision matrix per condition with the joint graphical
//! lasso, where a similarity bias `λ2` trades differential recall for
//! differential precision, and provides the tooling to measure that tradeoff:
//! a synthetic benchmark generator, confusion accounting, a bootstrap
//! baseline, permutation-split FDR estimates and an experiment harness.

pub mod baselines;
pub mod correlation;
pub mod diffnet;
pub mod error;
pub mod fdr;
pub mod glasso;
pub mod harness;
pub mod jgl;
pub mod linalg;
pub mod rng;
pub mod synthetic;

pub use correlation::{estimate_correlation, kendall_tau, CorrelationMatrix, EstimatorKind, SampleMatrix};
pub use diffnet::{ConfusionCounts, EdgeSet, PrCurve};
pub use error::{Error, Result};
pub use jgl::{solve_jgl, PenaltyParams, PrecisionMatrixSet};
