//! Optimization engines behind every estimator.
//!
//! * [`solve_lp`]: dense two-phase revised simplex for `A x = b, x >= 0`.
//! * [`solve_cone`]: ADMM for `min f(x)` over `{x >= 0 : ||y - A x||_2 <= delta}`
//!   with a weighted-ℓ1 or ℓ2 objective.
//! * [`lp_oracle`]: exhaustive basic-solution enumeration, for testing small instances.

mod cone;
mod lp;
mod nnls;
mod oracle;
mod project;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cone::solve_cone;
pub use lp::solve_lp;
pub use nnls::nnls;
pub use oracle::lp_oracle;
pub use project::{project_ball, project_nonneg};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("instance too large for the enumeration oracle ({rows} x {cols}; limit 8 x 16)")]
    TooLarge { rows: usize, cols: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

/// `optimize c^T x` subject to `A x = b`, `x >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardLp {
    pub c: Vec<f64>,
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    pub sense: Sense,
}

impl StandardLp {
    pub fn new(c: Vec<f64>, a: DMatrix<f64>, b: Vec<f64>, sense: Sense) -> Self {
        StandardLp { c, a, b, sense }
    }

    pub(crate) fn check(&self) -> Result<(), SolverError> {
        if self.c.len() != self.a.ncols() {
            return Err(SolverError::DimensionMismatch(format!(
                "cost has {} entries, matrix has {} columns",
                self.c.len(),
                self.a.ncols()
            )));
        }
        if self.b.len() != self.a.nrows() {
            return Err(SolverError::DimensionMismatch(format!(
                "rhs has {} entries, matrix has {} rows",
                self.b.len(),
                self.a.nrows()
            )));
        }
        let finite = self
            .c
            .iter()
            .chain(self.b.iter())
            .chain(self.a.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(SolverError::InvalidInput("non-finite LP data".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConeObjective {
    /// `sum_i lambda_i x_i` (the ℓ1 norm on the nonnegative orthant).
    WeightedL1,
    /// `||x||_2`.
    L2,
}

/// `min f(x)` subject to `||y - A x||_2 <= delta`, `x >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeProblem {
    pub a: DMatrix<f64>,
    pub y: Vec<f64>,
    pub delta: f64,
    /// Per-variable positive weights for [`ConeObjective::WeightedL1`]; all ones when absent.
    pub weights: Option<Vec<f64>>,
    pub objective: ConeObjective,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub status: Status,
    pub objective: f64,
    /// `||A x - b||_inf`.
    pub residual_eq: f64,
    /// `max(0, ||y - A x||_2 - delta)`.
    pub residual_cone: f64,
    pub iterations: usize,
    /// LP only: equality-constraint multipliers of the final basis.
    pub duals: Option<Vec<f64>>,
    /// LP only: basic variable per row. Indices `>= ncols` are artificial.
    pub basis: Option<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PivotRule {
    /// Smallest-index entering and leaving variables; never cycles.
    #[default]
    Bland,
    /// Most negative reduced cost enters; Bland tie-breaking on the leaving row.
    LargestCoefficient,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Absolute feasibility tolerance on data scaled to unit max-norm.
    pub tol_feas: f64,
    /// Primal/dual residual tolerance of the cone solver.
    pub tol_cone: f64,
    pub max_iter: usize,
    /// Initial ADMM penalty; adapted by residual balancing.
    pub rho: f64,
    pub pivot_rule: PivotRule,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_feas: 1e-9,
            tol_cone: 1e-8,
            max_iter: 100_000,
            rho: 1.0,
            pivot_rule: PivotRule::Bland,
        }
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum())
        .collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
