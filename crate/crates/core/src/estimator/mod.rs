//! Sparse allocation estimators and VMT bounds on top of [`crate::solver`].
//!
//! Every estimator takes a measurement system, the path table that indexes
//! its columns, and the observed counts `y`, and returns an
//! [`EstimationResult`] with the allocation decoded into OD flows and splits.

mod vmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{decode_columns, MeasurementSystem, NetworkError, OdFlow, PathTable};
use crate::solver::{
    solve_cone, solve_lp, ConeObjective, ConeProblem, Sense, Solution, SolverError, SolverOptions,
    StandardLp, Status,
};

pub use vmt::{vmt_bounds, VmtBounds, VmtUpper};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("no nonnegative allocation is consistent with the counts")]
    Infeasible,
    #[error("objective is unbounded")]
    Unbounded,
    #[error("solver stopped after {0} iterations without converging")]
    IterationLimit(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("count {index} is negative ({value})")]
    NegativeCount { index: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

pub type Result<T> = std::result::Result<T, EstimatorError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    L1,
    L2,
    L1Noisy,
    L2Noisy,
    WeightedL1,
    ReweightedL1,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::L1 => "l1",
            Method::L2 => "l2",
            Method::L1Noisy => "l1-noisy",
            Method::L2Noisy => "l2-noisy",
            Method::WeightedL1 => "weighted-l1",
            Method::ReweightedL1 => "reweighted-l1",
        };
        f.write_str(s)
    }
}

/// Positive per-path weights (the diagonal of the weighting matrix).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightMatrix(Vec<f64>);

impl WeightMatrix {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if let Some(i) = lambda.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(EstimatorError::InvalidParameter(format!(
                "weight {i} must be positive, got {}",
                lambda[i]
            )));
        }
        Ok(WeightMatrix(lambda))
    }

    pub fn uniform(n: usize) -> Self {
        WeightMatrix(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for WeightMatrix {
    type Error = EstimatorError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        WeightMatrix::new(v)
    }
}

impl From<WeightMatrix> for Vec<f64> {
    fn from(w: WeightMatrix) -> Self {
        w.0
    }
}

/// Threshold below which an allocation entry counts as zero.
pub fn sparsity_epsilon(x: &[f64]) -> f64 {
    1e-8 * solver_norm_inf(x).max(1.0)
}

/// Number of entries above [`sparsity_epsilon`].
pub fn sparsity(x: &[f64]) -> usize {
    let eps = sparsity_epsilon(x);
    x.iter().filter(|&&v| v > eps).count()
}

fn solver_norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// One entry of the allocation vector with its path label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationEntry {
    pub path: usize,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub departure: Option<i64>,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub split: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub method: Method,
    pub status: Status,
    /// The recovered allocation `x`, one entry per system column.
    pub x: Vec<f64>,
    pub allocation: Vec<AllocationEntry>,
    pub od_flows: Vec<OdFlow>,
    pub splits: Vec<Option<f64>>,
    pub sparsity: usize,
    pub objective: f64,
    /// `||A x - y||_inf`.
    pub residual_inf: f64,
    /// `||A x - y||_2`.
    pub residual_l2: f64,
    pub iterations: usize,
    /// Objective of every solve, for iterated methods.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<f64>,
}

impl EstimationResult {
    fn build(
        method: Method,
        sol: Solution,
        ms: &MeasurementSystem,
        pt: &PathTable,
        y: &[f64],
    ) -> Result<Self> {
        let decoded = decode_columns(&sol.x, ms, pt)?;
        let ax = ms.apply(&sol.x);
        let r: Vec<f64> = ax.iter().zip(y).map(|(a, b)| a - b).collect();
        let allocation = ms
            .cols
            .iter()
            .zip(&sol.x)
            .zip(&decoded.splits)
            .map(|((c, &value), &split)| AllocationEntry {
                path: c.path,
                label: pt.paths()[c.path].to_string(),
                departure: c.departure,
                value,
                split,
            })
            .collect();
        Ok(EstimationResult {
            method,
            status: sol.status,
            sparsity: sparsity(&sol.x),
            allocation,
            od_flows: decoded.od_flows,
            splits: decoded.splits,
            objective: sol.objective,
            residual_inf: solver_norm_inf(&r),
            residual_l2: r.iter().map(|v| v * v).sum::<f64>().sqrt(),
            iterations: sol.iterations,
            trace: Vec::new(),
            x: sol.x,
        })
    }

    /// Total flow `sum_k f_k`.
    pub fn total_flow(&self) -> f64 {
        self.x.iter().sum()
    }
}

/// How the reweighting offset `epsilon` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReweightEpsilon {
    Absolute(f64),
    /// A multiple of `max(x0)` where `x0` is the unweighted solution.
    RelativeToInitial(f64),
}

impl Default for ReweightEpsilon {
    fn default() -> Self {
        ReweightEpsilon::RelativeToInitial(1e-3)
    }
}

pub const DEFAULT_REWEIGHT_ITERS: usize = 4;

/// Estimators with configurable solver options. The free functions use the defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Estimator {
    pub opts: SolverOptions,
}

impl Estimator {
    pub fn new(opts: SolverOptions) -> Self {
        Estimator { opts }
    }

    /// `min sum(x)` s.t. `A x = y`, `x >= 0`.
    pub fn l1(
        &self,
        ms: &MeasurementSystem,
        pt: &PathTable,
        y: &[f64],
    ) -> Result<EstimationResult> {
        check_inputs(ms, pt, y, true)?;
        let sol = self.lp(ms, y, vec![1.0; ms.ncols()], Sense::Minimize)?;
        EstimationResult::build(Method::L1, sol, ms, pt, y)
    }

    /// `min sum(lambda_i x_i)` s.t. `A x = y`, `x >= 0`.
    pub fn weighted_l1(
        &self,
        ms: &MeasurementSystem,
        pt: &PathTable,
        y: &[f64],
        w: &WeightMatrix,
    ) -> Result<EstimationResult> {
        check_inputs(ms, pt, y, true)?;
        if w.len() != ms.ncols() {
            return Err(EstimatorError::DimensionMismatch(format!(
                "{} weights for {} columns",
                w.len(),
                ms.ncols()
            )));
        }
        let sol = self.lp(ms, y, w.as_slice().to_vec(), Sense::Minimize)?;
        EstimationResult::build(Method::WeightedL1, sol, ms, pt, y)
    }

    /// `min ||x||_2` s.t. `A x = y`, `x >= 0`.
    pub fn l2(
        &self,
        ms: &MeasurementSystem,
        pt: &PathTable,
        y: &[f64],
    ) -> Result<EstimationResult> {
        check_inputs(ms, pt, y, true)?;
        let sol = self.cone(ms, y, 0.0, ConeObjective::L2)?;
        EstimationResult::build(Method::L2, sol, ms, pt, y)
    }

    /// `min sum(x)` s.t. `||y - A x||_2 <= delta`, `x >= 0`. Noisy `y` may be negative.
    pub fn l1_noisy(
        &self,
        ms: &MeasurementSystem,
        pt: &PathTable,
        y: &[f64],
        delta: f64,
    ) -> Result<EstimationResult> {
        check_inputs(ms, pt, y, false)?;
        check_delta(delta)?;
        let sol = self.cone(ms, y, delta, ConeObjective::WeightedL1)?;
        EstimationResult::build(Method::L1Noisy, sol, ms, pt, y)
    }

    /// `min ||x||_2` s.t. `||y - A x||_2 <= delta`, `x >= 0`.
    pub fn l2_noisy(
        &self,
        ms: &MeasurementSystem,
        pt: &PathTable,
        y: &[f64],
        delta: f64,
    ) -> Result<EstimationResult> {
        check_inputs(ms, pt, y, false)?;
        check_delta(delta)?;
        let sol = self.cone(ms, y, delta, ConeObjective::L2)?;
        EstimationResult::build(Method::L2Noisy, sol, ms, pt, y)
    }

    /// Iterated weighted ℓ1: start from the plain ℓ1 solution, then re-solve
    /// with `lambda_i = 1 / (x_i + epsilon)` until `iters` solves have run.
    pub fn reweighted_l1(
        &self,
        ms: &MeasurementSystem,
        pt: &PathTable,
        y: &[f64],
        iters: usize,
        epsilon: ReweightEpsilon,
    ) -> Result<EstimationResult> {
        if iters == 0 {
            return Err(EstimatorError::InvalidParameter(
                "iters must be at least 1".into(),
            ));
        }
        let mut res = self.l1(ms, pt, y)?;
        let eps = match epsilon {
            ReweightEpsilon::Absolute(e) => e,
            ReweightEpsilon::RelativeToInitial(f) => f * solver_norm_inf(&res.x),
        };
        let mut trace = vec![res.objective];
        let mut total_iters = res.iterations;
        if iters > 1 && !(eps > 0.0 && eps.is_finite()) {
            // Only a zero allocation gives a zero relative offset; it is already optimal.
            if solver_norm_inf(&res.x) == 0.0 {
                res.method = Method::ReweightedL1;
                res.trace = trace;
                return Ok(res);
            }
            return Err(EstimatorError::InvalidParameter(format!(
                "epsilon must be positive, got {eps}"
            )));
        }
        for _ in 1..iters {
            let w = WeightMatrix::new(res.x.iter().map(|v| 1.0 / (v + eps)).collect())?;
            res = self.weighted_l1(ms, pt, y, &w)?;
            trace.push(res.objective);
            total_iters += res.iterations;
        }
        res.method = Method::ReweightedL1;
        res.trace = trace;
        res.iterations = total_iters;
        Ok(res)
    }

    fn lp(&self, ms: &MeasurementSystem, y: &[f64], c: Vec<f64>, sense: Sense) -> Result<Solution> {
        let p = StandardLp::new(c, ms.matrix.clone(), y.to_vec(), sense);
        accept(solve_lp(&p, &self.opts)?)
    }

    fn cone(
        &self,
        ms: &MeasurementSystem,
        y: &[f64],
        delta: f64,
        objective: ConeObjective,
    ) -> Result<Solution> {
        let p = ConeProblem {
            a: ms.matrix.clone(),
            y: y.to_vec(),
            delta,
            weights: None,
            objective,
        };
        accept(solve_cone(&p, &self.opts)?)
    }
}

fn accept(sol: Solution) -> Result<Solution> {
    match sol.status {
        Status::Optimal => Ok(sol),
        Status::Infeasible => Err(EstimatorError::Infeasible),
        Status::Unbounded => Err(EstimatorError::Unbounded),
        Status::IterationLimit => Err(EstimatorError::IterationLimit(sol.iterations)),
    }
}

fn check_inputs(ms: &MeasurementSystem, pt: &PathTable, y: &[f64], nonneg: bool) -> Result<()> {
    if y.len() != ms.nrows() {
        return Err(EstimatorError::DimensionMismatch(format!(
            "{} counts for {} measured rows",
            y.len(),
            ms.nrows()
        )));
    }
    if let Some(c) = ms.cols.iter().find(|c| c.path >= pt.len()) {
        return Err(EstimatorError::DimensionMismatch(format!(
            "column refers to path {} but the table has {}",
            c.path,
            pt.len()
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(EstimatorError::InvalidParameter(format!(
            "count {i} is not finite"
        )));
    }
    if nonneg {
        if let Some(index) = y.iter().position(|&v| v < 0.0) {
            return Err(EstimatorError::NegativeCount {
                index,
                value: y[index],
            });
        }
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if delta >= 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(EstimatorError::InvalidParameter(format!(
            "delta must be finite and >= 0, got {delta}"
        )))
    }
}

pub fn estimate_l1(ms: &MeasurementSystem, pt: &PathTable, y: &[f64]) -> Result<EstimationResult> {
    Estimator::default().l1(ms, pt, y)
}

pub fn estimate_l2(ms: &MeasurementSystem, pt: &PathTable, y: &[f64]) -> Result<EstimationResult> {
    Estimator::default().l2(ms, pt, y)
}

pub fn estimate_l1_noisy(
    ms: &MeasurementSystem,
    pt: &PathTable,
    y: &[f64],
    delta: f64,
) -> Result<EstimationResult> {
    Estimator::default().l1_noisy(ms, pt, y, delta)
}

pub fn estimate_l2_noisy(
    ms: &MeasurementSystem,
    pt: &PathTable,
    y: &[f64],
    delta: f64,
) -> Result<EstimationResult> {
    Estimator::default().l2_noisy(ms, pt, y, delta)
}

pub fn estimate_weighted_l1(
    ms: &MeasurementSystem,
    pt: &PathTable,
    y: &[f64],
    w: &WeightMatrix,
) -> Result<EstimationResult> {
    Estimator::default().weighted_l1(ms, pt, y, w)
}

pub fn reweighted_l1(
    ms: &MeasurementSystem,
    pt: &PathTable,
    y: &[f64],
    iters: usize,
    epsilon: ReweightEpsilon,
) -> Result<EstimationResult> {
    Estimator::default().reweighted_l1(ms, pt, y, iters, epsilon)
}

#[cfg(test)]
mod tests;
