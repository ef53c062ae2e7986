use serde::{Deserialize, Serialize};

use super::{check_inputs, Estimator, EstimatorError, Result};
use crate::network::{MeasurementSystem, PathTable};
use crate::solver::{Sense, Status};

/// Upper VMT bound: finite, or unbounded because some paths cross no measured link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum VmtUpper {
    Bounded {
        value: f64,
        x: Vec<f64>,
    },
    /// Columns that are invisible to every measurement but have positive length.
    Unbounded {
        paths: Vec<usize>,
    },
}

impl VmtUpper {
    pub fn value(&self) -> Option<f64> {
        match self {
            VmtUpper::Bounded { value, .. } => Some(*value),
            VmtUpper::Unbounded { .. } => None,
        }
    }

    pub fn x(&self) -> Option<&[f64]> {
        match self {
            VmtUpper::Bounded { x, .. } => Some(x),
            VmtUpper::Unbounded { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmtBounds {
    pub lower: f64,
    pub x_min: Vec<f64>,
    pub upper: VmtUpper,
}

/// Lower and upper bounds on `v^T x` over all nonnegative allocations with `A x = y`.
///
/// `lengths` has one entry per system column. With unit lengths the bounds
/// are on the number of vehicles.
pub fn vmt_bounds(
    ms: &MeasurementSystem,
    pt: &PathTable,
    y: &[f64],
    lengths: &[f64],
) -> Result<VmtBounds> {
    Estimator::default().vmt_bounds(ms, pt, y, lengths)
}

impl Estimator {
    pub fn vmt_bounds(
        &self,
        ms: &MeasurementSystem,
        pt: &PathTable,
        y: &[f64],
        lengths: &[f64],
    ) -> Result<VmtBounds> {
        check_inputs(ms, pt, y, true)?;
        if lengths.len() != ms.ncols() {
            return Err(EstimatorError::DimensionMismatch(format!(
                "{} lengths for {} columns",
                lengths.len(),
                ms.ncols()
            )));
        }
        if let Some(i) = lengths.iter().position(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(EstimatorError::InvalidParameter(format!(
                "length {i} must be >= 0, got {}",
                lengths[i]
            )));
        }

        let low = self.lp(ms, y, lengths.to_vec(), Sense::Minimize)?;

        let invisible: Vec<usize> = (0..ms.ncols())
            .filter(|&j| lengths[j] > 0.0 && (0..ms.nrows()).all(|i| ms.matrix[(i, j)] == 0.0))
            .collect();
        let upper = if !invisible.is_empty() {
            VmtUpper::Unbounded { paths: invisible }
        } else {
            match self.lp(ms, y, lengths.to_vec(), Sense::Maximize) {
                Ok(s) => VmtUpper::Bounded {
                    value: s.objective,
                    x: s.x,
                },
                Err(EstimatorError::Unbounded) => VmtUpper::Unbounded { paths: Vec::new() },
                Err(e) => return Err(e),
            }
        };
        debug_assert_eq!(low.status, Status::Optimal);
        Ok(VmtBounds {
            lower: low.objective,
            x_min: low.x,
            upper,
        })
    }
}
