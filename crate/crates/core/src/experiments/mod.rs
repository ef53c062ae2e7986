//! Monte Carlo harness: random sparse truths, measurement subsets, recovery sweeps.

pub mod fixtures;
pub mod grid;
pub mod output;
mod recovery;
mod rng;
mod sampling;
mod sweep;

use thiserror::Error;

use crate::estimator::EstimatorError;
use crate::network::NetworkError;

pub use fixtures::{fixture, Fixture, FIXTURE_NAMES};
pub use grid::{
    grid_path_count, grid_paths_max_turns, grid_turn_fraction, hoeffding_fraction_bound,
    turn_budget,
};
pub use recovery::{check_recovery, relative_error, Criterion, RecoveryCheck};
pub use rng::TrialRng;
pub use sampling::{
    add_noise, first_measured, sample_allocation, sample_measurements, sample_support,
};
pub use sweep::{
    quantile, run_noisy_cdf, run_recovery_sweep, run_vmt_sweep, NoisyCdf, NoisyConfig,
    RecoveryReport, SupportSpec, SweepConfig, SweepPoint, VmtConfig, VmtCriterion, VmtPoint,
    DEFAULT_FLOW_RANGE, DEFAULT_TOL, VMT_TOL,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("sparsity {s} out of range 1..={n}")]
    SOutOfRange { s: usize, n: usize },
    #[error("measurement count {m} out of range 1..={links}")]
    MOutOfRange { m: usize, links: usize },
    #[error("support index {0} is not a path")]
    InvalidSupport(usize),
    #[error("grid size {0} must be even and in 2..=60")]
    NOutOfRange(usize),
    #[error("alpha must lie in (0, 0.5), got {0}")]
    AlphaOutOfRange(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;
