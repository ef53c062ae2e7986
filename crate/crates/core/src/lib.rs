//! Compressive origin-destination estimation.
//!
//! Recovers sparse path-flow allocations (OD flows and path splits) from
//! link counts by nonnegative ℓ1 minimization and its noisy, weighted and
//! reweighted variants, with VMT bounds and a Monte Carlo experiment harness.

pub mod cli;
pub mod estimator;
pub mod experiments;
pub mod network;
pub mod solver;
