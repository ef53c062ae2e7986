//! Command-line front end.
//!
//! Every command that writes a file also writes `<output>.manifest.json`
//! beside it. `code-od replay <manifest>` re-runs the recorded command and
//! reproduces the output byte for byte.
//!
//! Exit codes: 0 success, 2 usage, 3 parse or validation failure,
//! 4 infeasible or unbounded program, 5 iteration limit.

mod commands;
mod files;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::EstimatorError;
use crate::experiments::{ExperimentError, VmtCriterion};
use crate::network::io::FormatError;
use crate::network::NetworkError;

pub use files::{to_json_sig, RunManifest};

#[derive(Debug, Parser)]
#[command(
    name = "code-od",
    version,
    about = "Sparse OD estimation from link counts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Enumerate plausible paths for OD pairs and write a path file.
    Enumerate(EnumerateArgs),
    /// Estimate the path allocation from link counts.
    Estimate(EstimateArgs),
    /// Bound vehicle-miles traveled over all allocations consistent with the counts.
    Vmt(VmtArgs),
    /// Noiseless recovery-rate sweep over measurement counts.
    Sweep(SweepArgs),
    /// Error distributions of the noise-aware ℓ1 and ℓ2 programs.
    NoisyCdf(NoisyCdfArgs),
    /// Recovery rates and bound ratios of the VMT programs.
    VmtSweep(VmtSweepArgs),
    /// Exact and bounded fractions of few-turn paths on a square grid.
    Grid(GridArgs),
    /// Export a built-in fixture as network and path files.
    Fixture(FixtureArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct EnumerateArgs {
    /// Network file or fixture name (fig1, fig2, nguyen).
    #[arg(long)]
    pub network: String,
    /// OD pair as `origin-destination`; repeatable. Defaults to a fixture's pairs.
    #[arg(long = "od")]
    pub od: Vec<String>,
    #[arg(long)]
    pub max_links: Option<usize>,
    /// Needs node coordinates in the network file.
    #[arg(long)]
    pub max_turns: Option<usize>,
    /// Maximum length relative to the shortest path of the pair.
    #[arg(long)]
    pub max_length_ratio: Option<f64>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    L1,
    L2,
    L1Noisy,
    L2Noisy,
    #[value(alias = "weighted-l1")]
    Weighted,
    #[value(alias = "reweighted-l1")]
    Reweighted,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    /// Network file or fixture name.
    #[arg(long)]
    pub network: String,
    /// Path file or fixture name; defaults to the fixture's paths.
    #[arg(long)]
    pub paths: Option<String>,
    /// CSV with header `link_id,count`, or `link_id,time,count` with --dynamic.
    #[arg(long)]
    pub measurements: PathBuf,
    #[arg(long, value_enum, default_value = "l1")]
    pub method: MethodArg,
    /// Ball radius for the noisy methods.
    #[arg(long, value_parser = parse_nonneg)]
    pub delta: Option<f64>,
    /// JSON array of positive per-column weights (weighted method).
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Number of solves for the reweighted method.
    #[arg(long, default_value_t = crate::estimator::DEFAULT_REWEIGHT_ITERS)]
    pub iters: usize,
    /// Absolute reweighting offset; default is 1e-3 times the largest initial entry.
    #[arg(long, value_parser = parse_positive)]
    pub epsilon: Option<f64>,
    /// Build the time-expanded system from timed counts.
    #[arg(long)]
    pub dynamic: bool,
    /// Count times to use with --dynamic; defaults to every time in the file.
    #[arg(long, value_delimiter = ',', requires = "dynamic")]
    pub times: Option<Vec<i64>>,
    /// JSON array with the true allocation; adds a recovery report.
    #[arg(long, conflicts_with = "dynamic")]
    pub truth: Option<PathBuf>,
    /// Relative tolerance of the recovery report.
    #[arg(long, default_value_t = crate::experiments::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct VmtArgs {
    #[arg(long)]
    pub network: String,
    #[arg(long)]
    pub paths: Option<String>,
    /// CSV with header `link_id,count`.
    #[arg(long)]
    pub measurements: PathBuf,
    /// JSON array of per-path lengths; defaults to the network link lengths.
    #[arg(long, conflicts_with = "unit")]
    pub lengths: Option<PathBuf>,
    /// Unit lengths: bound the number of vehicles.
    #[arg(long)]
    pub unit: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[command(group(ArgGroup::new("truths").required(true).args(["support", "sparsity"])))]
pub struct SweepArgs {
    #[arg(long, default_value = "fig2")]
    pub network: String,
    #[arg(long)]
    pub paths: Option<String>,
    /// Fixed support as 1-based path numbers, e.g. `5,9,13`.
    #[arg(long)]
    pub support: Option<IntList>,
    /// Random supports of these sizes, e.g. `3,4,5`.
    #[arg(long)]
    pub sparsity: Option<IntList>,
    /// Measurement counts, e.g. `1..10` or `4,6,8`.
    #[arg(long, default_value = "1..10")]
    pub m: IntList,
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    #[arg(long, env = "CODE_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::experiments::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct NoisyCdfArgs {
    #[arg(long, default_value = "fig2")]
    pub network: String,
    #[arg(long)]
    pub paths: Option<String>,
    /// Fixed support as 1-based path numbers.
    #[arg(long)]
    pub support: IntList,
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    /// Noise standard deviation.
    #[arg(long, value_parser = parse_nonneg)]
    pub nu: f64,
    /// Ball radius; `nu * sqrt(m)` when omitted.
    #[arg(long, value_parser = parse_nonneg)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, env = "CODE_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VmtCriterionArg {
    Allocation,
    Value,
}

impl From<VmtCriterionArg> for VmtCriterion {
    fn from(c: VmtCriterionArg) -> Self {
        match c {
            VmtCriterionArg::Allocation => VmtCriterion::Allocation,
            VmtCriterionArg::Value => VmtCriterion::Value,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct VmtSweepArgs {
    #[arg(long, default_value = "nguyen")]
    pub network: String,
    #[arg(long)]
    pub paths: Option<String>,
    #[arg(long, default_value = "10,14,18,22,26,30,34,38")]
    pub m: IntList,
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    #[arg(long, env = "CODE_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Absolute recovery tolerance.
    #[arg(long, default_value_t = crate::experiments::VMT_TOL)]
    pub tol: f64,
    /// `allocation`: optimizer within tol of the truth; `value`: bound within tol of the true VMT.
    #[arg(long, value_enum, default_value = "allocation")]
    pub criterion: VmtCriterionArg,
    /// JSON array of per-path lengths; defaults to the network link lengths.
    #[arg(long, conflicts_with = "unit")]
    pub lengths: Option<PathBuf>,
    #[arg(long)]
    pub unit: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct GridArgs {
    /// Total steps on the grid (even), e.g. `50` or `10,20,30`.
    #[arg(long, default_value = "50")]
    pub n: IntList,
    /// Turn fractions in (0, 0.5).
    #[arg(long, default_value = "0.1,0.2")]
    pub alpha: FloatList,
    /// CSV output; the table is printed to stdout either way.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct FixtureArgs {
    /// fig1, fig2 or nguyen.
    pub name: String,
    #[arg(long)]
    pub network_out: PathBuf,
    #[arg(long)]
    pub paths_out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write to this path instead of the recorded output.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Comma-separated integers; `a..b` expands to the inclusive range.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntList(pub Vec<usize>);

impl FromStr for IntList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut out = Vec::new();
        for item in s.split(',').map(str::trim) {
            if let Some((a, b)) = item.split_once("..") {
                let a: usize = a
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad range start in {item:?}"))?;
                let b: usize = b
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad range end in {item:?}"))?;
                if a > b {
                    return Err(format!("empty range {item:?}"));
                }
                out.extend(a..=b);
            } else {
                out.push(
                    item.parse()
                        .map_err(|_| format!("not a nonnegative integer: {item:?}"))?,
                );
            }
        }
        Ok(IntList(out))
    }
}

impl fmt::Display for IntList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FloatList(pub Vec<f64>);

impl FromStr for FloatList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("not a number: {v:?}"))
            })
            .collect::<std::result::Result<_, _>>()
            .map(FloatList)
    }
}

fn parse_nonneg(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be finite and >= 0, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_positive(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be finite and > 0, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("unbounded: {0}")]
    Unbounded(String),
    #[error("iteration limit: {0}")]
    IterationLimit(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Invalid(_) | CliError::Io { .. } => 3,
            CliError::Infeasible(_) | CliError::Unbounded(_) => 4,
            CliError::IterationLimit(_) => 5,
        }
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::Infeasible => CliError::Infeasible(e.to_string()),
            EstimatorError::Unbounded => CliError::Unbounded(e.to_string()),
            EstimatorError::IterationLimit(_) => CliError::IterationLimit(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Estimator(inner) => inner.into(),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Runs one command.
pub fn run(cmd: Command) -> Result<()> {
    commands::run(cmd)
}
