use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::estimator::{Estimator, EstimatorError};
use crate::network::{build_static_incidence, LinkId};

use super::recovery::{check_recovery, relative_error, Criterion, RecoveryCheck};
use super::sampling::{add_noise, first_measured, sample_allocation, sample_support};
use super::{ExperimentError, Fixture, Result, TrialRng};

pub const DEFAULT_FLOW_RANGE: (f64, f64) = (1.0, 100.0);
pub const DEFAULT_TOL: f64 = 1e-6;
pub const VMT_TOL: f64 = 1e-3;

/// Which allocations a sweep draws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportSpec {
    /// One fixed support (0-based path indices); only the values are random.
    Fixed(Vec<usize>),
    /// A fresh uniform support of each listed size in every trial.
    Random(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub support: SupportSpec,
    pub m_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub flow_range: (f64, f64),
    pub tol: f64,
}

impl SweepConfig {
    pub fn new(support: SupportSpec, m_values: Vec<usize>, trials: usize, seed: u64) -> Self {
        SweepConfig {
            support,
            m_values,
            trials,
            seed,
            flow_range: DEFAULT_FLOW_RANGE,
            tol: DEFAULT_TOL,
        }
    }
}

/// Success counts at one `(S, M)` grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub s: usize,
    pub m: usize,
    pub trials: usize,
    pub path: usize,
    pub od: usize,
    pub total: usize,
    /// Trials whose solve failed (counted as failures under every criterion).
    pub solver_failures: usize,
}

impl SweepPoint {
    pub fn successes(&self, c: Criterion) -> usize {
        match c {
            Criterion::Path => self.path,
            Criterion::Od => self.od,
            Criterion::Total => self.total,
        }
    }

    pub fn rate(&self, c: Criterion) -> f64 {
        self.successes(c) as f64 / self.trials as f64
    }

    /// Normal-approximation standard error `sqrt(p (1 - p) / trials)`.
    pub fn stderr(&self, c: Criterion) -> f64 {
        let p = self.rate(c);
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub seed: u64,
    pub points: Vec<SweepPoint>,
}

impl RecoveryReport {
    pub fn point(&self, s: usize, m: usize) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.s == s && p.m == m)
    }
}

fn check_m_values(m_values: &[usize], links: usize) -> Result<()> {
    if m_values.is_empty() {
        return Err(ExperimentError::InvalidConfig(
            "no measurement counts given".into(),
        ));
    }
    match m_values.iter().find(|&&m| m == 0 || m > links) {
        Some(&m) => Err(ExperimentError::MOutOfRange { m, links }),
        None => Ok(()),
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(ExperimentError::InvalidConfig(
            "trials must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Noiseless ℓ1 recovery rates over a grid of measurement counts.
///
/// Trial `t` for sparsity `S` uses stream `(seed, S, t)`: it draws the support
/// (if random), the allocation, then a permutation of all links. The measured
/// set for each `M` is the first `M` links of that permutation, so within a
/// trial the sets are nested in `M`.
pub fn run_recovery_sweep(fx: &Fixture, cfg: &SweepConfig) -> Result<RecoveryReport> {
    let links = fx.network.link_ids();
    let n = fx.paths.len();
    check_m_values(&cfg.m_values, links.len())?;
    check_trials(cfg.trials)?;
    let levels: Vec<(usize, Option<&[usize]>)> = match &cfg.support {
        SupportSpec::Fixed(s) => {
            if s.is_empty() {
                return Err(ExperimentError::SOutOfRange { s: 0, n });
            }
            if let Some(&bad) = s.iter().find(|&&j| j >= n) {
                return Err(ExperimentError::InvalidSupport(bad));
            }
            vec![(s.len(), Some(s.as_slice()))]
        }
        SupportSpec::Random(levels) => {
            if levels.is_empty() {
                return Err(ExperimentError::InvalidConfig(
                    "no sparsity levels given".into(),
                ));
            }
            if let Some(&s) = levels.iter().find(|&&s| s == 0 || s > n) {
                return Err(ExperimentError::SOutOfRange { s, n });
            }
            levels.iter().map(|&s| (s, None)).collect()
        }
    };

    let est = Estimator::default();
    let mut points = Vec::new();
    for (s, fixed) in levels {
        let outcomes: Vec<Vec<Option<RecoveryCheck>>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| -> Result<Vec<Option<RecoveryCheck>>> {
                let mut rng = TrialRng::new(cfg.seed, s as u64, t as u64);
                let support = match fixed {
                    Some(sup) => sup.to_vec(),
                    None => sample_support(n, s, &mut rng)?,
                };
                let truth = sample_allocation(&fx.paths, &support, &mut rng, cfg.flow_range)?;
                let order = rng.permutation(links.len());
                cfg.m_values
                    .iter()
                    .map(|&m| {
                        let measured = first_measured(&links, &order, m);
                        let ms = build_static_incidence(&fx.network, &fx.paths, &measured)?;
                        let y = ms.apply(&truth);
                        match est.l1(&ms, &fx.paths, &y) {
                            Ok(r) => Ok(Some(check_recovery(&r.x, &truth, &fx.paths, cfg.tol))),
                            Err(e) if solve_failure(&e) => Ok(None),
                            Err(e) => Err(e.into()),
                        }
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        for (i, &m) in cfg.m_values.iter().enumerate() {
            let mut p = SweepPoint {
                s,
                m,
                trials: cfg.trials,
                path: 0,
                od: 0,
                total: 0,
                solver_failures: 0,
            };
            for trial in &outcomes {
                match trial[i] {
                    Some(c) => {
                        p.path += usize::from(c.path);
                        p.od += usize::from(c.od);
                        p.total += usize::from(c.total);
                    }
                    None => p.solver_failures += 1,
                }
            }
            points.push(p);
        }
    }
    Ok(RecoveryReport {
        seed: cfg.seed,
        points,
    })
}

fn solve_failure(e: &EstimatorError) -> bool {
    matches!(
        e,
        EstimatorError::Infeasible | EstimatorError::Unbounded | EstimatorError::IterationLimit(_)
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyConfig {
    pub support: Vec<usize>,
    pub m: usize,
    pub nu: f64,
    /// Ball radius; `nu * sqrt(M)` when absent.
    pub delta: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub flow_range: (f64, f64),
}

impl NoisyConfig {
    pub fn new(support: Vec<usize>, m: usize, nu: f64, trials: usize, seed: u64) -> Self {
        NoisyConfig {
            support,
            m,
            nu,
            delta: None,
            trials,
            seed,
            flow_range: DEFAULT_FLOW_RANGE,
        }
    }

    pub fn effective_delta(&self) -> f64 {
        self.delta.unwrap_or(self.nu * (self.m as f64).sqrt())
    }
}

/// Relative errors of the noisy ℓ1 and ℓ2 programs on identical data.
///
/// Errors are sorted ascending. A trial whose solve fails contributes `+inf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyCdf {
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
    pub delta: f64,
}

/// Empirical quantile (lower interpolation-free order statistic) of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let i = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[i]
}

/// Noisy recovery: per trial, draw an allocation on the fixed support and a
/// measured set of `m` links, add `N(0, nu^2)` noise, and solve both programs.
pub fn run_noisy_cdf(fx: &Fixture, cfg: &NoisyConfig) -> Result<NoisyCdf> {
    let links = fx.network.link_ids();
    check_m_values(&[cfg.m], links.len())?;
    check_trials(cfg.trials)?;
    if !(cfg.nu >= 0.0 && cfg.nu.is_finite()) {
        return Err(ExperimentError::InvalidConfig(format!(
            "noise level must be >= 0, got {}",
            cfg.nu
        )));
    }
    let delta = cfg.effective_delta();
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(ExperimentError::InvalidConfig(format!(
            "delta must be >= 0, got {delta}"
        )));
    }
    if cfg.support.is_empty() {
        return Err(ExperimentError::SOutOfRange {
            s: 0,
            n: fx.paths.len(),
        });
    }
    let est = Estimator::default();
    let errs: Vec<(f64, f64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64)> {
            let mut rng = TrialRng::new(cfg.seed, cfg.support.len() as u64, t as u64);
            let truth = sample_allocation(&fx.paths, &cfg.support, &mut rng, cfg.flow_range)?;
            let order = rng.permutation(links.len());
            let measured = first_measured(&links, &order, cfg.m);
            let ms = build_static_incidence(&fx.network, &fx.paths, &measured)?;
            let y = add_noise(&ms.apply(&truth), cfg.nu, &mut rng);
            let err = |r: std::result::Result<
                crate::estimator::EstimationResult,
                EstimatorError,
            >| match r {
                Ok(r) => Ok(relative_error(&r.x, &truth)),
                Err(e) if solve_failure(&e) => Ok(f64::INFINITY),
                Err(e) => Err(ExperimentError::from(e)),
            };
            Ok((
                err(est.l1_noisy(&ms, &fx.paths, &y, delta))?,
                err(est.l2_noisy(&ms, &fx.paths, &y, delta))?,
            ))
        })
        .collect::<Result<_>>()?;
    let mut l1: Vec<f64> = errs.iter().map(|e| e.0).collect();
    let mut l2: Vec<f64> = errs.iter().map(|e| e.1).collect();
    l1.sort_by(f64::total_cmp);
    l2.sort_by(f64::total_cmp);
    Ok(NoisyCdf { l1, l2, delta })
}

/// What counts as a recovered VMT trial.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VmtCriterion {
    /// `||x_hat - x||_2 <= tol` for the program's optimizer.
    #[default]
    Allocation,
    /// `|v^T x_hat - v^T x| <= tol`: the bound itself is exact.
    Value,
}

impl VmtCriterion {
    pub fn as_str(self) -> &'static str {
        match self {
            VmtCriterion::Allocation => "allocation",
            VmtCriterion::Value => "value",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmtConfig {
    pub m_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub flow_range: (f64, f64),
    /// Absolute recovery tolerance.
    pub tol: f64,
    #[serde(default)]
    pub criterion: VmtCriterion,
    /// Path lengths; the fixture's own lengths when absent.
    pub lengths: Option<Vec<f64>>,
}

impl VmtConfig {
    pub fn new(m_values: Vec<usize>, trials: usize, seed: u64) -> Self {
        VmtConfig {
            m_values,
            trials,
            seed,
            flow_range: DEFAULT_FLOW_RANGE,
            tol: VMT_TOL,
            criterion: VmtCriterion::Allocation,
            lengths: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmtPoint {
    pub m: usize,
    pub trials: usize,
    pub recovered_min: usize,
    pub recovered_max: usize,
    /// Mean of `v^T x_min / v^T x` over trials where the min program missed the truth.
    pub mean_ratio_min: Option<f64>,
    /// Mean of `v^T x_max / v^T x` over trials where the max program was bounded but missed.
    pub mean_ratio_max: Option<f64>,
    pub unbounded: usize,
    /// Trials where `v^T x` fell outside `[lower - 1e-6, upper + 1e-6]`.
    pub sandwich_violations: usize,
    /// Largest `(v^T x - upper) / v^T x` or `(lower - v^T x) / v^T x` seen, for diagnostics.
    pub worst_sandwich_gap: f64,
}

impl VmtPoint {
    pub fn rate_min(&self) -> f64 {
        self.recovered_min as f64 / self.trials as f64
    }

    pub fn rate_max(&self) -> f64 {
        self.recovered_max as f64 / self.trials as f64
    }
}

struct VmtTrial {
    min_ok: bool,
    max_ok: bool,
    ratio_min: Option<f64>,
    ratio_max: Option<f64>,
    unbounded: bool,
    violation: bool,
    gap: f64,
}

/// VMT bound study: truths use exactly one random path per OD pair.
pub fn run_vmt_sweep(fx: &Fixture, cfg: &VmtConfig) -> Result<Vec<VmtPoint>> {
    let links: Vec<LinkId> = fx.network.link_ids();
    check_m_values(&cfg.m_values, links.len())?;
    check_trials(cfg.trials)?;
    let v = match &cfg.lengths {
        Some(v) if v.len() != fx.paths.len() => {
            return Err(ExperimentError::InvalidConfig(format!(
                "{} lengths for {} paths",
                v.len(),
                fx.paths.len()
            )))
        }
        Some(v) => v.clone(),
        None => fx.paths.path_lengths(&fx.network)?,
    };
    let est = Estimator::default();
    let trials: Vec<Vec<VmtTrial>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<VmtTrial>> {
            let mut rng = TrialRng::new(cfg.seed, fx.paths.num_od() as u64, t as u64);
            let support: Vec<usize> = (0..fx.paths.num_od())
                .map(|k| {
                    let paths = fx.paths.paths_of_od(k);
                    paths[rng.below(paths.len() as u64) as usize]
                })
                .collect();
            let truth = sample_allocation(&fx.paths, &support, &mut rng, cfg.flow_range)?;
            let vx: f64 = v.iter().zip(&truth).map(|(a, b)| a * b).sum();
            let order = rng.permutation(links.len());
            cfg.m_values
                .iter()
                .map(|&m| {
                    let measured = first_measured(&links, &order, m);
                    let ms = build_static_incidence(&fx.network, &fx.paths, &measured)?;
                    let y = ms.apply(&truth);
                    let b = est.vmt_bounds(&ms, &fx.paths, &y, &v)?;
                    let upper = b.upper.value();
                    let (min_ok, max_ok) = match cfg.criterion {
                        VmtCriterion::Allocation => {
                            let abs_err = |x: &[f64]| relative_error(x, &truth) * norm(&truth);
                            (
                                abs_err(&b.x_min) <= cfg.tol,
                                b.upper.x().is_some_and(|x| abs_err(x) <= cfg.tol),
                            )
                        }
                        VmtCriterion::Value => (
                            (b.lower - vx).abs() <= cfg.tol,
                            upper.is_some_and(|u| (u - vx).abs() <= cfg.tol),
                        ),
                    };
                    let violation = b.lower > vx + 1e-6 || upper.is_some_and(|u| vx > u + 1e-6);
                    let gap = ((b.lower - vx) / vx)
                        .max(upper.map_or(f64::NEG_INFINITY, |u| (vx - u) / vx));
                    Ok(VmtTrial {
                        min_ok,
                        max_ok,
                        ratio_min: (!min_ok).then(|| b.lower / vx),
                        ratio_max: if max_ok { None } else { upper.map(|u| u / vx) },
                        unbounded: upper.is_none(),
                        violation,
                        gap,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    Ok(cfg
        .m_values
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let at: Vec<&VmtTrial> = trials.iter().map(|t| &t[i]).collect();
            let mean = |vals: Vec<f64>| {
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            };
            VmtPoint {
                m,
                trials: cfg.trials,
                recovered_min: at.iter().filter(|t| t.min_ok).count(),
                recovered_max: at.iter().filter(|t| t.max_ok).count(),
                mean_ratio_min: mean(at.iter().filter_map(|t| t.ratio_min).collect()),
                mean_ratio_max: mean(at.iter().filter_map(|t| t.ratio_max).collect()),
                unbounded: at.iter().filter(|t| t.unbounded).count(),
                sandwich_violations: at.iter().filter(|t| t.violation).count(),
                worst_sandwich_gap: at.iter().map(|t| t.gap).fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect())
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
