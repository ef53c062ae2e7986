use std::fmt::Write as _;
use std::path::Path as FsPath;

use clap::ValueEnum;
use log::{info, warn};
use serde::Serialize;

use super::files::{
    load, read_counts, read_text, read_vector, static_counts, timed_counts, to_json_sig,
    write_bytes,
};
use super::{
    CliError, Command, EnumerateArgs, EstimateArgs, GridArgs, MethodArg, NoisyCdfArgs, ReplayArgs,
    Result, RunManifest, SweepArgs, VmtArgs, VmtSweepArgs,
};
use crate::estimator::{EstimationResult, Estimator, ReweightEpsilon, VmtUpper, WeightMatrix};
use crate::experiments::output::{format_sig, write_cdf_csv, write_sweep_csv, write_vmt_csv};
use crate::experiments::{
    check_recovery, fixture, grid_path_count, grid_paths_max_turns, grid_turn_fraction,
    hoeffding_fraction_bound, quantile, relative_error, run_noisy_cdf, run_recovery_sweep,
    run_vmt_sweep, turn_budget, Fixture, NoisyConfig, RecoveryCheck, SupportSpec, SweepConfig,
    VmtConfig,
};
use crate::network::io::{network_to_json, paths_to_json};
use crate::network::{
    build_dynamic_system, build_static_incidence, enumerate_paths, NodeId, PathFilter, PathTable,
};

pub(super) fn run(cmd: Command) -> Result<()> {
    match &cmd {
        Command::Enumerate(a) => finish(&cmd, &a.output, enumerate(a)?),
        Command::Estimate(a) => finish(&cmd, &a.output, estimate(a)?),
        Command::Vmt(a) => {
            let (bytes, outcome) = vmt(a)?;
            finish(&cmd, &a.output, bytes)?;
            outcome
        }
        Command::Sweep(a) => finish(&cmd, &a.output, sweep(a)?),
        Command::NoisyCdf(a) => finish(&cmd, &a.output, noisy_cdf(a)?),
        Command::VmtSweep(a) => finish(&cmd, &a.output, vmt_sweep(a)?),
        Command::Grid(a) => {
            let table = grid(a)?;
            print!("{table}");
            match &a.output {
                Some(out) => finish(&cmd, out, table.into_bytes()),
                None => Ok(()),
            }
        }
        Command::Fixture(a) => {
            let f = fixture(&a.name)
                .ok_or_else(|| CliError::Usage(format!("unknown fixture {:?}", a.name)))?;
            write_bytes(
                &a.network_out,
                (network_to_json(&f.network) + "\n").as_bytes(),
            )?;
            write_bytes(
                &a.paths_out,
                (paths_to_json(f.paths.paths()) + "\n").as_bytes(),
            )?;
            println!(
                "{}: {} links, {} OD pairs, {} paths",
                f.name,
                f.network.links().len(),
                f.paths.num_od(),
                f.paths.len()
            );
            Ok(())
        }
        Command::Replay(a) => replay(a),
    }
}

/// Writes the output, then its manifest.
fn finish(cmd: &Command, output: &FsPath, bytes: Vec<u8>) -> Result<()> {
    write_bytes(output, &bytes)?;
    RunManifest::new(cmd).write()?;
    info!("wrote {}", output.display());
    Ok(())
}

fn replay(a: &ReplayArgs) -> Result<()> {
    let text = read_text(&a.manifest)?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| {
        CliError::Invalid(format!("{}: not a run manifest: {e}", a.manifest.display()))
    })?;
    let mut cmd = manifest.config;
    if let Some(out) = &a.output {
        match &mut cmd {
            Command::Enumerate(c) => c.output = out.clone(),
            Command::Estimate(c) => c.output = out.clone(),
            Command::Vmt(c) => c.output = out.clone(),
            Command::Sweep(c) => c.output = out.clone(),
            Command::NoisyCdf(c) => c.output = out.clone(),
            Command::VmtSweep(c) => c.output = out.clone(),
            Command::Grid(c) => c.output = Some(out.clone()),
            Command::Fixture(_) | Command::Replay(_) => {
                return Err(CliError::Usage("this manifest cannot be redirected".into()));
            }
        }
    }
    if matches!(cmd, Command::Replay(_)) {
        return Err(CliError::Invalid(
            "a manifest cannot record a replay".into(),
        ));
    }
    run(cmd)
}

fn parse_od(s: &str) -> Result<(NodeId, NodeId)> {
    let bad = || CliError::Usage(format!("OD pair must look like `1-2`, got {s:?}"));
    let (o, d) = s.split_once('-').ok_or_else(bad)?;
    Ok((
        o.trim().parse().map_err(|_| bad())?,
        d.trim().parse().map_err(|_| bad())?,
    ))
}

fn enumerate(a: &EnumerateArgs) -> Result<Vec<u8>> {
    let builtin = fixture(&a.network);
    let net = match &builtin {
        Some(f) => f.network.clone(),
        None => crate::network::io::parse_network(&read_text(FsPath::new(&a.network))?)?,
    };
    let pairs: Vec<(NodeId, NodeId)> = if a.od.is_empty() {
        builtin
            .as_ref()
            .map(|f| f.paths.od_pairs().to_vec())
            .ok_or_else(|| CliError::Usage("--od is required when --network is a file".into()))?
    } else {
        a.od.iter().map(|s| parse_od(s)).collect::<Result<_>>()?
    };
    let filter = PathFilter {
        max_links: a.max_links.unwrap_or(usize::MAX),
        max_turns: a.max_turns,
        max_length_ratio: a.max_length_ratio,
    };
    let mut paths = Vec::new();
    for &od in &pairs {
        let found = enumerate_paths(&net, od, &filter)?;
        if found.is_empty() {
            warn!("every path from {} to {} was filtered out", od.0, od.1);
        }
        paths.extend(found);
    }
    if paths.is_empty() {
        warn!("no paths left after filtering; writing an empty path file");
        println!("K=0 N=0");
        return Ok(b"[]\n".to_vec());
    }
    let table = PathTable::new(&net, paths)?.canonicalize();
    println!("K={} N={}", table.num_od(), table.len());
    Ok((paths_to_json(table.paths()) + "\n").into_bytes())
}

#[derive(Serialize)]
struct EstimateReport {
    #[serde(flatten)]
    result: EstimationResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    recovery: Option<RecoveryOut>,
}

#[derive(Serialize)]
struct RecoveryOut {
    relative_error: f64,
    tol: f64,
    #[serde(flatten)]
    check: RecoveryCheck,
}

fn estimate(a: &EstimateArgs) -> Result<Vec<u8>> {
    let fx = load(&a.network, a.paths.as_deref())?;
    let counts = read_counts(&a.measurements)?;
    let (ms, y) = if a.dynamic {
        let (links, times, y) = timed_counts(counts, a.times.as_deref())?;
        (
            build_dynamic_system(&fx.paths, &fx.network, &links, &times)?,
            y,
        )
    } else {
        let (links, y) = static_counts(counts)?;
        (build_static_incidence(&fx.network, &fx.paths, &links)?, y)
    };
    let est = Estimator::default();
    let name = a
        .method
        .to_possible_value()
        .map_or(String::new(), |v| v.get_name().to_string());
    let need_delta = || {
        a.delta
            .ok_or_else(|| CliError::Usage(format!("--delta is required for {name}")))
    };
    let result = match a.method {
        MethodArg::L1 => est.l1(&ms, &fx.paths, &y)?,
        MethodArg::L2 => est.l2(&ms, &fx.paths, &y)?,
        MethodArg::L1Noisy => est.l1_noisy(&ms, &fx.paths, &y, need_delta()?)?,
        MethodArg::L2Noisy => est.l2_noisy(&ms, &fx.paths, &y, need_delta()?)?,
        MethodArg::Weighted => {
            let file = a
                .weights
                .as_ref()
                .ok_or_else(|| CliError::Usage("--weights is required for weighted".into()))?;
            let w = WeightMatrix::new(read_vector(file)?)?;
            est.weighted_l1(&ms, &fx.paths, &y, &w)?
        }
        MethodArg::Reweighted => {
            let eps = a
                .epsilon
                .map_or_else(ReweightEpsilon::default, ReweightEpsilon::Absolute);
            est.reweighted_l1(&ms, &fx.paths, &y, a.iters, eps)?
        }
    };
    let recovery = match &a.truth {
        Some(file) => {
            let truth = read_vector(file)?;
            if truth.len() != result.x.len() {
                return Err(CliError::Invalid(format!(
                    "truth has {} entries, expected {}",
                    truth.len(),
                    result.x.len()
                )));
            }
            Some(RecoveryOut {
                relative_error: relative_error(&result.x, &truth),
                tol: a.tol,
                check: check_recovery(&result.x, &truth, &fx.paths, a.tol),
            })
        }
        None => None,
    };
    println!(
        "method={} status=optimal sparsity={} objective={}{}",
        result.method,
        result.sparsity,
        format_sig(result.objective),
        recovery
            .as_ref()
            .map_or(String::new(), |r| format!(" recovered={}", r.check.path)),
    );
    Ok(to_json_sig(&EstimateReport { result, recovery }).into_bytes())
}

#[derive(Serialize)]
struct VmtReport {
    status: &'static str,
    vmt_lower: f64,
    vmt_upper: Option<f64>,
    /// Paths invisible to every measurement, when the upper bound is infinite.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    unbounded_paths: Vec<String>,
    x_min: Vec<f64>,
    x_max: Option<Vec<f64>>,
    lengths: Vec<f64>,
}

fn lengths_for(fx: &Fixture, unit: bool, file: Option<&FsPath>) -> Result<Vec<f64>> {
    let v = if unit {
        vec![1.0; fx.paths.len()]
    } else if let Some(f) = file {
        read_vector(f)?
    } else {
        fx.paths.path_lengths(&fx.network)?
    };
    if v.len() != fx.paths.len() {
        return Err(CliError::Invalid(format!(
            "{} lengths for {} paths",
            v.len(),
            fx.paths.len()
        )));
    }
    Ok(v)
}

/// The report bytes, plus the error to surface after writing them.
fn vmt(a: &VmtArgs) -> Result<(Vec<u8>, Result<()>)> {
    let fx = load(&a.network, a.paths.as_deref())?;
    let (links, y) = static_counts(read_counts(&a.measurements)?)?;
    let ms = build_static_incidence(&fx.network, &fx.paths, &links)?;
    let lengths = lengths_for(&fx, a.unit, a.lengths.as_deref())?;
    let b = Estimator::default().vmt_bounds(&ms, &fx.paths, &y, &lengths)?;
    let (report, outcome) = match b.upper {
        VmtUpper::Bounded { value, x } => {
            println!(
                "vmt_lower={} vmt_upper={}",
                format_sig(b.lower),
                format_sig(value)
            );
            let r = VmtReport {
                status: "bounded",
                vmt_lower: b.lower,
                vmt_upper: Some(value),
                unbounded_paths: Vec::new(),
                x_min: b.x_min,
                x_max: Some(x),
                lengths,
            };
            (r, Ok(()))
        }
        VmtUpper::Unbounded { paths } => {
            let labels: Vec<String> = paths
                .iter()
                .map(|&n| format!("{} {}", n + 1, fx.paths.paths()[n]))
                .collect();
            let msg = format!("paths cross no measured link: {}", labels.join(", "));
            let r = VmtReport {
                status: "unbounded",
                vmt_lower: b.lower,
                vmt_upper: None,
                unbounded_paths: labels,
                x_min: b.x_min,
                x_max: None,
                lengths,
            };
            (r, Err(CliError::Unbounded(msg)))
        }
    };
    Ok((to_json_sig(&report).into_bytes(), outcome))
}

/// 1-based path numbers to 0-based indices.
fn zero_based(support: &[usize]) -> Result<Vec<usize>> {
    support
        .iter()
        .map(|&i| {
            i.checked_sub(1)
                .ok_or_else(|| CliError::Usage("path numbers start at 1".into()))
        })
        .collect()
}

fn sweep(a: &SweepArgs) -> Result<Vec<u8>> {
    let fx = load(&a.network, a.paths.as_deref())?;
    let support = match (&a.support, &a.sparsity) {
        (Some(s), _) => SupportSpec::Fixed(zero_based(&s.0)?),
        (None, Some(levels)) => SupportSpec::Random(levels.0.clone()),
        (None, None) => return Err(CliError::Usage("give --support or --sparsity".into())),
    };
    let mut cfg = SweepConfig::new(support, a.m.0.clone(), a.trials, a.seed);
    cfg.tol = a.tol;
    let report = run_recovery_sweep(&fx, &cfg)?;
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &report)?;
    Ok(buf)
}

fn noisy_cdf(a: &NoisyCdfArgs) -> Result<Vec<u8>> {
    let fx = load(&a.network, a.paths.as_deref())?;
    let mut cfg = NoisyConfig::new(zero_based(&a.support.0)?, a.m, a.nu, a.trials, a.seed);
    cfg.delta = a.delta;
    let cdf = run_noisy_cdf(&fx, &cfg)?;
    for (name, errs) in [("l1", &cdf.l1), ("l2", &cdf.l2)] {
        let failed = errs.iter().filter(|e| e.is_infinite()).count();
        println!(
            "{name}: q25={} median={} q75={} failed={failed}",
            format_sig(quantile(errs, 0.25)),
            format_sig(quantile(errs, 0.5)),
            format_sig(quantile(errs, 0.75)),
        );
    }
    let mut buf = Vec::new();
    write_cdf_csv(&mut buf, &cdf)?;
    Ok(buf)
}

fn vmt_sweep(a: &VmtSweepArgs) -> Result<Vec<u8>> {
    let fx = load(&a.network, a.paths.as_deref())?;
    let mut cfg = VmtConfig::new(a.m.0.clone(), a.trials, a.seed);
    cfg.tol = a.tol;
    cfg.criterion = a.criterion.into();
    cfg.lengths = Some(lengths_for(&fx, a.unit, a.lengths.as_deref())?);
    let points = run_vmt_sweep(&fx, &cfg)?;
    if let Some(p) = points.iter().find(|p| p.sandwich_violations > 0) {
        warn!(
            "VMT bounds missed the truth in {} trials at M={}",
            p.sandwich_violations, p.m
        );
    }
    let mut buf = Vec::new();
    write_vmt_csv(&mut buf, &points)?;
    Ok(buf)
}

fn grid(a: &GridArgs) -> Result<String> {
    let mut out = String::from("N,alpha,turns,paths,few_turn_paths,fraction,hoeffding_bound\n");
    for &n in &a.n.0 {
        let total = grid_path_count(n)?;
        for &alpha in &a.alpha.0 {
            let frac = grid_turn_fraction(alpha, n)?;
            let t = turn_budget(alpha, n);
            writeln!(
                out,
                "{n},{},{t},{total},{},{},{}",
                format_sig(alpha),
                grid_paths_max_turns(n, t)?,
                format_sig(frac),
                format_sig(hoeffding_fraction_bound(alpha, n)?)
            )
            .expect("writing to a String");
        }
    }
    Ok(out)
}
