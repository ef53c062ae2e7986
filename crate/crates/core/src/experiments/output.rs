//! CSV writers and number formatting for experiment outputs.

use std::io::Write;

use super::recovery::Criterion;
use super::sweep::{NoisyCdf, RecoveryReport, VmtPoint};
use super::Result;

/// `v` with 12 significant digits, trailing zeros trimmed.
pub fn format_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa.to_string()))
    }
}

fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Rounds to 12 significant digits, for serializing reproducible JSON.
pub fn round_sig(v: f64) -> f64 {
    if v.is_finite() {
        format_sig(v).parse().unwrap_or(v)
    } else {
        v
    }
}

/// Columns: `S, M, criterion, rate, stderr, trials, seed`.
pub fn write_sweep_csv<W: Write>(w: W, report: &RecoveryReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["S", "M", "criterion", "rate", "stderr", "trials", "seed"])?;
    for p in &report.points {
        for c in Criterion::ALL {
            out.write_record([
                p.s.to_string(),
                p.m.to_string(),
                c.as_str().to_string(),
                format_sig(p.rate(c)),
                format_sig(p.stderr(c)),
                p.trials.to_string(),
                report.seed.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Columns: `method, error, cdf`. One row per trial, sorted by error within each method.
pub fn write_cdf_csv<W: Write>(w: W, cdf: &NoisyCdf) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["method", "error", "cdf"])?;
    for (name, errs) in [("l1", &cdf.l1), ("l2", &cdf.l2)] {
        let n = errs.len() as f64;
        for (i, e) in errs.iter().enumerate() {
            out.write_record([
                name.to_string(),
                format_sig(*e),
                format_sig((i + 1) as f64 / n),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Columns: `M, rate_min, rate_max, mean_ratio_min, mean_ratio_max, unbounded_count`.
/// Ratios are empty when no trial failed.
pub fn write_vmt_csv<W: Write>(w: W, points: &[VmtPoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "M",
        "rate_min",
        "rate_max",
        "mean_ratio_min",
        "mean_ratio_max",
        "unbounded_count",
    ])?;
    for p in points {
        out.write_record([
            p.m.to_string(),
            format_sig(p.rate_min()),
            format_sig(p.rate_max()),
            p.mean_ratio_min.map(format_sig).unwrap_or_default(),
            p.mean_ratio_max.map(format_sig).unwrap_or_default(),
            p.unbounded.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
