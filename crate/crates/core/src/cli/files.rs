use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CliError, Command, Result};
use crate::experiments::output::round_sig;
use crate::experiments::{fixture, Fixture};
use crate::network::io::{parse_network, parse_path_table};
use crate::network::{LinkId, PathTable};

pub(super) fn read_text(path: &FsPath) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(super) fn write_bytes(path: &FsPath, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// A network and path table from fixture names or files.
///
/// Without `paths`, the network must be a fixture and its own paths are used.
pub(super) fn load(network: &str, paths: Option<&str>) -> Result<Fixture> {
    let builtin = fixture(network);
    let net = match &builtin {
        Some(f) => f.network.clone(),
        None => parse_network(&read_text(FsPath::new(network))?)?,
    };
    let table = match (paths, &builtin) {
        (Some(p), _) => match fixture(p) {
            // Re-validate fixture paths against whatever network was given.
            Some(f) => PathTable::with_od_pairs(
                &net,
                f.paths.od_pairs().to_vec(),
                f.paths.paths().to_vec(),
            )?,
            None => parse_path_table(&net, &read_text(FsPath::new(p))?)?,
        },
        (None, Some(f)) => f.paths.clone(),
        (None, None) => {
            return Err(CliError::Usage(
                "--paths is required when --network is a file".into(),
            ))
        }
    };
    Ok(Fixture {
        name: builtin.map_or("file", |f| f.name),
        network: net,
        paths: table,
    })
}

pub(super) fn read_vector(path: &FsPath) -> Result<Vec<f64>> {
    serde_json::from_str(&read_text(path)?).map_err(|e| {
        CliError::Invalid(format!(
            "{}: expected a JSON array of numbers: {e}",
            path.display()
        ))
    })
}

/// Link counts from a measurements CSV.
#[derive(Clone, Debug, PartialEq)]
pub(super) enum Counts {
    /// `link_id,count`, in file order.
    Static(Vec<(LinkId, f64)>),
    /// `link_id,time,count`.
    Timed(Vec<(LinkId, i64, f64)>),
}

#[derive(Deserialize)]
struct StaticRow {
    link_id: String,
    count: f64,
}

#[derive(Deserialize)]
struct TimedRow {
    link_id: String,
    time: i64,
    count: f64,
}

pub(super) fn read_counts(path: &FsPath) -> Result<Counts> {
    let text = read_text(path)?;
    let bad = |e: csv::Error| CliError::Invalid(format!("{}: {e}", path.display()));
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = rdr
        .headers()
        .map_err(bad)?
        .iter()
        .map(str::to_string)
        .collect();
    let counts = match headers
        .iter()
        .map(String::as_str)
        .collect::<Vec<_>>()
        .as_slice()
    {
        ["link_id", "count"] => Counts::Static(
            rdr.deserialize::<StaticRow>()
                .map(|r| r.map(|r| (LinkId(r.link_id), r.count)))
                .collect::<std::result::Result<_, _>>()
                .map_err(bad)?,
        ),
        ["link_id", "time", "count"] => Counts::Timed(
            rdr.deserialize::<TimedRow>()
                .map(|r| r.map(|r| (LinkId(r.link_id), r.time, r.count)))
                .collect::<std::result::Result<_, _>>()
                .map_err(bad)?,
        ),
        _ => {
            return Err(CliError::Invalid(format!(
                "{}: header must be `link_id,count` or `link_id,time,count`, got `{}`",
                path.display(),
                headers.join(",")
            )))
        }
    };
    let empty = match &counts {
        Counts::Static(v) => v.is_empty(),
        Counts::Timed(v) => v.is_empty(),
    };
    if empty {
        return Err(CliError::Invalid(format!(
            "{}: no measurements",
            path.display()
        )));
    }
    Ok(counts)
}

/// Static counts: measured links in file order and their counts.
pub(super) fn static_counts(counts: Counts) -> Result<(Vec<LinkId>, Vec<f64>)> {
    let Counts::Static(rows) = counts else {
        return Err(CliError::Invalid("timed counts need --dynamic".into()));
    };
    let mut seen = BTreeSet::new();
    for (l, _) in &rows {
        if !seen.insert(l.clone()) {
            return Err(CliError::Invalid(format!("link {l} is listed twice")));
        }
    }
    Ok(rows.into_iter().unzip())
}

/// Timed counts arranged to match the dynamic system: time-major, links in
/// first-appearance order. Every (link, time) pair must be present once.
pub(super) fn timed_counts(
    counts: Counts,
    times: Option<&[i64]>,
) -> Result<(Vec<LinkId>, Vec<i64>, Vec<f64>)> {
    let Counts::Timed(rows) = counts else {
        return Err(CliError::Invalid(
            "--dynamic needs a `link_id,time,count` file".into(),
        ));
    };
    let mut links: Vec<LinkId> = Vec::new();
    let mut table: BTreeMap<(LinkId, i64), f64> = BTreeMap::new();
    for (l, t, c) in rows {
        if !links.contains(&l) {
            links.push(l.clone());
        }
        if table.insert((l.clone(), t), c).is_some() {
            return Err(CliError::Invalid(format!(
                "link {l} at time {t} is listed twice"
            )));
        }
    }
    let times: BTreeSet<i64> = match times {
        Some(t) => t.iter().copied().collect(),
        None => table.keys().map(|(_, t)| *t).collect(),
    };
    let mut y = Vec::with_capacity(times.len() * links.len());
    for &t in &times {
        for l in &links {
            let c = table
                .get(&(l.clone(), t))
                .ok_or_else(|| CliError::Invalid(format!("no count for link {l} at time {t}")))?;
            y.push(*c);
        }
    }
    Ok((links, times.into_iter().collect(), y))
}

/// Pretty JSON with every float rounded to 12 significant digits.
pub fn to_json_sig<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("output serializes");
    round_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
    s.push('\n');
    s
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n
                .as_f64()
                .map(round_sig)
                .and_then(serde_json::Number::from_f64)
            {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Everything needed to re-run a command. Carries no timestamp, so replays
/// of the same manifest are byte-identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    /// Fixture names and input file paths.
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub config: Command,
}

impl RunManifest {
    pub fn new(config: &Command) -> Self {
        let (command, seed, inputs, outputs) = describe(config);
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            inputs,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            config: config.clone(),
        }
    }

    /// `<output>.manifest.json` beside the first output.
    pub fn path_for(output: &FsPath) -> PathBuf {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    pub(super) fn write(&self) -> Result<()> {
        match self.outputs.first() {
            Some(out) => write_bytes(
                &Self::path_for(FsPath::new(out)),
                to_json_sig(self).as_bytes(),
            ),
            None => Ok(()),
        }
    }
}

fn describe(cmd: &Command) -> (&'static str, Option<u64>, Vec<String>, Vec<PathBuf>) {
    let opt = |p: &Option<String>| p.iter().cloned().collect::<Vec<_>>();
    let file = |p: &Option<PathBuf>| {
        p.iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
    };
    match cmd {
        Command::Enumerate(a) => (
            "enumerate",
            None,
            vec![a.network.clone()],
            vec![a.output.clone()],
        ),
        Command::Estimate(a) => {
            let mut inputs = vec![a.network.clone()];
            inputs.extend(opt(&a.paths));
            inputs.push(a.measurements.display().to_string());
            inputs.extend(file(&a.weights));
            inputs.extend(file(&a.truth));
            ("estimate", None, inputs, vec![a.output.clone()])
        }
        Command::Vmt(a) => {
            let mut inputs = vec![a.network.clone()];
            inputs.extend(opt(&a.paths));
            inputs.push(a.measurements.display().to_string());
            inputs.extend(file(&a.lengths));
            ("vmt", None, inputs, vec![a.output.clone()])
        }
        Command::Sweep(a) => {
            let mut inputs = vec![a.network.clone()];
            inputs.extend(opt(&a.paths));
            ("sweep", Some(a.seed), inputs, vec![a.output.clone()])
        }
        Command::NoisyCdf(a) => {
            let mut inputs = vec![a.network.clone()];
            inputs.extend(opt(&a.paths));
            ("noisy-cdf", Some(a.seed), inputs, vec![a.output.clone()])
        }
        Command::VmtSweep(a) => {
            let mut inputs = vec![a.network.clone()];
            inputs.extend(opt(&a.paths));
            inputs.extend(file(&a.lengths));
            ("vmt-sweep", Some(a.seed), inputs, vec![a.output.clone()])
        }
        Command::Grid(a) => ("grid", None, Vec::new(), a.output.iter().cloned().collect()),
        Command::Fixture(a) => (
            "fixture",
            None,
            vec![a.name.clone()],
            vec![a.network_out.clone(), a.paths_out.clone()],
        ),
        Command::Replay(a) => (
            "replay",
            None,
            vec![a.manifest.display().to_string()],
            Vec::new(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timed_counts_are_time_major() {
        let rows = Counts::Timed(vec![
            (LinkId("a".into()), 2, 5.0),
            (LinkId("b".into()), 1, 2.0),
            (LinkId("a".into()), 1, 1.0),
            (LinkId("b".into()), 2, 7.0),
        ]);
        let (links, times, y) = timed_counts(rows, None).unwrap();
        assert_eq!(links, vec![LinkId("a".into()), LinkId("b".into())]);
        assert_eq!(times, vec![1, 2]);
        assert_eq!(y, vec![1.0, 2.0, 5.0, 7.0]);
    }

    #[test]
    fn missing_timed_count_is_rejected() {
        let rows = Counts::Timed(vec![
            (LinkId("a".into()), 1, 1.0),
            (LinkId("b".into()), 2, 2.0),
        ]);
        assert!(matches!(
            timed_counts(rows, None),
            Err(CliError::Invalid(_))
        ));
    }

    #[test]
    fn duplicate_static_link_is_rejected() {
        let rows = Counts::Static(vec![(LinkId("a".into()), 1.0), (LinkId("a".into()), 2.0)]);
        assert!(static_counts(rows).is_err());
    }

    #[test]
    fn json_floats_are_rounded() {
        let s = to_json_sig(&serde_json::json!({"x": [0.1 + 0.2, 3], "y": 1.0 / 3.0}));
        assert!(
            s.contains("0.3") && !s.contains("0.30000000000000004"),
            "{s}"
        );
        assert!(s.contains("0.333333333333"), "{s}");
    }

    #[test]
    fn manifest_path_appends_suffix() {
        assert_eq!(
            RunManifest::path_for(FsPath::new("out/a.csv")),
            PathBuf::from("out/a.csv.manifest.json")
        );
    }
}
