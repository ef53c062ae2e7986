use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{LinkId, Network, NetworkError, Path, PathTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementMode {
    Static,
    Dynamic,
}

/// A measured quantity: a link, and in dynamic mode the count time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowLabel {
    pub link: LinkId,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub time: Option<i64>,
}

/// An unknown: a path, and in dynamic mode the departure time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColLabel {
    pub path: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub departure: Option<i64>,
}

/// Binary measurement matrix `A` with its row and column labels, `y = A x`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSystem {
    pub matrix: DMatrix<f64>,
    pub rows: Vec<RowLabel>,
    pub cols: Vec<ColLabel>,
    pub mode: MeasurementMode,
}

impl MeasurementSystem {
    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    /// `A x` as a plain vector.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(
            x.len(),
            self.ncols(),
            "allocation length does not match system columns"
        );
        (0..self.nrows())
            .map(|i| (0..self.ncols()).map(|j| self.matrix[(i, j)] * x[j]).sum())
            .collect()
    }

    /// Matrix rows as 0/1 integers, convenient for printing and comparisons.
    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.nrows())
            .map(|i| {
                (0..self.ncols())
                    .map(|j| self.matrix[(i, j)] as u8)
                    .collect()
            })
            .collect()
    }
}

fn check_measured(net: &Network, pt: &PathTable, measured: &[LinkId]) -> Result<(), NetworkError> {
    if measured.is_empty() {
        return Err(NetworkError::NoMeasurements);
    }
    for id in measured {
        if net.link(id).is_none() {
            return Err(NetworkError::UnknownLink(id.clone()));
        }
        if !pt.paths().iter().any(|p| p.contains(id)) {
            return Err(NetworkError::UselessRow(id.clone()));
        }
    }
    Ok(())
}

/// Static incidence matrix: entry `(i, n)` is 1 iff `measured[i]` lies on path `n`.
pub fn build_static_incidence(
    net: &Network,
    pt: &PathTable,
    measured: &[LinkId],
) -> Result<MeasurementSystem, NetworkError> {
    check_measured(net, pt, measured)?;
    let matrix = DMatrix::from_fn(measured.len(), pt.len(), |i, n| {
        if pt.paths()[n].contains(&measured[i]) {
            1.0
        } else {
            0.0
        }
    });
    Ok(MeasurementSystem {
        matrix,
        rows: measured
            .iter()
            .map(|l| RowLabel {
                link: l.clone(),
                time: None,
            })
            .collect(),
        cols: (0..pt.len())
            .map(|n| ColLabel {
                path: n,
                departure: None,
            })
            .collect(),
        mode: MeasurementMode::Static,
    })
}

/// Total travel time of the links preceding `link` on `path`: a vehicle that
/// departs at `t` is counted on `link` at `t + delay`.
pub fn path_prefix_delay(path: &Path, link: &LinkId, net: &Network) -> Result<i64, NetworkError> {
    let pos =
        path.links
            .iter()
            .position(|l| l == link)
            .ok_or_else(|| NetworkError::LinkNotOnPath {
                link: link.clone(),
                path: path.to_string(),
            })?;
    path.links[..pos].iter().try_fold(0i64, |acc, id| {
        net.link(id)
            .map(|l| acc + i64::from(l.travel_time))
            .ok_or_else(|| NetworkError::UnknownLink(id.clone()))
    })
}

/// Time-stacked measurement system.
///
/// Rows are `(link, count time)` pairs, grouped by count time (ascending) and
/// then by `measured` order. Columns are the `(path, departure)` pairs that
/// some row references, ordered by OD index, departure time descending, then
/// path index. Departures before the first count time are kept as unknowns.
pub fn build_dynamic_system(
    pt: &PathTable,
    net: &Network,
    measured: &[LinkId],
    count_times: &[i64],
) -> Result<MeasurementSystem, NetworkError> {
    check_measured(net, pt, measured)?;
    let times: BTreeSet<i64> = count_times.iter().copied().collect();
    if times.is_empty() {
        return Err(NetworkError::EmptyWindow);
    }

    // delays[n][i] = Some(d) when measured[i] is on path n with prefix delay d
    let mut delays = Vec::with_capacity(pt.len());
    for p in pt.paths() {
        let row: Vec<Option<i64>> = measured
            .iter()
            .map(|l| {
                if p.contains(l) {
                    path_prefix_delay(p, l, net).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<_, _>>()?;
        delays.push(row);
    }

    let mut cols: BTreeSet<(usize, std::cmp::Reverse<i64>, usize)> = BTreeSet::new();
    for (n, row) in delays.iter().enumerate() {
        for d in row.iter().flatten() {
            for &t in &times {
                cols.insert((pt.od_of_path(n), std::cmp::Reverse(t - d), n));
            }
        }
    }
    let cols: Vec<ColLabel> = cols
        .into_iter()
        .map(|(_, std::cmp::Reverse(tau), n)| ColLabel {
            path: n,
            departure: Some(tau),
        })
        .collect();
    let rows: Vec<RowLabel> = times
        .iter()
        .flat_map(|&t| {
            measured.iter().map(move |l| RowLabel {
                link: l.clone(),
                time: Some(t),
            })
        })
        .collect();

    let matrix = DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
        let i = r % measured.len();
        let t = rows[r].time.expect("dynamic row has a time");
        let col = cols[c];
        match delays[col.path][i] {
            Some(d) if col.departure == Some(t - d) => 1.0,
            _ => 0.0,
        }
    });
    Ok(MeasurementSystem {
        matrix,
        rows,
        cols,
        mode: MeasurementMode::Dynamic,
    })
}
