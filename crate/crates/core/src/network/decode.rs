use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MeasurementSystem, NetworkError, PathTable};

/// Flow of one OD pair (at one departure time, for dynamic systems).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdFlow {
    pub od: usize,
    pub origin: u32,
    pub destination: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub departure: Option<i64>,
    pub flow: f64,
}

/// OD flows `f_k` and path splits `w_{k,n}` recovered from an allocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodedAllocation {
    pub od_flows: Vec<OdFlow>,
    /// One entry per allocation entry; `None` where the owning OD flow is zero.
    pub splits: Vec<Option<f64>>,
}

impl DecodedAllocation {
    pub fn flows(&self) -> Vec<f64> {
        self.od_flows.iter().map(|f| f.flow).collect()
    }
}

/// Decodes a static allocation: `f_k = sum of x_n over paths of k`, `w_{k,n} = x_n / f_k`.
pub fn decode_allocation(x: &[f64], pt: &PathTable) -> Result<DecodedAllocation, NetworkError> {
    if x.len() != pt.len() {
        return Err(NetworkError::LengthMismatch {
            got: x.len(),
            expected: pt.len(),
        });
    }
    let groups = (0..x.len())
        .map(|n| (pt.od_of_path(n), None))
        .collect::<Vec<_>>();
    let mut all: BTreeMap<(usize, Option<i64>), f64> =
        (0..pt.num_od()).map(|k| ((k, None), 0.0)).collect();
    decode_groups(x, &groups, pt, &mut all)
}

/// Decodes an allocation over the columns of `ms`, grouping by (OD, departure time).
pub fn decode_columns(
    x: &[f64],
    ms: &MeasurementSystem,
    pt: &PathTable,
) -> Result<DecodedAllocation, NetworkError> {
    if x.len() != ms.ncols() {
        return Err(NetworkError::LengthMismatch {
            got: x.len(),
            expected: ms.ncols(),
        });
    }
    let groups: Vec<(usize, Option<i64>)> = ms
        .cols
        .iter()
        .map(|c| (pt.od_of_path(c.path), c.departure))
        .collect();
    let mut all = BTreeMap::new();
    if ms.cols.iter().all(|c| c.departure.is_none()) {
        all.extend((0..pt.num_od()).map(|k| ((k, None), 0.0)));
    }
    decode_groups(x, &groups, pt, &mut all)
}

fn decode_groups(
    x: &[f64],
    groups: &[(usize, Option<i64>)],
    pt: &PathTable,
    totals: &mut BTreeMap<(usize, Option<i64>), f64>,
) -> Result<DecodedAllocation, NetworkError> {
    if let Some(n) = x.iter().position(|&v| v < 0.0 || v.is_nan()) {
        return Err(NetworkError::NegativeEntry(n));
    }
    for (&v, g) in x.iter().zip(groups) {
        *totals.entry(*g).or_insert(0.0) += v;
    }
    let splits = x
        .iter()
        .zip(groups)
        .map(|(&v, g)| {
            let f = totals[g];
            (f > 0.0).then(|| v / f)
        })
        .collect();
    let od_flows = totals
        .iter()
        .map(|(&(od, departure), &flow)| {
            let (origin, destination) = pt.od_pairs()[od];
            OdFlow {
                od,
                origin,
                destination,
                departure,
                flow,
            }
        })
        .collect();
    Ok(DecodedAllocation { od_flows, splits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tests::fig1;
    use crate::network::{build_dynamic_system, Path};
    use proptest::prelude::*;

    fn fig1_table() -> PathTable {
        PathTable::new(
            &fig1(),
            vec![
                Path::new(1, 2, &["l1_2"]),
                Path::new(1, 3, &["l1_2", "l2_3"]),
                Path::new(1, 3, &["l1_3"]),
                Path::new(2, 1, &["l2_3", "l3_1"]),
                Path::new(2, 3, &["l2_3"]),
                Path::new(3, 1, &["l3_1"]),
                Path::new(3, 2, &["l3_1", "l1_2"]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn worked_decode() {
        let pt = fig1_table();
        let x = [0.0, 3.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let d = decode_allocation(&x, &pt).unwrap();
        assert_eq!(d.od_flows[1].flow, 4.0);
        assert_eq!(d.splits[1], Some(0.75));
        assert_eq!(d.splits[2], Some(0.25));
        assert_eq!(d.splits[0], None);
    }

    #[test]
    fn zero_allocation_has_no_splits() {
        let pt = fig1_table();
        let d = decode_allocation(&[0.0; 7], &pt).unwrap();
        assert!(d.flows().iter().all(|&f| f == 0.0));
        assert!(d.splits.iter().all(Option::is_none));
    }

    #[test]
    fn singleton_od_split_is_one() {
        let pt = fig1_table();
        let mut x = [0.0; 7];
        x[5] = 7.0;
        let d = decode_allocation(&x, &pt).unwrap();
        assert_eq!(d.od_flows[4].flow, 7.0);
        assert_eq!(d.splits[5], Some(1.0));
    }

    #[test]
    fn rejects_negative_and_wrong_length() {
        let pt = fig1_table();
        let mut x = [0.0; 7];
        x[3] = -1.0;
        assert_eq!(
            decode_allocation(&x, &pt),
            Err(NetworkError::NegativeEntry(3))
        );
        assert!(matches!(
            decode_allocation(&[1.0], &pt),
            Err(NetworkError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn dynamic_columns_group_by_departure() {
        let net = fig1();
        let pt = fig1_table();
        let ms = build_dynamic_system(&pt, &net, &net.link_ids(), &[0]).unwrap();
        // columns: (0,0) (1,0) (2,0) (1,-1) ...
        let mut x = vec![0.0; ms.ncols()];
        x[1] = 2.0;
        x[2] = 2.0;
        x[3] = 5.0;
        let d = decode_columns(&x, &ms, &pt).unwrap();
        let od1: Vec<(Option<i64>, f64)> = d
            .od_flows
            .iter()
            .filter(|f| f.od == 1)
            .map(|f| (f.departure, f.flow))
            .collect();
        assert_eq!(od1, vec![(Some(-1), 5.0), (Some(0), 4.0)]);
        assert_eq!(d.splits[3], Some(1.0));
        assert_eq!(d.splits[1], Some(0.5));
    }

    proptest! {
        #[test]
        fn decode_then_reencode_is_identity(x in proptest::collection::vec(0.0f64..100.0, 7)) {
            let pt = fig1_table();
            let d = decode_allocation(&x, &pt).unwrap();
            for (n, &xn) in x.iter().enumerate() {
                let f = d.od_flows[pt.od_of_path(n)].flow;
                let back = d.splits[n].map_or(0.0, |w| w * f);
                prop_assert!((back - xn).abs() <= 1e-12 * xn.max(1.0));
            }
            for k in 0..pt.num_od() {
                let sum: f64 = pt.paths_of_od(k).iter().filter_map(|&n| d.splits[n]).sum();
                if d.od_flows[k].flow > 0.0 {
                    prop_assert!((sum - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
