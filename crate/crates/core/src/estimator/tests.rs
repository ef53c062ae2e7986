use nalgebra::DMatrix;
use proptest::prelude::*;

use super::*;
use crate::experiments::fixtures::{fig1, fig2, Fixture};
use crate::network::{
    build_static_incidence, decode_columns, ColLabel, LinkId, MeasurementMode, RowLabel,
};
use crate::solver::{lp_oracle, StandardLp};

fn system(f: &Fixture, links: &[&str]) -> MeasurementSystem {
    let ids: Vec<LinkId> = links.iter().map(|&s| LinkId::from(s)).collect();
    build_static_incidence(&f.network, &f.paths, &ids).unwrap()
}

fn four_path_truth() -> Vec<f64> {
    let mut x = vec![0.0; 14];
    x[1] = 10.0;
    x[7] = 20.0;
    x[10] = 0.25 * 40.0;
    x[13] = 0.75 * 40.0;
    x
}

const SIX_LINKS: [&str; 6] = ["l1_2", "l1_3", "l2_1", "l3_2", "l3_4", "l4_3"];
const WEIGHTED_LINKS: [&str; 6] = ["l1_2", "l1_3", "l3_2", "l3_4", "l4_2", "l4_3"];

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

#[test]
fn l1_recovers_example_truth() {
    let f = fig2();
    let ms = system(&f, &SIX_LINKS);
    let truth = four_path_truth();
    let y = ms.apply(&truth);
    let r = estimate_l1(&ms, &f.paths, &y).unwrap();
    assert!(rel_err(&r.x, &truth) <= 1e-6, "{:?}", r.x);
    assert_eq!(r.sparsity, 4);
    assert_eq!(r.status, Status::Optimal);
    assert_eq!(r.flows(), vec![10.0, 20.0, 40.0]);
    assert!((r.splits[10].unwrap() - 0.25).abs() < 1e-9);
    assert!((r.splits[13].unwrap() - 0.75).abs() < 1e-9);
}

impl EstimationResult {
    fn flows(&self) -> Vec<f64> {
        self.od_flows
            .iter()
            .map(|f| (f.flow * 1e9).round() / 1e9)
            .collect()
    }
}

#[test]
fn l2_spreads_mass_on_example() {
    let f = fig2();
    let ms = system(&f, &SIX_LINKS);
    let truth = four_path_truth();
    let y = ms.apply(&truth);
    let r = estimate_l2(&ms, &f.paths, &y).unwrap();
    assert!(rel_err(&r.x, &truth) > 0.1, "{}", rel_err(&r.x, &truth));
    assert!(r.sparsity > 4);
    assert!(r.residual_inf < 1e-6 * 40.0);
}

#[test]
fn zero_counts_give_zero() {
    let f = fig2();
    let ms = system(&f, &SIX_LINKS);
    let y = vec![0.0; 6];
    for r in [
        estimate_l1(&ms, &f.paths, &y).unwrap(),
        estimate_l2(&ms, &f.paths, &y).unwrap(),
    ] {
        assert!(r.x.iter().all(|&v| v == 0.0));
        assert!(r.splits.iter().all(Option::is_none));
    }
}

#[test]
fn minimum_norm_split() {
    let f = fig1();
    let ms = MeasurementSystem {
        matrix: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
        rows: vec![RowLabel {
            link: "l1_2".into(),
            time: None,
        }],
        cols: vec![
            ColLabel {
                path: 1,
                departure: None,
            },
            ColLabel {
                path: 2,
                departure: None,
            },
        ],
        mode: MeasurementMode::Static,
    };
    let r = estimate_l2(&ms, &f.paths, &[2.0]).unwrap();
    assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
}

#[test]
fn input_errors() {
    let f = fig2();
    let ms = system(&f, &SIX_LINKS);
    assert!(matches!(
        estimate_l1(&ms, &f.paths, &[1.0]),
        Err(EstimatorError::DimensionMismatch(_))
    ));
    let mut y = vec![1.0; 6];
    y[3] = -1.0;
    assert!(matches!(
        estimate_l1(&ms, &f.paths, &y),
        Err(EstimatorError::NegativeCount { index: 3, .. })
    ));
    assert!(matches!(
        estimate_l1_noisy(&ms, &f.paths, &y, -1.0),
        Err(EstimatorError::InvalidParameter(_))
    ));
    assert!(matches!(
        estimate_weighted_l1(&ms, &f.paths, &[1.0; 6], &WeightMatrix::uniform(3)),
        Err(EstimatorError::DimensionMismatch(_))
    ));
    assert!(WeightMatrix::new(vec![1.0, 0.0]).is_err());
    assert!(serde_json::from_str::<WeightMatrix>("[1.0, -2.0]").is_err());
    assert!(matches!(
        reweighted_l1(&ms, &f.paths, &[1.0; 6], 0, ReweightEpsilon::default()),
        Err(EstimatorError::InvalidParameter(_))
    ));
}

#[test]
fn inconsistent_counts_are_infeasible() {
    let f = fig2();
    // l1_3 is crossed only by path 11, which also crosses l4_1 and l3_2.
    let ms = system(&f, &["l1_3", "l4_1"]);
    assert_eq!(
        estimate_l1(&ms, &f.paths, &[5.0, 1.0]).unwrap_err(),
        EstimatorError::Infeasible
    );
    assert_eq!(
        estimate_l2(&ms, &f.paths, &[5.0, 1.0]).unwrap_err(),
        EstimatorError::Infeasible
    );
    assert_eq!(
        estimate_l1_noisy(&ms, &f.paths, &[5.0, 1.0], 1.0).unwrap_err(),
        EstimatorError::Infeasible
    );
}

#[test]
fn noisy_variants_reduce_to_noiseless() {
    let f = fig2();
    let ms = system(&f, &SIX_LINKS);
    let y = ms.apply(&four_path_truth());
    let l1 = estimate_l1(&ms, &f.paths, &y).unwrap();
    let l1n = estimate_l1_noisy(&ms, &f.paths, &y, 0.0).unwrap();
    assert!((l1.objective - l1n.objective).abs() <= 1e-6 * l1.objective);
    assert!(rel_err(&l1n.x, &l1.x) <= 1e-6);

    let l2 = estimate_l2(&ms, &f.paths, &y).unwrap();
    let l2n = estimate_l2_noisy(&ms, &f.paths, &y, 0.0).unwrap();
    assert!(rel_err(&l2n.x, &l2.x) <= 1e-6);

    let big = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    for r in [
        estimate_l1_noisy(&ms, &f.paths, &y, big).unwrap(),
        estimate_l2_noisy(&ms, &f.paths, &y, big * 2.0).unwrap(),
    ] {
        assert!(r.x.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn noisy_objective_is_monotone_in_delta() {
    let f = fig2();
    let ms = system(&f, &SIX_LINKS);
    let y = ms.apply(&four_path_truth());
    let exact = estimate_l1(&ms, &f.paths, &y).unwrap().objective;
    let objs: Vec<f64> = [1e-1, 1e-3, 1e-6]
        .iter()
        .map(|&d| estimate_l1_noisy(&ms, &f.paths, &y, d).unwrap().objective)
        .collect();
    assert!(
        objs[0] <= objs[1] + 1e-6 * exact && objs[1] <= objs[2] + 1e-6 * exact,
        "{objs:?}"
    );
    assert!(objs.iter().all(|&o| o <= exact * (1.0 + 1e-6)));
    assert!(
        (objs[2] - exact).abs() <= 1e-5 * exact,
        "{} vs {exact}",
        objs[2]
    );
}

fn oracle_weights() -> WeightMatrix {
    let mut w = vec![1.0; 14];
    for i in [1, 7, 10, 13] {
        w[i] = 0.1;
    }
    WeightMatrix::new(w).unwrap()
}

/// Same system with columns listed in reverse order; maps results back.
fn solve_reversed(ms: &MeasurementSystem, pt: &PathTable, y: &[f64], w: &[f64]) -> Vec<f64> {
    let n = ms.ncols();
    let mut rev = ms.clone();
    rev.matrix = DMatrix::from_fn(ms.nrows(), n, |i, j| ms.matrix[(i, n - 1 - j)]);
    rev.cols.reverse();
    let wr = WeightMatrix::new(w.iter().rev().copied().collect()).unwrap();
    let r = estimate_weighted_l1(&rev, pt, y, &wr).unwrap();
    r.x.into_iter().rev().collect()
}

#[test]
fn weighting_recovers_where_plain_l1_fails() {
    let f = fig2();
    let ms = system(&f, &WEIGHTED_LINKS);
    let truth = four_path_truth();
    let y = ms.apply(&truth);
    // Paths 2, 3 and 7 are seen only through l3_2 here, so plain ℓ1 has several
    // minimizers and which one comes back depends on the column order.
    let forward = estimate_l1(&ms, &f.paths, &y).unwrap();
    let backward = solve_reversed(&ms, &f.paths, &y, &[1.0; 14]);
    let sum: f64 = backward.iter().sum();
    assert!((sum - forward.objective).abs() <= 1e-9 * sum);
    assert!(rel_err(&backward, &truth) > 0.1, "{backward:?}");

    let w = oracle_weights();
    let weighted = estimate_weighted_l1(&ms, &f.paths, &y, &w).unwrap();
    assert!(rel_err(&weighted.x, &truth) <= 1e-6, "{:?}", weighted.x);
    let weighted_back = solve_reversed(&ms, &f.paths, &y, w.as_slice());
    assert!(rel_err(&weighted_back, &truth) <= 1e-6, "{weighted_back:?}");
}

#[test]
fn unit_weights_and_scaling() {
    let f = fig2();
    let ms = system(&f, &WEIGHTED_LINKS);
    let y = ms.apply(&four_path_truth());
    let plain = estimate_l1(&ms, &f.paths, &y).unwrap();
    let unit = estimate_weighted_l1(&ms, &f.paths, &y, &WeightMatrix::uniform(14)).unwrap();
    assert_eq!(plain.x, unit.x);

    let w = oracle_weights();
    let scaled = WeightMatrix::new(w.as_slice().iter().map(|v| v * 37.0).collect()).unwrap();
    let a = estimate_weighted_l1(&ms, &f.paths, &y, &w).unwrap();
    let b = estimate_weighted_l1(&ms, &f.paths, &y, &scaled).unwrap();
    assert!(rel_err(&a.x, &b.x) <= 1e-12);
    assert!((b.objective - 37.0 * a.objective).abs() <= 1e-9 * b.objective);
}

#[test]
fn reweighting_single_pass_is_plain_l1() {
    let f = fig2();
    let ms = system(&f, &WEIGHTED_LINKS);
    let y = ms.apply(&four_path_truth());
    let plain = estimate_l1(&ms, &f.paths, &y).unwrap();
    let r = reweighted_l1(&ms, &f.paths, &y, 1, ReweightEpsilon::default()).unwrap();
    assert_eq!(r.x, plain.x);
    assert_eq!(r.trace.len(), 1);
    assert_eq!(r.method, Method::ReweightedL1);
}

#[test]
fn reweighting_keeps_exact_recovery_fixed() {
    let f = fig2();
    let ms = system(&f, &SIX_LINKS);
    let truth = four_path_truth();
    let y = ms.apply(&truth);
    let r = reweighted_l1(
        &ms,
        &f.paths,
        &y,
        DEFAULT_REWEIGHT_ITERS,
        ReweightEpsilon::default(),
    )
    .unwrap();
    assert_eq!(r.trace.len(), DEFAULT_REWEIGHT_ITERS);
    assert!(rel_err(&r.x, &truth) <= 1e-6);
    let r = reweighted_l1(&ms, &f.paths, &[0.0; 6], 3, ReweightEpsilon::default()).unwrap();
    assert!(r.x.iter().all(|&v| v == 0.0));
}

#[test]
fn result_serializes_with_labels() {
    let f = fig2();
    let ms = system(&f, &SIX_LINKS);
    let r = estimate_l1(&ms, &f.paths, &ms.apply(&four_path_truth())).unwrap();
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["method"], "l1");
    assert_eq!(json["status"], "optimal");
    assert_eq!(json["allocation"][1]["label"], "3->1:[l3_2,l2_1]");
    let back: EstimationResult = serde_json::from_value(json).unwrap();
    assert_eq!(back, r);
}

#[test]
fn one_sparse_truth_matches_oracle() {
    let f = fig2();
    let links = f.network.link_ids();
    for path in 0..14 {
        for link in f.paths.paths()[path].links.iter() {
            let ms =
                build_static_incidence(&f.network, &f.paths, std::slice::from_ref(link)).unwrap();
            let mut truth = vec![0.0; 14];
            truth[path] = 7.0;
            let y = ms.apply(&truth);
            let r = estimate_l1(&ms, &f.paths, &y).unwrap();
            let lp = StandardLp::new(vec![1.0; 14], ms.matrix.clone(), y.clone(), Sense::Minimize);
            let o = lp_oracle(&lp).unwrap();
            assert!((r.objective - o.objective).abs() < 1e-9);
            // The oracle's optimum value is 7 exactly when no cheaper explanation exists.
            let recovered = rel_err(&r.x, &truth) <= 1e-6;
            if recovered {
                assert!((o.objective - 7.0).abs() < 1e-9);
            }
        }
    }
    assert_eq!(links.len(), 10);
}

#[test]
fn vmt_full_measurement_is_tight() {
    let f = fig1();
    let ms = build_static_incidence(&f.network, &f.paths, &f.network.link_ids()).unwrap();
    // With every link measured the single-link paths pin down the rest only partly;
    // use a truth on the identifiable columns.
    let truth = [0.0, 0.0, 4.0, 0.0, 0.0, 0.0, 0.0];
    let y = ms.apply(&truth);
    let b = vmt_bounds(&ms, &f.paths, &y, &[1.0; 7]).unwrap();
    assert!((b.lower - 4.0).abs() < 1e-3);
    assert!((b.upper.value().unwrap() - 4.0).abs() < 1e-3);
}

#[test]
fn vmt_reports_invisible_paths() {
    let f = fig2();
    let ms = system(&f, &["l1_3"]);
    let y = [3.0];
    let b = vmt_bounds(&ms, &f.paths, &y, &[1.0; 14]).unwrap();
    assert!((b.lower - 3.0).abs() < 1e-9);
    match &b.upper {
        VmtUpper::Unbounded { paths } => assert_eq!(paths.len(), 13),
        other => panic!("expected unbounded, got {other:?}"),
    }
    // Zero length on the invisible paths makes the maximum finite.
    let mut v = vec![0.0; 14];
    v[10] = 3.0;
    let b = vmt_bounds(&ms, &f.paths, &y, &v).unwrap();
    assert!((b.upper.value().unwrap() - 9.0).abs() < 1e-9);
    assert!(vmt_bounds(&ms, &f.paths, &y, &[1.0; 3]).is_err());
    assert!(vmt_bounds(&ms, &f.paths, &y, &[-1.0; 14]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sandwich_and_l1_optimality(
        mask in proptest::collection::vec(any::<bool>(), 10),
        support in proptest::collection::btree_set(0usize..14, 1..6),
        flows in proptest::collection::vec(1.0f64..100.0, 6),
    ) {
        let f = fig2();
        let all = f.network.link_ids();
        let mut measured: Vec<LinkId> = all.iter().zip(&mask).filter(|(_, &m)| m).map(|(l, _)| l.clone()).collect();
        if measured.is_empty() {
            measured.push(all[0].clone());
        }
        let ms = build_static_incidence(&f.network, &f.paths, &measured).unwrap();
        let mut truth = vec![0.0; 14];
        for (k, &j) in support.iter().enumerate() {
            truth[j] = flows[k];
        }
        let y = ms.apply(&truth);
        let v = f.paths.path_lengths(&f.network).unwrap();
        let vx: f64 = v.iter().zip(&truth).map(|(a, b)| a * b).sum();
        let tol = 1e-7 * vx.max(1.0);

        let b = vmt_bounds(&ms, &f.paths, &y, &v).unwrap();
        prop_assert!(b.lower <= vx + tol);
        if let Some(u) = b.upper.value() {
            prop_assert!(vx <= u + tol);
        }

        let r = estimate_l1(&ms, &f.paths, &y).unwrap();
        let sum_truth: f64 = truth.iter().sum();
        prop_assert!(r.objective <= sum_truth + 1e-7 * sum_truth);
        prop_assert!(r.residual_inf <= 1e-7 * sum_truth);
        let dec = decode_columns(&r.x, &ms, &f.paths).unwrap();
        prop_assert_eq!(&dec.od_flows, &r.od_flows);
        prop_assert_eq!(&dec.splits, &r.splits);
    }
}
