use serde::{Deserialize, Serialize};

use crate::network::PathTable;

/// The three recovery criteria, strictest first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// The full allocation vector.
    Path,
    /// Every OD flow.
    Od,
    /// The sum of all OD flows.
    Total,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Path, Criterion::Od, Criterion::Total];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Path => "path",
            Criterion::Od => "od",
            Criterion::Total => "total",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryCheck {
    pub path: bool,
    pub od: bool,
    pub total: bool,
}

impl RecoveryCheck {
    pub fn get(&self, c: Criterion) -> bool {
        match c {
            Criterion::Path => self.path,
            Criterion::Od => self.od,
            Criterion::Total => self.total,
        }
    }
}

/// `||a - b||_2 / ||b||_2` (absolute error when `b = 0`).
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let num = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

fn od_totals(x: &[f64], pt: &PathTable) -> Vec<f64> {
    let mut f = vec![0.0; pt.num_od()];
    for (j, v) in x.iter().enumerate() {
        f[pt.od_of_path(j)] += v;
    }
    f
}

/// Compares an estimate with the truth under all three criteria.
///
/// * path: `||x_hat - x||_2 <= tol ||x||_2`
/// * od: path success, or `max_k |f_hat_k - f_k| <= tol max_k f_k`
/// * total: od success, or `|sum f_hat - sum f| <= tol sum f`
///
/// Each criterion includes the stricter ones, so the implications hold for
/// every trial regardless of tolerance.
pub fn check_recovery(x_hat: &[f64], x_true: &[f64], pt: &PathTable, tol: f64) -> RecoveryCheck {
    assert_eq!(x_hat.len(), pt.len());
    assert_eq!(x_true.len(), pt.len());
    let path = relative_error(x_hat, x_true) <= tol;
    let f_hat = od_totals(x_hat, pt);
    let f = od_totals(x_true, pt);
    let f_max = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let od = path
        || f_hat
            .iter()
            .zip(&f)
            .all(|(a, b)| (a - b).abs() <= tol * f_max);
    let total_true: f64 = f.iter().sum();
    let total = od || (f_hat.iter().sum::<f64>() - total_true).abs() <= tol * total_true.abs();
    RecoveryCheck { path, od, total }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::fixtures::fig2;
    use proptest::prelude::*;

    fn truth() -> Vec<f64> {
        let mut x = vec![0.0; 14];
        x[1] = 10.0;
        x[7] = 20.0;
        x[10] = 10.0;
        x[13] = 30.0;
        x
    }

    #[test]
    fn exact_estimate_passes_everything() {
        let f = fig2();
        let c = check_recovery(&truth(), &truth(), &f.paths, 1e-6);
        assert_eq!(
            c,
            RecoveryCheck {
                path: true,
                od: true,
                total: true
            }
        );
    }

    #[test]
    fn swapping_within_an_od_keeps_flows() {
        let f = fig2();
        let mut x = truth();
        x.swap(10, 13);
        let c = check_recovery(&x, &truth(), &f.paths, 1e-6);
        assert_eq!(
            c,
            RecoveryCheck {
                path: false,
                od: true,
                total: true
            }
        );
    }

    #[test]
    fn moving_mass_across_ods_keeps_total() {
        let f = fig2();
        let mut x = truth();
        x[1] -= 5.0;
        x[7] += 5.0;
        let c = check_recovery(&x, &truth(), &f.paths, 1e-6);
        assert_eq!(
            c,
            RecoveryCheck {
                path: false,
                od: false,
                total: true
            }
        );
        x[7] += 1.0;
        assert_eq!(
            check_recovery(&x, &truth(), &f.paths, 1e-6),
            RecoveryCheck::default()
        );
    }

    #[test]
    fn relative_error_of_zero_truth() {
        assert_eq!(relative_error(&[3.0, 4.0], &[0.0, 0.0]), 5.0);
        assert_eq!(relative_error(&[1.0, 1.0], &[1.0, 1.0]), 0.0);
    }

    proptest! {
        #[test]
        fn criteria_are_nested(
            a in proptest::collection::vec(0.0f64..10.0, 14),
            b in proptest::collection::vec(0.0f64..10.0, 14),
            tol in prop_oneof![Just(1e-6), 0.0f64..2.0],
        ) {
            let f = fig2();
            let c = check_recovery(&a, &b, &f.paths, tol);
            prop_assert!(!c.path || c.od);
            prop_assert!(!c.od || c.total);
        }
    }
}
