use nalgebra::{DMatrix, DVector};

use super::mat_vec;

/// Nonnegative least squares `min ||A x - b||_2` s.t. `x >= 0` (Lawson-Hanson active set).
pub fn nnls(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let (m, n) = a.shape();
    assert_eq!(b.len(), m);
    let at = a.transpose();
    let anorm = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol = 10.0
        * f64::EPSILON
        * anorm.max(1.0)
        * (m.max(n) as f64)
        * b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));

    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let gradient = |x: &[f64]| -> Vec<f64> {
        let ax = mat_vec(a, x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        mat_vec(&at, &r)
    };

    for _ in 0..3 * n + 10 {
        let w = gradient(&x);
        let Some(j) = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &k| w[i].total_cmp(&w[k]))
        else {
            break;
        };
        passive[j] = true;
        loop {
            let z = restricted_lstsq(a, b, &passive);
            if (0..n).filter(|&i| passive[i]).all(|i| z[i] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for i in (0..n).filter(|&i| passive[i] && z[i] <= 0.0) {
                alpha = alpha.min(x[i] / (x[i] - z[i]));
            }
            for i in 0..n {
                x[i] += alpha * (z[i] - x[i]);
                if passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

/// Least squares over the columns flagged in `keep`, zero elsewhere.
fn restricted_lstsq(a: &DMatrix<f64>, b: &[f64], keep: &[bool]) -> Vec<f64> {
    let cols: Vec<usize> = (0..keep.len()).filter(|&j| keep[j]).collect();
    let mut out = vec![0.0; keep.len()];
    if cols.is_empty() {
        return out;
    }
    let sub = DMatrix::from_fn(a.nrows(), cols.len(), |i, k| a[(i, cols[k])]);
    let svd = sub.svd(true, true);
    let z = svd
        .solve(&DVector::from_column_slice(b), 1e-12)
        .expect("SVD with vectors");
    for (k, &j) in cols.iter().enumerate() {
        out[j] = z[k];
    }
    out
}
