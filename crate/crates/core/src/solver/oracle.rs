use nalgebra::DMatrix;

use super::{mat_vec, Sense, Solution, SolverError, StandardLp, Status};

const MAX_ROWS: usize = 8;
const MAX_COLS: usize = 16;
const RANK_TOL: f64 = 1e-9;

/// Brute-force LP reference: enumerates every basic solution and keeps the best feasible one.
///
/// Picks a maximal set of linearly independent rows (rank `r`), then solves
/// the `r x r` system for every `r`-subset of columns. Only meaningful for
/// bounded problems; intended as a test oracle for [`super::solve_lp`].
pub fn lp_oracle(p: &StandardLp) -> Result<Solution, SolverError> {
    p.check()?;
    let (m, n) = p.a.shape();
    if m > MAX_ROWS || n > MAX_COLS {
        return Err(SolverError::TooLarge { rows: m, cols: n });
    }
    let rows = independent_rows(&p.a);
    let r = rows.len();
    let b_tol = 1e-7 * p.b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |x: Vec<f64>| {
        if x.iter().any(|&v| v < -1e-9) {
            return;
        }
        let x: Vec<f64> = x.into_iter().map(|v| v.max(0.0)).collect();
        let ax = mat_vec(&p.a, &x);
        if ax.iter().zip(&p.b).any(|(l, rhs)| (l - rhs).abs() > b_tol) {
            return;
        }
        let obj: f64 = x.iter().zip(&p.c).map(|(a, b)| a * b).sum();
        let better = match (&best, p.sense) {
            (None, _) => true,
            (Some((o, _)), Sense::Minimize) => obj < *o,
            (Some((o, _)), Sense::Maximize) => obj > *o,
        };
        if better {
            best = Some((obj, x));
        }
    };

    if r == 0 {
        consider(vec![0.0; n]);
    } else {
        for cols in Combinations::new(n, r) {
            let bmat = DMatrix::from_fn(r, r, |i, j| p.a[(rows[i], cols[j])]);
            if bmat.clone().svd(false, false).rank(RANK_TOL) < r {
                continue;
            }
            let rhs = nalgebra::DVector::from_iterator(r, rows.iter().map(|&i| p.b[i]));
            let Some(xb) = bmat.lu().solve(&rhs) else {
                continue;
            };
            let mut x = vec![0.0; n];
            for (k, &j) in cols.iter().enumerate() {
                x[j] = xb[k];
            }
            consider(x);
        }
    }

    Ok(match best {
        Some((objective, x)) => {
            let ax = mat_vec(&p.a, &x);
            let residual_eq = ax
                .iter()
                .zip(&p.b)
                .fold(0.0f64, |acc, (l, r)| acc.max((l - r).abs()));
            Solution {
                x,
                status: Status::Optimal,
                objective,
                residual_eq,
                residual_cone: 0.0,
                iterations: 0,
                duals: None,
                basis: None,
            }
        }
        None => Solution {
            x: vec![0.0; n],
            status: Status::Infeasible,
            objective: f64::NAN,
            residual_eq: f64::NAN,
            residual_cone: 0.0,
            iterations: 0,
            duals: None,
            basis: None,
        },
    })
}

fn independent_rows(a: &DMatrix<f64>) -> Vec<usize> {
    let mut rows: Vec<usize> = Vec::new();
    for i in 0..a.nrows() {
        let mut trial = rows.clone();
        trial.push(i);
        let sub = DMatrix::from_fn(trial.len(), a.ncols(), |r, c| a[(trial[r], c)]);
        if sub.svd(false, false).rank(RANK_TOL) == trial.len() {
            rows = trial;
        }
    }
    rows
}

/// Lexicographic `k`-subsets of `0..n`.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_count() {
        assert_eq!(Combinations::new(5, 2).count(), 10);
        assert_eq!(Combinations::new(4, 0).count(), 1);
        assert_eq!(Combinations::new(16, 8).count(), 12870);
    }

    #[test]
    fn infeasible_instance() {
        let p = StandardLp::new(
            vec![1.0],
            DMatrix::from_element(1, 1, 1.0),
            vec![-1.0],
            Sense::Minimize,
        );
        assert_eq!(lp_oracle(&p).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn guard() {
        let p = StandardLp::new(
            vec![1.0; 17],
            DMatrix::zeros(1, 17),
            vec![0.0],
            Sense::Minimize,
        );
        assert_eq!(
            lp_oracle(&p),
            Err(SolverError::TooLarge { rows: 1, cols: 17 })
        );
    }

    #[test]
    fn symmetric_ties() {
        // Two optimal vertices with equal cost.
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let p = StandardLp::new(vec![1.0, 1.0, 2.0], a, vec![3.0], Sense::Minimize);
        let s = lp_oracle(&p).unwrap();
        assert!((s.objective - 3.0).abs() < 1e-12);
    }
}
