use nalgebra::DMatrix;

use super::{
    mat_vec, norm_inf, PivotRule, Sense, Solution, SolverError, SolverOptions, StandardLp, Status,
};

const TOL_PIVOT: f64 = 1e-9;
const TOL_REDUCED: f64 = 1e-9;
const REFACTOR_EVERY: usize = 50;

/// Solves `optimize c^T x` s.t. `A x = b`, `x >= 0` by two-phase revised simplex.
///
/// Data are scaled so that `b` and `c` have unit max-norm. Phase 1 minimizes
/// the sum of one artificial per row; a phase-1 optimum above `tol_feas` means
/// the system is infeasible. Artificials left basic at zero on redundant rows
/// stay there through phase 2 and are never allowed to re-enter.
pub fn solve_lp(p: &StandardLp, opts: &SolverOptions) -> Result<Solution, SolverError> {
    p.check()?;
    let (m, n) = p.a.shape();
    let sign = match p.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let b_scale = scale_of(&p.b);
    let c_scale = scale_of(&p.c);

    // Row flips make the scaled rhs nonnegative so the all-artificial basis is feasible.
    let flip: Vec<f64> =
        p.b.iter()
            .map(|&v| if v < 0.0 { -1.0 } else { 1.0 })
            .collect();
    let a = DMatrix::from_fn(m, n, |i, j| flip[i] * p.a[(i, j)]);
    let b: Vec<f64> =
        p.b.iter()
            .zip(&flip)
            .map(|(v, f)| v * f / b_scale)
            .collect();
    let c: Vec<f64> = p.c.iter().map(|v| sign * v / c_scale).collect();

    let mut tab = Tableau::new(a, b, opts.pivot_rule);
    let mut budget = opts.max_iter;

    let phase1_cost: Vec<f64> = (0..n + m).map(|j| if j < n { 0.0 } else { 1.0 }).collect();
    let outcome = tab.run(&phase1_cost, &mut budget);
    if outcome == Outcome::IterationLimit {
        return Ok(tab.finish(p, Status::IterationLimit, None, b_scale));
    }
    let infeasibility: f64 = tab
        .basis
        .iter()
        .zip(&tab.xb)
        .filter(|(&j, _)| j >= n)
        .map(|(_, &v)| v)
        .sum();
    if infeasibility > opts.tol_feas {
        return Ok(tab.finish(p, Status::Infeasible, None, b_scale));
    }
    tab.drive_out_artificials();

    let phase2_cost: Vec<f64> = (0..n + m).map(|j| if j < n { c[j] } else { 0.0 }).collect();
    let outcome = tab.run(&phase2_cost, &mut budget);
    let status = match outcome {
        Outcome::Optimal => Status::Optimal,
        Outcome::Unbounded => Status::Unbounded,
        Outcome::IterationLimit => Status::IterationLimit,
    };
    let duals = (status == Status::Optimal).then(|| {
        let pi = tab.duals(&phase2_cost);
        (0..m)
            .map(|i| sign * c_scale * flip[i] * pi[i])
            .collect::<Vec<f64>>()
    });
    Ok(tab.finish(p, status, duals, b_scale))
}

fn scale_of(v: &[f64]) -> f64 {
    let s = norm_inf(v);
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Tableau {
    a: DMatrix<f64>,
    b: Vec<f64>,
    /// Basic variable of each row; `j >= n` denotes the artificial of row `j - n`.
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: DMatrix<f64>,
    xb: Vec<f64>,
    rule: PivotRule,
    pivots: usize,
}

impl Tableau {
    fn new(a: DMatrix<f64>, b: Vec<f64>, rule: PivotRule) -> Self {
        let (m, n) = a.shape();
        let mut is_basic = vec![false; n + m];
        is_basic[n..].iter_mut().for_each(|f| *f = true);
        Tableau {
            basis: (n..n + m).collect(),
            is_basic,
            binv: DMatrix::identity(m, m),
            xb: b.clone(),
            a,
            b,
            rule,
            pivots: 0,
        }
    }

    fn n(&self) -> usize {
        self.a.ncols()
    }

    fn column(&self, j: usize) -> Vec<f64> {
        let n = self.n();
        if j < n {
            self.a.column(j).iter().copied().collect()
        } else {
            let mut e = vec![0.0; self.a.nrows()];
            e[j - n] = 1.0;
            e
        }
    }

    /// `pi = c_B^T B^{-1}`.
    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.a.nrows();
        (0..m)
            .map(|k| {
                (0..m)
                    .map(|i| cost[self.basis[i]] * self.binv[(i, k)])
                    .sum()
            })
            .collect()
    }

    fn reduced_cost(&self, pi: &[f64], cost: &[f64], j: usize) -> f64 {
        cost[j]
            - self
                .a
                .column(j)
                .iter()
                .zip(pi)
                .map(|(a, p)| a * p)
                .sum::<f64>()
    }

    fn run(&mut self, cost: &[f64], budget: &mut usize) -> Outcome {
        loop {
            let pi = self.duals(cost);
            let mut entering = None;
            let mut best = -TOL_REDUCED;
            for j in 0..self.n() {
                if self.is_basic[j] {
                    continue;
                }
                let d = self.reduced_cost(&pi, cost, j);
                if d < best {
                    entering = Some(j);
                    match self.rule {
                        PivotRule::Bland => break,
                        PivotRule::LargestCoefficient => best = d,
                    }
                }
            }
            let Some(j) = entering else {
                return Outcome::Optimal;
            };
            if *budget == 0 {
                return Outcome::IterationLimit;
            }
            *budget -= 1;

            let alpha = mat_vec(&self.binv, &self.column(j));
            let mut leave: Option<(usize, f64)> = None;
            for (i, &ai) in alpha.iter().enumerate() {
                if ai <= TOL_PIVOT {
                    continue;
                }
                let theta = self.xb[i].max(0.0) / ai;
                leave = match leave {
                    None => Some((i, theta)),
                    Some((r, t)) => {
                        let tie = (theta - t).abs() <= 1e-12 * (1.0 + t);
                        if (tie && self.basis[i] < self.basis[r]) || (!tie && theta < t) {
                            Some((i, theta))
                        } else {
                            Some((r, t))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Outcome::Unbounded;
            };
            self.pivot(r, j, &alpha);
        }
    }

    fn pivot(&mut self, r: usize, j: usize, alpha: &[f64]) {
        let m = self.a.nrows();
        let theta = self.xb[r].max(0.0) / alpha[r];
        for i in 0..m {
            if i != r {
                self.xb[i] -= theta * alpha[i];
            }
        }
        self.xb[r] = theta;

        let pr = alpha[r];
        for k in 0..m {
            self.binv[(r, k)] /= pr;
        }
        for i in 0..m {
            if i == r || alpha[i] == 0.0 {
                continue;
            }
            let f = alpha[i];
            for k in 0..m {
                let v = self.binv[(r, k)];
                self.binv[(i, k)] -= f * v;
            }
        }
        self.is_basic[self.basis[r]] = false;
        self.is_basic[j] = true;
        self.basis[r] = j;
        self.pivots += 1;
        if self.pivots.is_multiple_of(REFACTOR_EVERY) {
            self.refactor();
        }
    }

    /// Recomputes `B^{-1}` and `x_B` from scratch to shed accumulated roundoff.
    fn refactor(&mut self) {
        let m = self.a.nrows();
        let mut bmat = DMatrix::zeros(m, m);
        for (i, &j) in self.basis.iter().enumerate() {
            for (k, v) in self.column(j).into_iter().enumerate() {
                bmat[(k, i)] = v;
            }
        }
        if let Some(inv) = bmat.try_inverse() {
            self.xb = mat_vec(&inv, &self.b);
            self.binv = inv;
        }
    }

    /// Pivots zero-valued artificials out of the basis wherever a structural
    /// column has a nonzero entry in their row.
    fn drive_out_artificials(&mut self) {
        let n = self.n();
        let m = self.a.nrows();
        for r in 0..m {
            if self.basis[r] < n {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in (0..n).filter(|&j| !self.is_basic[j]) {
                let v: f64 = (0..m).map(|k| self.binv[(r, k)] * self.a[(k, j)]).sum();
                if v.abs() > TOL_PIVOT && best.is_none_or(|(_, b)| v.abs() > b) {
                    best = Some((j, v.abs()));
                }
            }
            if let Some((j, _)) = best {
                // Degenerate pivot: the artificial sits at zero, so a negative
                // pivot element is acceptable here.
                let alpha = mat_vec(&self.binv, &self.column(j));
                self.pivot(r, j, &alpha);
            }
        }
    }

    fn finish(
        &self,
        p: &StandardLp,
        status: Status,
        duals: Option<Vec<f64>>,
        b_scale: f64,
    ) -> Solution {
        let n = self.n();
        let mut x = vec![0.0; n];
        for (&j, &v) in self.basis.iter().zip(&self.xb) {
            if j < n {
                x[j] = v.max(0.0) * b_scale;
            }
        }
        let ax = mat_vec(&p.a, &x);
        let residual_eq = ax
            .iter()
            .zip(&p.b)
            .fold(0.0f64, |m, (l, r)| m.max((l - r).abs()));
        let objective = x.iter().zip(&p.c).map(|(a, b)| a * b).sum();
        Solution {
            x,
            status,
            objective,
            residual_eq,
            residual_cone: 0.0,
            iterations: self.pivots,
            duals,
            basis: Some(self.basis.clone()),
        }
    }
}
