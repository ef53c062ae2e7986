use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use super::nnls::nnls;
use super::{
    dot, mat_vec, norm2, norm_inf, project_ball, ConeObjective, ConeProblem, Solution, SolverError,
    SolverOptions, Status,
};

const RELAXATION: f64 = 1.6;
const CHECK_EVERY: usize = 5;
const ADAPT_EVERY: usize = 50;
const CERTIFY_AFTER: usize = 200;

/// Solves `min f(x)` over `{x >= 0 : ||y - A x||_2 <= delta}` by ADMM.
///
/// The splitting copies `x` twice: `u = x` carries the nonnegativity
/// constraint and `z = A x` carries the ball constraint. Each iteration takes
/// a proximal step on the objective (a linear solve against a cached Cholesky
/// factor of `sigma I + A^T A`), projects onto the orthant and onto the ball,
/// and updates the scaled duals. The penalty is rebalanced from the ratio of
/// primal and dual residuals.
///
/// The returned point is the orthant copy `u`, so `min(x) >= 0` holds exactly.
/// Infeasibility is reported when the dual increment `A x - z` converges to a
/// nonzero separating direction `d` with `A^T d >= 0` and `d^T y + delta ||d|| < 0`.
/// Before iterating, the distance from `y` to the cone `{A x : x >= 0}` is
/// computed by nonnegative least squares; if it exceeds `delta` the problem is
/// reported infeasible at once, with the closest point as `x`.
///
/// Every 50 iterations the support of the current iterate is used to solve the
/// optimality conditions in closed form (ball active, off-support variables
/// zero). If the candidate is nonnegative and dual feasible it is optimal and
/// is returned directly. This is only attempted for `delta > 0`.
pub fn solve_cone(p: &ConeProblem, opts: &SolverOptions) -> Result<Solution, SolverError> {
    let (m, n) = p.a.shape();
    if p.y.len() != m {
        return Err(SolverError::DimensionMismatch(format!(
            "y has {} entries, A has {m} rows",
            p.y.len()
        )));
    }
    if !(p.delta >= 0.0 && p.delta.is_finite()) {
        return Err(SolverError::InvalidInput(format!(
            "delta must be finite and >= 0, got {}",
            p.delta
        )));
    }
    let weights = match &p.weights {
        Some(w) if w.len() != n => {
            return Err(SolverError::DimensionMismatch(format!(
                "{} weights for {n} variables",
                w.len()
            )));
        }
        Some(w) if w.iter().any(|&v| !(v > 0.0 && v.is_finite())) => {
            return Err(SolverError::InvalidInput("weights must be positive".into()));
        }
        Some(w) => w.clone(),
        None => vec![1.0; n],
    };
    if p.a.iter().chain(&p.y).any(|v| !v.is_finite()) {
        return Err(SolverError::InvalidInput("non-finite problem data".into()));
    }

    // x = 0 is feasible and minimizes both objectives.
    if norm2(&p.y) <= p.delta {
        return Ok(finish(p, &weights, vec![0.0; n], Status::Optimal, 0));
    }

    let scale = norm_inf(&p.y).max(p.delta);
    let y: Vec<f64> = p.y.iter().map(|v| v / scale).collect();
    let delta = p.delta / scale;
    let wmax = norm_inf(&weights);
    let w: Vec<f64> = weights.iter().map(|v| v / wmax).collect();

    let closest = nnls(&p.a, &y);
    let dist = norm2(&sub(&y, &mat_vec(&p.a, &closest)));
    if dist > delta * (1.0 + 1e-9) + opts.tol_feas {
        let x: Vec<f64> = closest.iter().map(|v| v * scale).collect();
        return Ok(finish(p, &weights, x, Status::Infeasible, 0));
    }

    let mut admm = Admm::new(&p.a, y, delta, w, p.objective, opts);
    let (u, status, iterations) = admm.run(opts);
    let x: Vec<f64> = u.iter().map(|v| v * scale).collect();
    Ok(finish(p, &weights, x, status, iterations))
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p - q).collect()
}

fn finish(
    p: &ConeProblem,
    weights: &[f64],
    x: Vec<f64>,
    status: Status,
    iterations: usize,
) -> Solution {
    let ax = mat_vec(&p.a, &x);
    let resid: Vec<f64> = p.y.iter().zip(&ax).map(|(a, b)| a - b).collect();
    let objective = match p.objective {
        ConeObjective::WeightedL1 => dot(weights, &x),
        ConeObjective::L2 => norm2(&x),
    };
    Solution {
        residual_eq: norm_inf(&resid),
        residual_cone: (norm2(&resid) - p.delta).max(0.0),
        x,
        status,
        objective,
        iterations,
        duals: None,
        basis: None,
    }
}

struct Admm<'a> {
    a: &'a DMatrix<f64>,
    at: DMatrix<f64>,
    ata: DMatrix<f64>,
    y: Vec<f64>,
    delta: f64,
    w: Vec<f64>,
    objective: ConeObjective,
    rho: f64,
    tol_feas: f64,
    factor: Cholesky<f64, Dyn>,
}

impl<'a> Admm<'a> {
    fn new(
        a: &'a DMatrix<f64>,
        y: Vec<f64>,
        delta: f64,
        w: Vec<f64>,
        objective: ConeObjective,
        opts: &SolverOptions,
    ) -> Self {
        let rho = opts.rho;
        let at = a.transpose();
        let ata = &at * a;
        let factor = factorize(&ata, sigma(objective, rho));
        Admm {
            a,
            at,
            ata,
            y,
            delta,
            w,
            objective,
            rho,
            tol_feas: opts.tol_feas,
            factor,
        }
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        match self.objective {
            ConeObjective::WeightedL1 => self.w.clone(),
            ConeObjective::L2 => x.to_vec(),
        }
    }

    fn run(&mut self, opts: &SolverOptions) -> (Vec<f64>, Status, usize) {
        let (m, n) = self.a.shape();
        let mut u = vec![0.0; n];
        let mut z = self.y.clone();
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; m];

        for k in 1..=opts.max_iter {
            // Proximal step on f with the two quadratic coupling terms.
            let zq: Vec<f64> = z.iter().zip(&q).map(|(a, b)| a - b).collect();
            let atzq = mat_vec(&self.at, &zq);
            let mut rhs: Vec<f64> = (0..n).map(|i| u[i] - p[i] + atzq[i]).collect();
            if self.objective == ConeObjective::WeightedL1 {
                rhs.iter_mut()
                    .zip(&self.w)
                    .for_each(|(r, w)| *r -= w / self.rho);
            }
            let x: Vec<f64> = self
                .factor
                .solve(&DVector::from_vec(rhs))
                .as_slice()
                .to_vec();
            let ax = mat_vec(self.a, &x);

            let xr: Vec<f64> = (0..n)
                .map(|i| RELAXATION * x[i] + (1.0 - RELAXATION) * u[i])
                .collect();
            let axr: Vec<f64> = (0..m)
                .map(|i| RELAXATION * ax[i] + (1.0 - RELAXATION) * z[i])
                .collect();

            let u_new: Vec<f64> = (0..n).map(|i| (xr[i] + p[i]).max(0.0)).collect();
            (0..n).for_each(|i| p[i] += xr[i] - u_new[i]);
            let shifted: Vec<f64> = (0..m).map(|i| axr[i] + q[i]).collect();
            let z_new = project_ball(&shifted, &self.y, self.delta);
            (0..m).for_each(|i| q[i] += axr[i] - z_new[i]);
            u = u_new;
            z = z_new;

            if k % CHECK_EVERY != 0 {
                continue;
            }

            let r_x = (0..n).fold(0.0f64, |acc, i| acc.max((x[i] - u[i]).abs()));
            let gap: Vec<f64> = (0..m).map(|i| ax[i] - z[i]).collect();
            let r_z = norm_inf(&gap);
            let au = mat_vec(self.a, &u);
            let cone_res = (norm2(
                &self
                    .y
                    .iter()
                    .zip(&au)
                    .map(|(a, b)| a - b)
                    .collect::<Vec<_>>(),
            ) - self.delta)
                .max(0.0);

            let g = self.grad(&u);
            let atq = mat_vec(&self.at, &q);
            let dual: Vec<f64> = (0..n).map(|i| g[i] + self.rho * (p[i] + atq[i])).collect();
            let s = norm_inf(&dual);
            let dual_scale = norm_inf(&g)
                .max(self.rho * norm_inf(&p))
                .max(self.rho * norm_inf(&atq))
                .max(1.0);

            if r_x <= opts.tol_cone
                && r_z <= opts.tol_cone
                && cone_res <= opts.tol_feas
                && s <= opts.tol_cone * dual_scale
            {
                return (self.polish(&u).unwrap_or(u), Status::Optimal, k);
            }

            if k % ADAPT_EVERY == 0 {
                if let Some(x) = self.polish(&u) {
                    return (x, Status::Optimal, k);
                }
            }

            if k >= CERTIFY_AFTER && k % ADAPT_EVERY == 0 && self.certifies_infeasible(&gap) {
                return (u, Status::Infeasible, k);
            }

            if k % ADAPT_EVERY == 0 {
                let prim_scale = norm_inf(&x).max(norm_inf(&ax)).max(1e-12);
                let ratio = ((r_x.max(r_z) / prim_scale) / (s / dual_scale).max(1e-300)).sqrt();
                if !(0.2..=5.0).contains(&ratio) {
                    let new_rho = (self.rho * ratio).clamp(1e-6, 1e6);
                    let f = self.rho / new_rho;
                    p.iter_mut().for_each(|v| *v *= f);
                    q.iter_mut().for_each(|v| *v *= f);
                    self.rho = new_rho;
                    if self.objective == ConeObjective::L2 {
                        self.factor = factorize(&self.ata, sigma(self.objective, self.rho));
                    }
                }
            }
        }
        match self.polish(&u) {
            Some(x) => (x, Status::Optimal, opts.max_iter),
            None => (u, Status::IterationLimit, opts.max_iter),
        }
    }

    /// Tries supports read off `u` at a few thresholds, each refined by a
    /// short active-set loop.
    fn polish(&self, u: &[f64]) -> Option<Vec<f64>> {
        let umax = norm_inf(u);
        if self.delta <= 0.0 || umax == 0.0 {
            return None;
        }
        let mut tried: Vec<Vec<usize>> = Vec::new();
        for thresh in [1e-3, 1e-5, 1e-7] {
            let support: Vec<usize> = (0..u.len()).filter(|&i| u[i] > thresh * umax).collect();
            if tried.contains(&support) {
                continue;
            }
            if let Some(x) = self.refine(support.clone()) {
                return Some(x);
            }
            tried.push(support);
        }
        None
    }

    fn refine(&self, mut support: Vec<usize>) -> Option<Vec<f64>> {
        let n = self.a.ncols();
        for _ in 0..2 * n {
            if support.is_empty() {
                return None;
            }
            let xp = self.candidate(&support)?;
            if let Some(j) = (0..xp.len())
                .filter(|&j| !(xp[j] > 0.0))
                .min_by(|&a, &b| xp[a].total_cmp(&xp[b]))
            {
                support.remove(j);
                continue;
            }
            let mut x = vec![0.0; n];
            for (j, &i) in support.iter().enumerate() {
                x[i] = xp[j];
            }
            let r = sub(&self.y, &mat_vec(self.a, &x));
            if norm2(&r) > self.delta + self.tol_feas {
                return None;
            }
            // Off-support multipliers must be nonnegative: A^T r <= gradient / lambda there.
            let atr = mat_vec(&self.at, &r);
            let on: Vec<f64> = support.iter().map(|&i| atr[i]).collect();
            let t = match self.objective {
                ConeObjective::WeightedL1 => {
                    on.iter()
                        .zip(&support)
                        .map(|(g, &i)| g / self.w[i])
                        .sum::<f64>()
                        / support.len() as f64
                }
                ConeObjective::L2 => 0.0,
            };
            let slack = 1e-9 * norm_inf(&on).max(1e-12);
            let worst = (0..n)
                .filter(|i| support.binary_search(i).is_err())
                .map(|i| (i, atr[i] - t * self.w[i] - slack))
                .filter(|&(_, v)| v > 0.0)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            match worst {
                None => return Some(x),
                Some((i, _)) => {
                    let pos = support.binary_search(&i).unwrap_err();
                    support.insert(pos, i);
                }
            }
        }
        None
    }

    /// Stationary point with the ball active and `x_i = 0` off `support`; entries may be negative.
    fn candidate(&self, support: &[usize]) -> Option<DVector<f64>> {
        let m = self.a.nrows();
        let k = support.len();
        let ap = DMatrix::from_fn(m, k, |i, j| self.a[(i, support[j])]);
        let eig = SymmetricEigen::new(ap.transpose() * &ap);
        let smax = eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(*v));
        let c =
            eig.eigenvectors.transpose() * (ap.transpose() * DVector::from_column_slice(&self.y));
        let rank_tol = 1e-10 * smax.max(1e-300);
        let ranged = |i: usize| eig.eigenvalues[i] > rank_tol;
        // Squared distance from y to range(A_P), computed directly to avoid cancellation.
        let ls = &eig.eigenvectors
            * DVector::from_fn(k, |i, _| {
                if ranged(i) {
                    c[i] / eig.eigenvalues[i]
                } else {
                    0.0
                }
            });
        let perp2 = (DVector::from_column_slice(&self.y) - &ap * ls).norm_squared();
        let target = self.delta * self.delta;
        if target <= perp2 * (1.0 + 1e-12) {
            return None;
        }

        match self.objective {
            ConeObjective::WeightedL1 => {
                if eig.eigenvalues.iter().any(|&v| v <= rank_tol) {
                    return None;
                }
                let wp = DVector::from_fn(k, |j, _| self.w[support[j]]);
                let vw = eig.eigenvectors.transpose() * &wp;
                let q: f64 = (0..k).map(|i| vw[i] * vw[i] / eig.eigenvalues[i]).sum();
                // r = y - A_P x_P satisfies A_P^T r = t w_P and ||r|| = delta.
                let t = ((target - perp2) / q).sqrt();
                let coef = DVector::from_fn(k, |i, _| (c[i] - t * vw[i]) / eig.eigenvalues[i]);
                Some(&eig.eigenvectors * coef)
            }
            ConeObjective::L2 => {
                // Residual^2 as a function of the multiplier, decreasing in lambda.
                let res2 = |lam: f64| {
                    perp2
                        + (0..k)
                            .filter(|&i| ranged(i))
                            .map(|i| {
                                let s = eig.eigenvalues[i];
                                c[i] * c[i] / (s * (1.0 + lam * s).powi(2))
                            })
                            .sum::<f64>()
                };
                let (mut lo, mut hi) = (-60.0f64, 60.0f64);
                if res2(hi.exp()) > target {
                    return None;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if res2(mid.exp()) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let lam = (0.5 * (lo + hi)).exp();
                let coef = DVector::from_fn(k, |i, _| {
                    lam * c[i] / (1.0 + lam * eig.eigenvalues[i].max(0.0))
                });
                Some(&eig.eigenvectors * coef)
            }
        }
    }

    /// Checks whether `d = A x - z` separates the orthant image from the ball.
    fn certifies_infeasible(&self, d: &[f64]) -> bool {
        let dn = norm2(d);
        if dn < 1e-6 {
            return false;
        }
        let atd = mat_vec(&self.at, d);
        let col_ok = atd.iter().all(|&v| v >= -1e-9 * dn);
        col_ok && dot(d, &self.y) + self.delta * dn < -1e-6 * dn
    }
}

fn sigma(objective: ConeObjective, rho: f64) -> f64 {
    match objective {
        ConeObjective::WeightedL1 => 1.0,
        ConeObjective::L2 => 1.0 + 1.0 / rho,
    }
}

fn factorize(ata: &DMatrix<f64>, sigma: f64) -> Cholesky<f64, Dyn> {
    let n = ata.nrows();
    let mut k = ata.clone();
    for i in 0..n {
        k[(i, i)] += sigma;
    }
    Cholesky::new(k).expect("sigma I + A^T A is positive definite")
}
