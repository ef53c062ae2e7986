use crate::network::{LinkId, PathTable};

use super::{ExperimentError, Result, TrialRng};

/// Uniform `s`-subset of `0..n`, sorted.
pub fn sample_support(n: usize, s: usize, rng: &mut TrialRng) -> Result<Vec<usize>> {
    if s == 0 || s > n {
        return Err(ExperimentError::SOutOfRange { s, n });
    }
    let mut v = rng.partial_shuffle(n, s);
    v.sort_unstable();
    Ok(v)
}

/// Random allocation on `support`.
///
/// Every OD pair touched by the support gets a flow drawn uniformly from
/// `flow_range` and a uniform split over its supported paths. Other entries are zero.
pub fn sample_allocation(
    pt: &PathTable,
    support: &[usize],
    rng: &mut TrialRng,
    flow_range: (f64, f64),
) -> Result<Vec<f64>> {
    if let Some(&bad) = support.iter().find(|&&j| j >= pt.len()) {
        return Err(ExperimentError::InvalidSupport(bad));
    }
    let (lo, hi) = flow_range;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(ExperimentError::InvalidConfig(format!(
            "flow range ({lo}, {hi}) must be positive"
        )));
    }
    let mut x = vec![0.0; pt.len()];
    for k in 0..pt.num_od() {
        let on: Vec<usize> = pt
            .paths_of_od(k)
            .into_iter()
            .filter(|j| support.contains(j))
            .collect();
        if on.is_empty() {
            continue;
        }
        let f = rng.uniform_in(lo, hi);
        let w = rng.simplex(on.len());
        for (&j, wj) in on.iter().zip(w) {
            x[j] = f * wj;
        }
    }
    Ok(x)
}

/// Uniform `m`-subset of `links`, returned in the order of `links`.
pub fn sample_measurements(links: &[LinkId], m: usize, rng: &mut TrialRng) -> Result<Vec<LinkId>> {
    if m == 0 || m > links.len() {
        return Err(ExperimentError::MOutOfRange {
            m,
            links: links.len(),
        });
    }
    let order = rng.permutation(links.len());
    Ok(first_measured(links, &order, m))
}

/// The first `m` links of a random `order`, restored to network order.
///
/// Taking prefixes of one permutation makes measurement sets nested in `m`.
pub fn first_measured(links: &[LinkId], order: &[usize], m: usize) -> Vec<LinkId> {
    let mut idx = order[..m].to_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| links[i].clone()).collect()
}

/// `y + N(0, nu^2)` entrywise, not clipped.
pub fn add_noise(y: &[f64], nu: f64, rng: &mut TrialRng) -> Vec<f64> {
    if nu == 0.0 {
        return y.to_vec();
    }
    y.iter().map(|v| v + nu * rng.normal()).collect()
}
