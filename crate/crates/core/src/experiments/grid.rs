//! Path counts on the monotone square grid from `(0, 0)` to `(N/2, N/2)`.

use super::{ExperimentError, Result};

const MAX_N: usize = 60;

fn check_n(n: usize) -> Result<()> {
    if n == 0 || !n.is_multiple_of(2) || n > MAX_N {
        return Err(ExperimentError::NOutOfRange(n));
    }
    Ok(())
}

/// Number of monotone paths with `n` steps, `binomial(n, n/2)`.
pub fn grid_path_count(n: usize) -> Result<u128> {
    check_n(n)?;
    let k = (n / 2) as u128;
    // C(n, i) stays integral after each step, and C(60, 30) fits easily.
    Ok((0..k).fold(1u128, |acc, i| acc * (n as u128 - i) / (i + 1)))
}

/// Number of monotone paths with `n` steps and at most `t` direction changes.
pub fn grid_paths_max_turns(n: usize, t: usize) -> Result<u128> {
    check_n(n)?;
    let h = n / 2;
    let turns = t.min(n);
    // ways[e][u][d][r]: paths using e east and u north steps, last heading d, r turns.
    let idx =
        |e: usize, u: usize, d: usize, r: usize| ((e * (h + 1) + u) * 2 + d) * (turns + 1) + r;
    let mut ways = vec![0u128; (h + 1) * (h + 1) * 2 * (turns + 1)];
    ways[idx(1, 0, 0, 0)] = 1;
    ways[idx(0, 1, 1, 0)] = 1;
    for e in 0..=h {
        for u in 0..=h {
            for d in 0..2 {
                for r in 0..=turns {
                    let w = ways[idx(e, u, d, r)];
                    if w == 0 {
                        continue;
                    }
                    for nd in 0..2 {
                        let (ne, nu) = if nd == 0 { (e + 1, u) } else { (e, u + 1) };
                        let nr = r + usize::from(nd != d);
                        if ne > h || nu > h || nr > turns {
                            continue;
                        }
                        ways[idx(ne, nu, nd, nr)] += w;
                    }
                }
            }
        }
    }
    Ok((0..2)
        .flat_map(|d| (0..=turns).map(move |r| (d, r)))
        .map(|(d, r)| ways[idx(h, h, d, r)])
        .sum())
}

/// Turn budget `floor(alpha * n)`.
pub fn turn_budget(alpha: f64, n: usize) -> usize {
    (alpha * n as f64 + 1e-9).floor() as usize
}

/// Exact fraction of paths with at most `floor(alpha * n)` turns.
pub fn grid_turn_fraction(alpha: f64, n: usize) -> Result<f64> {
    check_alpha(alpha)?;
    let few = grid_paths_max_turns(n, turn_budget(alpha, n))?;
    Ok(few as f64 / grid_path_count(n)? as f64)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(ExperimentError::AlphaOutOfRange(alpha))
    }
}

/// Hoeffding bound `exp(-2 (0.5 - alpha)^2 n)` on the fraction of paths with at most `alpha n` turns.
pub fn hoeffding_fraction_bound(alpha: f64, n: usize) -> Result<f64> {
    check_alpha(alpha)?;
    Ok((-2.0 * (0.5 - alpha).powi(2) * n as f64).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(n: usize, t: usize) -> u128 {
        let h = n / 2;
        (0u32..1 << n)
            .filter(|m| m.count_ones() as usize == h)
            .filter(|m| {
                (1..n)
                    .filter(|&i| (m >> i & 1) != (m >> (i - 1) & 1))
                    .count()
                    <= t
            })
            .count() as u128
    }

    #[test]
    fn small_counts() {
        assert_eq!(grid_path_count(2).unwrap(), 2);
        assert_eq!(grid_path_count(4).unwrap(), 6);
        assert_eq!(grid_path_count(50).unwrap(), 126_410_606_437_752);
        assert_eq!(grid_path_count(60).unwrap(), 118_264_581_564_861_424);
    }

    #[test]
    fn dp_matches_enumeration() {
        for n in (2..=12).step_by(2) {
            for t in 0..n + 1 {
                assert_eq!(
                    grid_paths_max_turns(n, t).unwrap(),
                    brute(n, t),
                    "n={n} t={t}"
                );
            }
        }
    }

    #[test]
    fn turn_identities() {
        for n in (2..=MAX_N).step_by(2) {
            assert_eq!(grid_paths_max_turns(n, 1).unwrap(), 2);
            assert_eq!(grid_paths_max_turns(n, 0).unwrap(), 0);
            assert_eq!(
                grid_paths_max_turns(n, n - 1).unwrap(),
                grid_path_count(n).unwrap()
            );
        }
        assert_eq!(grid_paths_max_turns(4, 2).unwrap(), 4);
    }

    #[test]
    fn bounds_dominate_exact_fractions() {
        for n in (10..=MAX_N).step_by(10) {
            for alpha in [0.05, 0.1, 0.2, 0.3, 0.4] {
                let exact = grid_turn_fraction(alpha, n).unwrap();
                let bound = hoeffding_fraction_bound(alpha, n).unwrap();
                assert!(exact <= bound, "n={n} alpha={alpha}: {exact} > {bound}");
            }
        }
        assert!(grid_turn_fraction(0.1, 50).unwrap() < 1e-7);
        assert!(grid_turn_fraction(0.2, 50).unwrap() <= 1e-4);
        assert!((hoeffding_fraction_bound(0.1, 50).unwrap() - (-16.0f64).exp()).abs() < 1e-20);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            grid_path_count(3),
            Err(ExperimentError::NOutOfRange(3))
        ));
        assert!(matches!(
            grid_path_count(62),
            Err(ExperimentError::NOutOfRange(62))
        ));
        assert!(matches!(
            grid_path_count(0),
            Err(ExperimentError::NOutOfRange(0))
        ));
        assert!(matches!(
            hoeffding_fraction_bound(0.5, 10),
            Err(ExperimentError::AlphaOutOfRange(_))
        ));
        assert!(matches!(
            hoeffding_fraction_bound(0.0, 10),
            Err(ExperimentError::AlphaOutOfRange(_))
        ));
        assert!(hoeffding_fraction_bound(0.499999, 10).unwrap() > 0.999);
    }
}
