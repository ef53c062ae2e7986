//! Seeded random streams with a fixed, documented bit-level derivation.
//!
//! Each stream is ChaCha20 keyed by `seed.to_le_bytes() ++ domain.to_le_bytes() ++ [0; 16]`
//! with stream id `trial`. All variates are derived from successive `u64`
//! outputs as follows:
//!
//! * uniform `[0, 1)`: `(u >> 11) * 2^-53`
//! * integer in `0..n`: rejection of `u >= n * floor(2^64 / n)`, then `u % n`
//! * normal: Box-Muller, `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)` (one draw per pair)
//! * simplex point: `e_i = -ln(1 - u_i)` normalized to sum 1
//! * `k`-subset / permutation: Fisher-Yates from the front over `0..n`

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Clone, Debug)]
pub struct TrialRng(ChaCha20Rng);

impl TrialRng {
    pub fn new(seed: u64, domain: u64, trial: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&domain.to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(trial);
        TrialRng(rng)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let zone = (u64::MAX / n) * n;
        loop {
            let u = self.next_u64();
            if u < zone {
                return u % n;
            }
        }
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Uniform point on the probability simplex of dimension `k`.
    pub fn simplex(&mut self, k: usize) -> Vec<f64> {
        let e: Vec<f64> = (0..k).map(|_| -(1.0 - self.uniform()).ln()).collect();
        let s: f64 = e.iter().sum();
        if s > 0.0 {
            e.into_iter().map(|v| v / s).collect()
        } else {
            vec![1.0 / k as f64; k]
        }
    }

    /// First `k` entries of a Fisher-Yates shuffle of `0..n`, in draw order.
    pub fn partial_shuffle(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n);
        let mut v: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below((n - i) as u64) as usize;
            v.swap(i, j);
        }
        v.truncate(k);
        v
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        self.partial_shuffle(n, n)
    }
}
