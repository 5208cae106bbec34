//! Scan points: a uniform lattice restricted to a ball, plus shifted Halton
//! points in the same ball.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 0x5eed_2024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub radius: f64,
    /// Lattice points per axis on `[-radius, radius]`.
    pub resolution: usize,
    pub quasi_random_count: usize,
    pub seed: u64,
}

impl Default for ScanGrid {
    fn default() -> Self {
        ScanGrid {
            radius: 10.0,
            resolution: 41,
            quasi_random_count: 2000,
            seed: DEFAULT_SEED,
        }
    }
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Van der Corput radical inverse of `i` in `base`.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Halton points in `[0, 1)^dim` with a Cranley–Patterson rotation drawn
/// from `seed`. Index 0 is skipped.
pub fn shifted_halton(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(
        dim <= PRIMES.len(),
        "Halton sequence supports at most {} dimensions",
        PRIMES.len()
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    (1..=count as u64)
        .map(|i| {
            (0..dim)
                .map(|a| (radical_inverse(i, PRIMES[a]) + shift[a]).fract())
                .collect()
        })
        .collect()
}

impl ScanGrid {
    pub fn new(radius: f64, resolution: usize, quasi_random_count: usize) -> Self {
        ScanGrid {
            radius,
            resolution,
            quasi_random_count,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Lattice points inside the closed ball.
    pub fn lattice(&self, dim: usize) -> Vec<Vec<f64>> {
        let n = self.resolution;
        if n == 0 {
            return Vec::new();
        }
        let r = self.radius;
        let node = |i: usize| {
            if n == 1 {
                0.0
            } else {
                -r + 2.0 * r * i as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::new();
        let mut idx = vec![0usize; dim];
        let r2 = r * r * (1.0 + 1e-12);
        loop {
            let p: Vec<f64> = idx.iter().map(|&i| node(i)).collect();
            if p.iter().map(|x| x * x).sum::<f64>() <= r2 {
                out.push(p);
            }
            let mut a = 0;
            loop {
                if a == dim {
                    return out;
                }
                idx[a] += 1;
                if idx[a] < n {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
        }
    }

    /// `quasi_random_count` points in the ball, by rejection from the cube.
    pub fn quasi_random(&self, dim: usize) -> Vec<Vec<f64>> {
        let want = self.quasi_random_count;
        let mut out = Vec::with_capacity(want);
        let mut batch = want.max(16);
        while out.len() < want {
            out.clear();
            for u in shifted_halton(dim, batch, self.seed) {
                let p: Vec<f64> = u.iter().map(|x| self.radius * (2.0 * x - 1.0)).collect();
                if p.iter().map(|x| x * x).sum::<f64>() <= self.radius * self.radius {
                    out.push(p);
                    if out.len() == want {
                        break;
                    }
                }
            }
            batch *= 2;
        }
        out
    }

    pub fn points(&self, dim: usize) -> Vec<Vec<f64>> {
        let mut pts = self.lattice(dim);
        pts.extend(self.quasi_random(dim));
        pts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_radical_inverse() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn test_lattice_contains_origin_and_stays_in_ball() {
        let grid = ScanGrid::new(10.0, 41, 0);
        let pts = grid.lattice(3);
        assert!(pts.iter().any(|p| p.iter().all(|&x| x == 0.0)));
        assert!(pts
            .iter()
            .all(|p| p.iter().map(|x| x * x).sum::<f64>() <= 100.0 + 1e-9));
        assert_eq!(grid.lattice(1).len(), 41);
    }

    #[test]
    fn test_quasi_random_is_seeded() {
        let a = ScanGrid::new(3.0, 0, 100).quasi_random(3);
        let b = ScanGrid::new(3.0, 0, 100).quasi_random(3);
        let c = ScanGrid::new(3.0, 0, 100).with_seed(1).quasi_random(3);
        assert_eq!(a.len(), 100);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
