//! Quasi-random points in Euclidean balls.
//!
//! Points come from a Halton sequence with a seeded Cranley–Patterson shift.
//! Directions use Box–Muller on pairs of coordinates; interior radii are
//! `R u^{1/N}`, which makes the interior points uniform in volume.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u64; 20] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
];

/// Radical inverse of `index` in `base`.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    out
}

struct ShiftedHalton {
    shift: Vec<f64>,
    index: u64,
}

impl ShiftedHalton {
    fn new(dims: usize, seed: u64) -> Self {
        assert!(dims <= PRIMES.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            shift: (0..dims).map(|_| rng.gen::<f64>()).collect(),
            index: 0,
        }
    }

    fn next_point(&mut self) -> Vec<f64> {
        self.index += 1;
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, p)| {
                let u = (radical_inverse(self.index, p) + s).fract();
                u.max(f64::MIN_POSITIVE)
            })
            .collect()
    }
}

fn direction(u: &[f64], n: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(n + 1);
    for pair in u.chunks(2) {
        let r = (-2.0 * pair[0].ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * pair.get(1).copied().unwrap_or(0.25);
        v.push(r * theta.cos());
        v.push(r * theta.sin());
    }
    v.truncate(n);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        return e;
    }
    v.iter().map(|x| x / norm).collect()
}

/// `interior` points filling the closed ball `|z| <= radius` in `R^n`, then
/// `boundary` points on the sphere `|z| = radius`.
pub fn ball_points(
    n: usize,
    radius: f64,
    interior: usize,
    boundary: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let dir_dims = 2 * n.div_ceil(2);
    let mut seq = ShiftedHalton::new(dir_dims + 1, seed);
    let mut out = Vec::with_capacity(interior + boundary);
    for k in 0..interior + boundary {
        let u = seq.next_point();
        let dir = direction(&u[..dir_dims], n);
        let r = if k < interior {
            radius * u[dir_dims].powf(1.0 / n as f64)
        } else {
            radius
        };
        out.push(dir.into_iter().map(|x| r * x).collect());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - 7.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn points_stay_in_the_ball_and_reach_its_boundary() {
        for n in [1usize, 2, 3, 5, 16] {
            let pts = ball_points(n, 2.0, 500, 100, 0);
            assert_eq!(pts.len(), 600);
            for (k, p) in pts.iter().enumerate() {
                assert_eq!(p.len(), n);
                let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!(r <= 2.0 + 1e-12);
                if k >= 500 {
                    assert!((r - 2.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(ball_points(3, 1.0, 10, 2, 4), ball_points(3, 1.0, 10, 2, 4));
        assert_ne!(ball_points(3, 1.0, 10, 2, 4), ball_points(3, 1.0, 10, 2, 5));
    }
}
