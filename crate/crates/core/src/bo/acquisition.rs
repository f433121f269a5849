//! Expected improvement and quasi-random candidate sets.

use rand::Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

const PRIMES: [u32; 6] = [2, 3, 5, 7, 11, 13];

/// Expected improvement over `best` for maximization.
pub fn expected_improvement(mean: f64, sd: f64, best: f64, xi: f64) -> f64 {
    let gain = mean - best - xi;
    if sd <= 0.0 {
        return gain.max(0.0);
    }
    let z = gain / sd;
    let normal = Normal::standard();
    (gain * normal.cdf(z) + sd * normal.pdf(z)).max(0.0)
}

/// Radical inverse of `index` in `base`.
fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base as u64) as f64 * inv;
        index /= base as u64;
        inv /= b;
    }
    out
}

/// `count` Halton points in `[0, 1)^dim` with a random Cranley-Patterson shift.
pub fn shifted_halton<R: Rng + ?Sized>(count: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "Halton dimension too large");
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    (1..=count as u64)
        .map(|i| (0..dim).map(|d| (radical_inverse(i, PRIMES[d]) + shift[d]).fract()).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ei_basics() {
        assert_eq!(expected_improvement(1.0, 0.0, 0.5, 0.0), 0.5);
        assert_eq!(expected_improvement(0.0, 0.0, 0.5, 0.0), 0.0);
        // At mean == best, EI = sd * φ(0).
        let ei = expected_improvement(0.0, 2.0, 0.0, 0.0);
        assert!((ei - 2.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        assert!(expected_improvement(0.0, 1.0, 0.0, 0.0) < expected_improvement(0.0, 2.0, 0.0, 0.0));
    }

    #[test]
    fn halton_first_points() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(2, 3) - 2.0 / 3.0).abs() < 1e-15);
        let pts = shifted_halton(256, 3, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(pts.iter().flatten().all(|v| (0.0..1.0).contains(v)));
        let mean = pts.iter().map(|p| p[1]).sum::<f64>() / 256.0;
        assert!((mean - 0.5).abs() < 0.02);
    }
}
