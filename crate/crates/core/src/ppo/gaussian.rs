//! Diagonal Gaussian action head.

use rand::Rng;
use rand_distr::StandardNormal;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Draws `mean + exp(log_std) * z` and returns it with its log density.
pub fn sample_action<R: Rng + ?Sized>(mean: &[f64], log_std: &[f64], rng: &mut R) -> (Vec<f64>, f64) {
    let action: Vec<f64> = mean
        .iter()
        .zip(log_std)
        .map(|(m, s)| {
            let z: f64 = rng.sample(StandardNormal);
            m + s.exp() * z
        })
        .collect();
    let lp = log_prob(&action, mean, log_std);
    (action, lp)
}

pub fn log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), s)| {
            let z = (a - m) / s.exp();
            -0.5 * z * z - s - 0.5 * LN_2PI
        })
        .sum()
}

/// `Σ (log_std + ½ ln(2πe))`.
pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|s| s + 0.5 * (LN_2PI + 1.0)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn entropy_cases() {
        assert!((entropy(&[0.0]) - 1.418_938_533_204_672_7).abs() < 1e-12);
        assert!((entropy(&[-1.0; 3]) - 1.256_815_599_614_018).abs() < 1e-12);
        assert!(entropy(&[-0.5, 0.0]) > entropy(&[-0.6, 0.0]));
    }

    #[test]
    fn mode_density() {
        assert!((log_prob(&[0.3, -1.0], &[0.3, -1.0], &[0.0, 0.0]) + LN_2PI).abs() < 1e-15);
    }

    #[test]
    fn deterministic_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (a, _) = sample_action(&[1.5, -2.0], &[-800.0, -800.0], &mut rng);
        assert_eq!(a, vec![1.5, -2.0]);
    }

    #[test]
    fn monte_carlo_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let sd = (-1.0f64).exp();
        let sum: f64 = (0..n).map(|_| sample_action(&[0.7], &[-1.0], &mut rng).0[0]).sum();
        let se = sd / (n as f64).sqrt();
        assert!((sum / n as f64 - 0.7).abs() < 3.0 * se);
    }
}
