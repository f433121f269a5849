//! Sequential maximization with a GP surrogate and expected improvement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::acquisition::{expected_improvement, shifted_halton};
use super::gp::GaussianProcess;
use crate::error::{config_err, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct BoConfig {
    /// Uniform random evaluations before the surrogate is used.
    pub n_init: usize,
    /// Surrogate-guided evaluations.
    pub n_iter: usize,
    /// Candidate points scored by the acquisition per iteration.
    pub candidates: usize,
    /// Exploration margin in units of the target standard deviation.
    pub xi: f64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self { n_init: 10, n_iter: 100, candidates: 1024, xi: 0.01 }
    }
}

/// One evaluated point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoRecord {
    pub iteration: usize,
    pub x: Vec<f64>,
    pub objective: f64,
    pub running_best: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoResult {
    pub history: Vec<BoRecord>,
    pub best_x: Vec<f64>,
    pub best_value: f64,
}

fn from_unit(u: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    u.iter().zip(bounds).map(|(v, (lo, hi))| lo + v * (hi - lo)).collect()
}

/// Maximizes `objective` over the box `bounds`.
pub fn maximize<F>(bounds: &[(f64, f64)], config: &BoConfig, seed: u64, mut objective: F) -> Result<BoResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if bounds.is_empty() || bounds.iter().any(|(lo, hi)| !(lo < hi)) {
        return Err(config_err("bounds must be non-empty intervals"));
    }
    if config.n_init + config.n_iter == 0 {
        return Err(config_err("need at least one evaluation"));
    }
    let dim = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit_points: Vec<Vec<f64>> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut history = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut best_x = Vec::new();

    for iteration in 0..config.n_init + config.n_iter {
        let u = if iteration < config.n_init || unit_points.is_empty() {
            (0..dim).map(|_| rng.random::<f64>()).collect()
        } else {
            propose(&unit_points, &values, best, config, dim, &mut rng)?
        };
        let x = from_unit(&u, bounds);
        let y = objective(&x)?;
        if !y.is_finite() {
            return Err(Error::NonFinite(format!("objective at {x:?}")));
        }
        if y > best {
            best = y;
            best_x = x.clone();
        }
        log::debug!("bo {iteration}: {x:?} -> {y:.5} (best {best:.5})");
        history.push(BoRecord { iteration, x, objective: y, running_best: best });
        unit_points.push(u);
        values.push(y);
    }
    Ok(BoResult { history, best_x, best_value: best })
}

fn propose(points: &[Vec<f64>], values: &[f64], best: f64, config: &BoConfig, dim: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let gp = GaussianProcess::fit(points, values)?;
    let xi = config.xi * gp.target_scale();
    let candidates = shifted_halton(config.candidates.max(1), dim, rng);
    let mut top: Option<(f64, usize)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let (m, s) = gp.predict(c);
        let ei = expected_improvement(m, s, best, xi);
        if ei > 0.0 && top.is_none_or(|(v, _)| ei > v) {
            top = Some((ei, i));
        }
    }
    Ok(match top {
        Some((_, i)) => candidates[i].clone(),
        None => (0..dim).map(|_| rng.random::<f64>()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_optimum() {
        let cfg = BoConfig { n_init: 10, n_iter: 20, ..BoConfig::default() };
        for seed in 0..3 {
            let r = maximize(&[(0.0, 7.0)], &cfg, seed, |x| Ok(-(x[0] - 3.0).powi(2))).unwrap();
            assert!((r.best_x[0] - 3.0).abs() < 0.1, "seed {seed}: {:?}", r.best_x);
            assert_eq!(r.history.len(), 30);
            assert!(r.history.windows(2).all(|w| w[1].running_best >= w[0].running_best));
        }
    }

    #[test]
    fn same_seed_same_history() {
        let cfg = BoConfig { n_init: 4, n_iter: 6, candidates: 128, xi: 0.01 };
        let f = |x: &[f64]| Ok((x[0] * 3.0).sin() + x[1]);
        let a = maximize(&[(0.0, 2.0), (-1.0, 1.0)], &cfg, 5, f).unwrap();
        let b = maximize(&[(0.0, 2.0), (-1.0, 1.0)], &cfg, 5, f).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_empty_box() {
        assert!(maximize(&[(1.0, 1.0)], &BoConfig::default(), 0, |_| Ok(0.0)).is_err());
    }
}
