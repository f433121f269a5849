//! Constant-toll equilibrium objective and the no-toll / random baselines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optimizer::{maximize, BoConfig, BoRecord, BoResult};
use crate::env::reward;
use crate::error::{config_err, Result};
use crate::metrics::{window_metrics, MetricsReport, WINDOW_DAYS};
use crate::sim::toll::{AMPLITUDE_BOUNDS, CENTER_BOUNDS, WIDTH_BOUNDS};
use crate::sim::{DaySummary, ScenarioConfig, TcsSystem, TollProfile};

/// Center and width used whenever only the amplitude is searched.
pub const DEFAULT_CENTER: f64 = 443.05;
pub const DEFAULT_WIDTH: f64 = 63.18;

/// Which toll parameters the optimizer searches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dims", rename_all = "snake_case")]
pub enum SearchSpace {
    /// Amplitude only, with a fixed center and width.
    OneD { center: f64, width: f64 },
    /// Amplitude, center and width.
    ThreeD,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace::OneD { center: DEFAULT_CENTER, width: DEFAULT_WIDTH }
    }
}

impl SearchSpace {
    pub fn from_dims(dims: usize) -> Result<Self> {
        match dims {
            1 => Ok(Self::default()),
            3 => Ok(Self::ThreeD),
            other => Err(config_err(format!("search dimension must be 1 or 3, got {other}"))),
        }
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        match self {
            Self::OneD { .. } => vec![AMPLITUDE_BOUNDS],
            Self::ThreeD => vec![AMPLITUDE_BOUNDS, CENTER_BOUNDS, WIDTH_BOUNDS],
        }
    }

    pub fn decode(&self, x: &[f64]) -> TollProfile {
        match *self {
            Self::OneD { center, width } => TollProfile::new(x[0], center, width),
            Self::ThreeD => TollProfile::new(x[0], x[1], x[2]),
        }
    }
}

/// Mean daily reward over the last days of a run with a fixed toll.
///
/// Every evaluation replays the same scenario seed, so the objective is a
/// deterministic function of the toll parameters.
#[derive(Clone, Debug)]
pub struct EquilibriumObjective {
    pub scenario: ScenarioConfig,
    pub horizon_days: u32,
    pub window: usize,
    pub pt_target: f64,
}

impl EquilibriumObjective {
    pub fn new(scenario: ScenarioConfig) -> Self {
        Self { scenario, horizon_days: 60, window: WINDOW_DAYS, pt_target: 0.1 }
    }

    /// Runs the full horizon with `toll` held constant.
    pub fn simulate(&self, toll: &TollProfile) -> Result<Vec<DaySummary>> {
        if !toll.within_bounds() {
            return Err(config_err(format!("toll parameters out of bounds: {toll:?}")));
        }
        run_days(&self.scenario, self.horizon_days, |_| *toll)
    }

    pub fn evaluate(&self, toll: &TollProfile) -> Result<f64> {
        let days = self.simulate(toll)?;
        Ok(self.objective_of(&days))
    }

    pub fn objective_of(&self, days: &[DaySummary]) -> f64 {
        let ff = self.scenario.free_flow_time();
        let w = &days[days.len().saturating_sub(self.window)..];
        w.iter().map(|d| reward(d.aitt, d.pt_share, ff, self.pt_target)).sum::<f64>() / w.len() as f64
    }

    pub fn metrics(&self, days: &[DaySummary]) -> Result<MetricsReport> {
        window_metrics(days, self.window, self.scenario.free_flow_time(), self.pt_target, self.scenario.market.enabled)
    }
}

/// Outcome of one optimization run.
#[derive(Clone, Debug)]
pub struct BoRun {
    pub space: SearchSpace,
    pub result: BoResult,
    pub best_toll: TollProfile,
    /// Day series of the best toll.
    pub best_days: Vec<DaySummary>,
}

impl BoRun {
    pub fn history_rows(&self) -> Vec<HistoryRow> {
        self.result.history.iter().map(|r| HistoryRow::new(r, &self.space)).collect()
    }
}

/// One evaluation in flat form for CSV output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    #[serde(rename = "M")]
    pub amplitude: f64,
    #[serde(rename = "mu")]
    pub center: f64,
    #[serde(rename = "sigma")]
    pub width: f64,
    pub objective: f64,
    pub running_best: f64,
}

impl HistoryRow {
    fn new(record: &BoRecord, space: &SearchSpace) -> Self {
        let toll = space.decode(&record.x);
        Self {
            iteration: record.iteration,
            amplitude: toll.amplitude,
            center: toll.center,
            width: toll.width,
            objective: record.objective,
            running_best: record.running_best,
        }
    }
}

/// Maximizes the equilibrium objective over constant tolls.
pub fn run_bo(objective: &EquilibriumObjective, space: SearchSpace, config: &BoConfig, seed: u64) -> Result<BoRun> {
    let result = maximize(&space.bounds(), config, seed, |x| objective.evaluate(&space.decode(x)))?;
    let best_toll = space.decode(&result.best_x);
    let best_days = objective.simulate(&best_toll)?;
    Ok(BoRun { space, result, best_toll, best_days })
}

fn run_days(scenario: &ScenarioConfig, days: u32, mut toll_for_day: impl FnMut(u32) -> TollProfile) -> Result<Vec<DaySummary>> {
    let mut system = TcsSystem::new(scenario.clone())?;
    (0..days).map(|d| system.run_day(&toll_for_day(d)).map(|o| o.summary())).collect()
}

/// No tolling and no token market.
pub fn no_toll_days(scenario: &ScenarioConfig, horizon_days: u32) -> Result<Vec<DaySummary>> {
    let mut cfg = scenario.clone();
    cfg.market.enabled = false;
    run_days(&cfg, horizon_days, |_| TollProfile::zero())
}

/// A fresh uniform amplitude every day with fixed center and width.
pub fn random_toll_days(scenario: &ScenarioConfig, horizon_days: u32, center: f64, width: f64, seed: u64) -> Result<Vec<DaySummary>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_days(scenario, horizon_days, |_| {
        TollProfile::new(rng.random_range(AMPLITUDE_BOUNDS.0..=AMPLITUDE_BOUNDS.1), center, width)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig { population: 120, jam_accumulation: 112.0, ..ScenarioConfig::desk() }
    }

    #[test]
    fn zero_amplitude_matches_market_run_without_toll() {
        let obj = EquilibriumObjective { horizon_days: 8, ..EquilibriumObjective::new(small()) };
        let a = obj.evaluate(&TollProfile::new(0.0, DEFAULT_CENTER, DEFAULT_WIDTH)).unwrap();
        let days = run_days(&small(), 8, |_| TollProfile::zero()).unwrap();
        assert_eq!(a, obj.objective_of(&days));
        assert_eq!(a, obj.evaluate(&TollProfile::new(0.0, DEFAULT_CENTER, DEFAULT_WIDTH)).unwrap());
    }

    #[test]
    fn out_of_bounds_rejected() {
        let obj = EquilibriumObjective::new(small());
        assert!(obj.evaluate(&TollProfile::new(7.5, DEFAULT_CENTER, DEFAULT_WIDTH)).is_err());
    }

    #[test]
    fn single_traveler_no_toll_is_free_flow() {
        let cfg = ScenarioConfig { population: 1, ..ScenarioConfig::desk() };
        let days = no_toll_days(&cfg, 6).unwrap();
        let m = window_metrics(&days, 6, cfg.free_flow_time(), 0.1, false).unwrap();
        assert_eq!(m.token_price, None);
        if m.pt_share_pct == 0.0 {
            assert_eq!(m.aitt.round(), 24.0);
        }
    }

    #[test]
    fn random_baseline_reproducible_and_bounded() {
        let a = random_toll_days(&small(), 6, DEFAULT_CENTER, DEFAULT_WIDTH, 3).unwrap();
        let b = random_toll_days(&small(), 6, DEFAULT_CENTER, DEFAULT_WIDTH, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|d| (0.0..=7.0).contains(&d.amplitude)));
        assert!(a.windows(2).any(|w| w[0].amplitude != w[1].amplitude));
    }

    #[test]
    fn zero_budget_returns_best_initial_sample() {
        let obj = EquilibriumObjective { horizon_days: 6, ..EquilibriumObjective::new(small()) };
        let cfg = BoConfig { n_init: 3, n_iter: 0, candidates: 64, xi: 0.01 };
        let run = run_bo(&obj, SearchSpace::default(), &cfg, 1).unwrap();
        let best = run.result.history.iter().map(|r| r.objective).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(run.result.best_value, best);
        assert_eq!(run.history_rows().len(), 3);
        assert!(run.history_rows().iter().all(|r| r.center == DEFAULT_CENTER && (0.0..=7.0).contains(&r.amplitude)));
        assert_eq!(obj.objective_of(&run.best_days), best);
    }

    #[test]
    fn three_d_decode() {
        let t = SearchSpace::ThreeD.decode(&[1.0, 400.0, 55.0]);
        assert_eq!(t, TollProfile::new(1.0, 400.0, 55.0));
        assert_eq!(SearchSpace::from_dims(3).unwrap().bounds().len(), 3);
        assert!(SearchSpace::from_dims(2).is_err());
    }
}
