//! Traveler profiles and the population draw.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use crate::error::{config_err, Result};

/// One commuter's fixed characteristics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TravelerProfile {
    pub id: usize,
    /// Trip length (miles).
    pub trip_length: f64,
    /// Desired arrival time (minute of day).
    pub desired_arrival: f64,
    /// Desired departure time, a whole minute (minute of day).
    pub desired_departure: u32,
    /// Daily disposable income ($).
    pub income: f64,
    /// Value of in-vehicle time ($/min).
    pub alpha: f64,
    /// Value of early arrival ($/min).
    pub beta_early: f64,
    /// Value of late arrival ($/min).
    pub beta_late: f64,
    /// Value of public transit waiting time ($/min).
    pub beta_wait: f64,
    /// Logit scale μ_n.
    pub scale: f64,
    /// First departure window start (minute of day).
    pub first_window: u32,
    /// Number of car departure windows |H_n|.
    pub window_count: u32,
    /// Public transit departure minute (arrives exactly on time).
    pub pt_departure: f64,
}

impl TravelerProfile {
    /// Start minute of window `k` in `H_n`.
    #[inline]
    pub fn window_start(&self, k: usize, window_minutes: u32) -> u32 {
        self.first_window + k as u32 * window_minutes
    }

    pub fn windows(&self, window_minutes: u32) -> impl Iterator<Item = u32> + '_ {
        (0..self.window_count as usize).map(move |k| self.window_start(k, window_minutes))
    }

    /// Index of the window starting at `minute`, if any.
    pub fn window_index(&self, minute: u32, window_minutes: u32) -> Option<usize> {
        if minute < self.first_window {
            return None;
        }
        let offset = minute - self.first_window;
        if offset % window_minutes != 0 {
            return None;
        }
        let k = (offset / window_minutes) as usize;
        (k < self.window_count as usize).then_some(k)
    }
}

/// Builds a profile from its behavioural primitives, deriving the windows.
pub fn make_traveler(
    id: usize,
    config: &ScenarioConfig,
    income: f64,
    desired_arrival: f64,
    trip_length: f64,
    scale: f64,
) -> TravelerProfile {
    let h = &config.heterogeneity;
    let alpha = config.vot_ratio * income / h.workday_minutes;
    let free_flow = trip_length / config.car_free_flow_speed * 60.0;
    let desired_departure = (desired_arrival - free_flow).round().max(0.0) as u32;

    let dh = config.window_minutes as i64;
    let eta = config.window_half_count as i64;
    let horizon = config.horizon_minutes as i64;
    // Windows lie on the grid t̃ + kΔh, clipped to [0, horizon).
    let mut lo = desired_departure as i64 - eta * dh;
    if lo < 0 {
        lo += ((-lo) + dh - 1) / dh * dh;
    }
    let mut hi = desired_departure as i64 + eta * dh;
    while hi >= horizon {
        hi -= dh;
    }
    let window_count = if hi >= lo { ((hi - lo) / dh + 1) as u32 } else { 0 };

    TravelerProfile {
        id,
        trip_length,
        desired_arrival,
        desired_departure,
        income,
        alpha,
        beta_early: h.beta_early_ratio * alpha,
        beta_late: h.beta_late_ratio * alpha,
        beta_wait: h.beta_wait_ratio * alpha,
        scale,
        first_window: lo.max(0) as u32,
        window_count,
        pt_departure: (desired_arrival - config.pt_travel_time - config.pt_wait).max(0.0),
    }
}

/// Draws `config.population` travelers.
pub fn sample_population<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Vec<TravelerProfile>> {
    let h = &config.heterogeneity;
    let income_dist = LogNormal::new(h.income_median.ln(), h.income_sdlog)
        .map_err(|e| config_err(format!("income distribution: {e}")))?;
    let arrival_dist = Normal::new(h.desired_arrival_mean, h.desired_arrival_sd)
        .map_err(|e| config_err(format!("arrival distribution: {e}")))?;
    let length_dist = Normal::new(config.trip_length, h.trip_length_sd)
        .map_err(|e| config_err(format!("trip length distribution: {e}")))?;

    let mut travelers = Vec::with_capacity(config.population);
    for id in 0..config.population {
        let income = income_dist.sample(rng).max(h.income_floor);
        let arrival = sample_truncated(&arrival_dist, h.desired_arrival_min, h.desired_arrival_max, rng);
        let trip_length = if h.trip_length_sd > 0.0 {
            sample_truncated(&length_dist, 0.25 * config.trip_length, 4.0 * config.trip_length, rng)
        } else {
            config.trip_length
        };
        let traveler = make_traveler(id, config, income, arrival, trip_length, h.logit_scale);
        if traveler.window_count == 0 {
            return Err(config_err(format!("traveler {id} has no departure window inside the horizon")));
        }
        travelers.push(traveler);
    }
    Ok(travelers)
}

/// Rejection sampling on `[lo, hi]`, falling back to clamping after 64 misses.
fn sample_truncated<R: Rng + ?Sized>(dist: &Normal<f64>, lo: f64, hi: f64, rng: &mut R) -> f64 {
    for _ in 0..64 {
        let v = dist.sample(rng);
        if (lo..=hi).contains(&v) {
            return v;
        }
    }
    dist.sample(rng).clamp(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn population_respects_invariants() {
        let config = ScenarioConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pop = sample_population(&config, &mut rng).unwrap();
        assert_eq!(pop.len(), 750);
        for t in &pop {
            assert!(t.beta_early <= t.alpha && t.alpha <= t.beta_late);
            assert!(t.income >= 50.0 && t.trip_length > 0.0 && t.scale > 0.0);
            assert!((360.0..=600.0).contains(&t.desired_arrival));
            assert_eq!(t.window_count, 121);
            assert_eq!(t.first_window + 60, t.desired_departure);
        }
    }

    #[test]
    fn windows_are_clipped_to_horizon() {
        let config = ScenarioConfig::desk();
        let early = make_traveler(0, &config, 100.0, 50.0, 18.0, 1.0);
        assert_eq!(early.desired_departure, 26);
        assert_eq!(early.first_window, 0);
        assert_eq!(early.window_count, 26 + 61);
        let late = make_traveler(1, &config, 100.0, 740.0, 18.0, 1.0);
        assert_eq!(late.desired_departure, 716);
        assert_eq!(late.windows(1).last(), Some(719));
    }

    #[test]
    fn window_index_round_trips() {
        let config = ScenarioConfig { window_minutes: 5, ..ScenarioConfig::desk() };
        let t = make_traveler(0, &config, 100.0, 480.0, 18.0, 1.0);
        for (k, start) in t.windows(5).enumerate() {
            assert_eq!(t.window_index(start, 5), Some(k));
        }
        assert_eq!(t.window_index(t.first_window + 1, 5), None);
    }
}
