//! Scenario configuration.
//!
//! Defaults reproduce the reference environment parameters (population
//! 7500, jam accumulation 7000, 45 mph free-flow car speed, ...). Fields that
//! describe traveler heterogeneity are modelling assumptions and live in
//! [`HeterogeneityConfig`].

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config_err, Result};

/// Market and regulator parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct MarketConfig {
    /// When false the token price is pinned at zero and never adjusted.
    pub enabled: bool,
    /// Token price on the first simulated day ($/token).
    pub initial_price: f64,
    /// Daily price step Δp ($).
    pub price_step: f64,
    /// Revenue dead-band half-width K̄ ($).
    pub revenue_threshold: f64,
    /// Continuous token allocation rate r (tokens/min).
    pub allocation_rate: f64,
    /// Token lifetime L (min).
    pub token_lifetime: f64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            initial_price: 1.0,
            price_step: 0.05,
            revenue_threshold: 200.0,
            allocation_rate: 0.00269,
            token_lifetime: 720.0,
        }
    }
}

impl MarketConfig {
    /// Full wallet `r * L`.
    pub fn full_wallet(&self) -> f64 {
        self.allocation_rate * self.token_lifetime
    }
}

/// Distributions used to draw the traveler population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct HeterogeneityConfig {
    /// Median daily disposable income ($); incomes are lognormal.
    pub income_median: f64,
    /// Log-scale standard deviation of income.
    pub income_sdlog: f64,
    /// Incomes are clamped from below to this value ($).
    pub income_floor: f64,
    /// Minutes in a working day; value of time per minute is `vot * income / workday`.
    pub workday_minutes: f64,
    pub beta_early_ratio: f64,
    pub beta_late_ratio: f64,
    pub beta_wait_ratio: f64,
    /// Logit scale μ₀ shared by all travelers.
    pub logit_scale: f64,
    pub desired_arrival_mean: f64,
    pub desired_arrival_sd: f64,
    pub desired_arrival_min: f64,
    pub desired_arrival_max: f64,
    /// Standard deviation of trip length (miles); zero keeps every trip at
    /// `ScenarioConfig::trip_length`.
    pub trip_length_sd: f64,
}

impl Default for HeterogeneityConfig {
    fn default() -> Self {
        Self {
            income_median: 100.0,
            income_sdlog: 0.4,
            income_floor: 50.0,
            workday_minutes: 480.0,
            beta_early_ratio: 0.61,
            beta_late_ratio: 2.4,
            beta_wait_ratio: 1.5,
            logit_scale: 1.0,
            desired_arrival_mean: 480.0,
            desired_arrival_sd: 30.0,
            desired_arrival_min: 360.0,
            desired_arrival_max: 600.0,
            trip_length_sd: 0.0,
        }
    }
}

/// Everything needed to build and run a simulated commute system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Number of travelers N.
    pub population: usize,
    /// Simulated minutes per day.
    pub horizon_minutes: u32,
    /// Simulation step Δt (min). Only 1 is supported.
    pub step_minutes: u32,
    /// Departure window size Δh (min).
    pub window_minutes: u32,
    /// Half-width η of the departure window set, in windows.
    pub window_half_count: u32,
    /// Arrival flexibility Δ_α (min).
    pub arrival_flex: f64,
    /// MFD jam accumulation n_jam (vehicles).
    pub jam_accumulation: f64,
    /// Car free-flow speed (mph).
    pub car_free_flow_speed: f64,
    /// Lower bound on network speed (mph); keeps trips finite in gridlock.
    pub min_speed_mph: f64,
    /// Public transit free-flow speed (mph); informational, `pt_travel_time` is used.
    pub pt_free_flow_speed: f64,
    /// Public transit in-vehicle time τ_pt (min).
    pub pt_travel_time: f64,
    /// Expected public transit waiting time W_pt (min).
    pub pt_wait: f64,
    /// Public transit fare c_pt ($).
    pub pt_fare: f64,
    /// Fuel cost c_f ($).
    pub fuel_cost: f64,
    /// Trip length (miles).
    pub trip_length: f64,
    /// Nonlinear income effect coefficient λ₁.
    pub income_effect_coef: f64,
    /// Nonlinear income effect shift γ₁.
    pub income_effect_shift: f64,
    /// Ratio of value of time to income.
    pub vot_ratio: f64,
    /// Perception learning weight θ_τ.
    pub learning_weight: f64,
    /// Use the surplus-selling branch of the car cost exactly as printed,
    /// `(FW - T) * p`, instead of the sign-consistent `(T - x) * p`.
    pub literal_surplus_cost: bool,
    /// Use `+2 α τ` for the car travel-time term instead of `-2 α τ`.
    pub positive_travel_time_term: bool,
    pub market: MarketConfig,
    pub heterogeneity: HeterogeneityConfig,
    /// Seed for the population draw and the daily choice stream.
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            population: 7500,
            horizon_minutes: 720,
            step_minutes: 1,
            window_minutes: 1,
            window_half_count: 60,
            arrival_flex: 0.0,
            jam_accumulation: 7000.0,
            car_free_flow_speed: 45.0,
            min_speed_mph: 0.5,
            pt_free_flow_speed: 18.0,
            pt_travel_time: 60.0,
            pt_wait: 5.0,
            pt_fare: 2.0,
            fuel_cost: 3.13,
            trip_length: 18.0,
            income_effect_coef: 3.0,
            income_effect_shift: 2.0,
            vot_ratio: 0.25,
            learning_weight: 0.5,
            literal_surplus_cost: false,
            positive_travel_time_term: false,
            market: MarketConfig::default(),
            heterogeneity: HeterogeneityConfig::default(),
            seed: 0,
        }
    }
}

/// Named scenario sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Ten-fold downscale (N = 750, n_jam = 700) for fast experiments.
    Desk,
    /// Reference size (N = 7500, n_jam = 7000).
    Paper,
}

impl std::str::FromStr for Scale {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            other => Err(format!("unknown scale '{other}' (expected desk|paper)")),
        }
    }
}

impl ScenarioConfig {
    pub fn paper() -> Self {
        Self::default()
    }

    pub fn desk() -> Self {
        Self {
            population: 750,
            jam_accumulation: 700.0,
            ..Self::default()
        }
    }

    pub fn for_scale(scale: Scale) -> Self {
        match scale {
            Scale::Desk => Self::desk(),
            Scale::Paper => Self::paper(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Free-flow car travel time τ₀ᶜ for the base trip length (min).
    pub fn free_flow_time(&self) -> f64 {
        self.trip_length / self.car_free_flow_speed * 60.0
    }

    pub fn full_wallet(&self) -> f64 {
        self.market.full_wallet()
    }

    /// Number of 5-minute departure-flow bins.
    pub fn flow_bins(&self) -> usize {
        (self.horizon_minutes as usize).div_ceil(FLOW_BIN_MINUTES)
    }

    pub fn validate(&self) -> Result<()> {
        if self.population == 0 {
            return Err(config_err("population must be at least 1"));
        }
        if self.step_minutes != 1 {
            return Err(config_err("only a 1-minute simulation step is supported"));
        }
        if self.window_minutes == 0 {
            return Err(config_err("window_minutes must be positive"));
        }
        if self.horizon_minutes == 0 {
            return Err(config_err("horizon_minutes must be positive"));
        }
        let positive = [
            ("jam_accumulation", self.jam_accumulation),
            ("car_free_flow_speed", self.car_free_flow_speed),
            ("min_speed_mph", self.min_speed_mph),
            ("trip_length", self.trip_length),
            ("income_effect_shift", self.income_effect_shift),
            ("vot_ratio", self.vot_ratio),
            ("market.price_step", self.market.price_step),
            ("market.revenue_threshold", self.market.revenue_threshold),
            ("market.allocation_rate", self.market.allocation_rate),
            ("market.token_lifetime", self.market.token_lifetime),
            ("heterogeneity.income_median", self.heterogeneity.income_median),
            ("heterogeneity.income_floor", self.heterogeneity.income_floor),
            ("heterogeneity.workday_minutes", self.heterogeneity.workday_minutes),
            ("heterogeneity.logit_scale", self.heterogeneity.logit_scale),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(config_err(format!("{name} must be positive and finite, got {value}")));
            }
        }
        let nonnegative = [
            ("arrival_flex", self.arrival_flex),
            ("pt_travel_time", self.pt_travel_time),
            ("pt_wait", self.pt_wait),
            ("pt_fare", self.pt_fare),
            ("fuel_cost", self.fuel_cost),
            ("income_effect_coef", self.income_effect_coef),
            ("market.initial_price", self.market.initial_price),
            ("heterogeneity.income_sdlog", self.heterogeneity.income_sdlog),
            ("heterogeneity.desired_arrival_sd", self.heterogeneity.desired_arrival_sd),
            ("heterogeneity.trip_length_sd", self.heterogeneity.trip_length_sd),
        ];
        for (name, value) in nonnegative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(config_err(format!("{name} must be non-negative and finite, got {value}")));
            }
        }
        if self.min_speed_mph > self.car_free_flow_speed {
            return Err(config_err("min_speed_mph exceeds the free-flow speed"));
        }
        if !(0.0..=1.0).contains(&self.learning_weight) {
            return Err(config_err("learning_weight must lie in [0, 1]"));
        }
        let h = &self.heterogeneity;
        if h.desired_arrival_min > h.desired_arrival_max {
            return Err(config_err("desired arrival bounds are inverted"));
        }
        if !(h.beta_early_ratio <= 1.0 && 1.0 <= h.beta_late_ratio && h.beta_early_ratio >= 0.0) {
            return Err(config_err(
                "heterogeneity ratios must satisfy beta_early <= alpha <= beta_late",
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding; short form used in output rows.
    pub fn hash(&self) -> String {
        config_hash(self)
    }

    /// JSON schema describing the configuration document.
    pub fn json_schema() -> serde_json::Value {
        serde_json::to_value(schemars::schema_for!(ScenarioConfig)).expect("schema serializes")
    }
}

/// Width of a departure-flow bin (min).
pub const FLOW_BIN_MINUTES: usize = 5;

/// First 16 hex characters of the SHA-256 of `value`'s JSON encoding.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_defaults() {
        let c = ScenarioConfig::default();
        assert_eq!(c.population, 7500);
        assert_eq!(c.jam_accumulation, 7000.0);
        assert!((c.full_wallet() - 1.93680).abs() < 1e-12);
        assert!((c.free_flow_time() - 24.0).abs() < 1e-12);
        assert_eq!(c.flow_bins(), 144);
        c.validate().unwrap();
    }

    #[test]
    fn desk_preserves_demand_capacity_ratio() {
        let d = ScenarioConfig::desk();
        let p = ScenarioConfig::paper();
        assert_eq!(
            d.population as f64 / d.jam_accumulation,
            p.population as f64 / p.jam_accumulation
        );
    }

    #[test]
    fn rejects_zero_population() {
        let c = ScenarioConfig { population: 0, ..ScenarioConfig::desk() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: ScenarioConfig = serde_json::from_str(r#"{"population": 10, "market": {"price_step": 0.1}}"#).unwrap();
        assert_eq!(c.population, 10);
        assert_eq!(c.market.price_step, 0.1);
        assert_eq!(c.market.revenue_threshold, 200.0);
        assert!(serde_json::from_str::<ScenarioConfig>(r#"{"populaton": 10}"#).is_err());
    }

    #[test]
    fn schema_lists_fields() {
        let schema = ScenarioConfig::json_schema();
        let text = schema.to_string();
        assert!(text.contains("jam_accumulation"));
        assert!(text.contains("revenue_threshold"));
    }

    #[test]
    fn hash_changes_with_content() {
        let a = ScenarioConfig::desk();
        let b = ScenarioConfig::desk().with_seed(9);
        assert_eq!(a.hash(), ScenarioConfig::desk().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
