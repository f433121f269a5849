//! Mode and departure-time choice: schedule delay, expected costs, systematic
//! utilities, budget feasibility and logit probabilities.

use super::config::ScenarioConfig;
use super::market::{expected_token_balance, MarketState, TokenWallet};
use super::population::TravelerProfile;
use super::toll::TollProfile;
use crate::error::{Error, Result};

/// Parameters of the income block shared by car and transit utilities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UtilityParams {
    pub income_effect_coef: f64,
    pub income_effect_shift: f64,
    pub arrival_flex: f64,
    pub positive_travel_time_term: bool,
}

impl UtilityParams {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        Self {
            income_effect_coef: config.income_effect_coef,
            income_effect_shift: config.income_effect_shift,
            arrival_flex: config.arrival_flex,
            positive_travel_time_term: config.positive_travel_time_term,
        }
    }

    /// `I - 2c + λ₁ ln(γ₁ + I - 2c)`.
    #[inline]
    pub fn income_block(&self, income: f64, cost: f64) -> f64 {
        let disposable = income - 2.0 * cost;
        disposable + self.income_effect_coef * (self.income_effect_shift + disposable).ln()
    }
}

/// Early and late schedule delay (min) for a departure at `start` with travel time `tt`.
#[inline]
pub fn schedule_delays(start: f64, arrival_flex: f64, desired_arrival: f64, tt: f64) -> (f64, f64) {
    let arrival = start + tt;
    let early = (desired_arrival - arrival_flex - arrival).max(0.0);
    let late = (arrival - desired_arrival - arrival_flex).max(0.0);
    (early, late)
}

/// Expected one-way car cost: token opportunity cost plus fuel.
///
/// Surplus tokens (`x >= T`) are sold, so the token term `(T - x) p` is negative;
/// a deficit is bought at `(T - x) p`. With `literal_surplus` the surplus branch
/// is `(FW - T) p` instead.
#[inline]
pub fn car_cost(toll: f64, expected_balance: f64, price: f64, fuel: f64) -> f64 {
    (toll - expected_balance) * price + fuel
}

#[inline]
pub fn car_cost_literal(toll: f64, expected_balance: f64, full_wallet: f64, price: f64, fuel: f64) -> f64 {
    if expected_balance >= toll {
        (full_wallet - toll) * price + fuel
    } else {
        (toll - expected_balance) * price + fuel
    }
}

/// Systematic utility of driving, departing at `start` with perceived travel time `perceived_tt`.
#[inline]
pub fn car_utility(traveler: &TravelerProfile, start: f64, perceived_tt: f64, cost: f64, params: &UtilityParams) -> f64 {
    let (sde, sdl) = schedule_delays(start, params.arrival_flex, traveler.desired_arrival, perceived_tt);
    let time_term = 2.0 * traveler.alpha * perceived_tt;
    let time_term = if params.positive_travel_time_term { time_term } else { -time_term };
    time_term - traveler.beta_early * sde - traveler.beta_late * sdl + params.income_block(traveler.income, cost)
}

/// Expected one-way transit cost: fare minus the value of selling a full wallet.
#[inline]
pub fn pt_cost(price: f64, full_wallet: f64, fare: f64) -> f64 {
    -price * full_wallet + fare
}

/// Systematic utility of public transit.
pub fn pt_utility(traveler: &TravelerProfile, config: &ScenarioConfig, price: f64, params: &UtilityParams) -> f64 {
    let cost = pt_cost(price, config.full_wallet(), config.pt_fare);
    pt_utility_with_cost(traveler, config.pt_travel_time, config.pt_wait, cost, params)
}

#[inline]
pub fn pt_utility_with_cost(traveler: &TravelerProfile, pt_time: f64, pt_wait: f64, cost: f64, params: &UtilityParams) -> f64 {
    -2.0 * traveler.alpha * pt_time - 2.0 * traveler.beta_wait * pt_wait + params.income_block(traveler.income, cost)
}

/// Largest car cost that a window can imply, used for the budget check.
#[inline]
pub fn worst_case_car_cost(toll: f64, full_wallet: f64, price: f64, fuel: f64, literal_surplus: bool) -> f64 {
    let tokens = if literal_surplus { toll.max(full_wallet - toll) } else { toll };
    tokens * price + fuel
}

/// Indices `k` of the windows in `H_n` whose worst-case round-trip cost fits the budget.
pub fn feasible_windows(
    traveler: &TravelerProfile,
    toll: &TollProfile,
    market: &MarketState,
    config: &ScenarioConfig,
) -> Result<Vec<usize>> {
    let fw = config.full_wallet();
    let feasible: Vec<usize> = (0..traveler.window_count as usize)
        .filter(|&k| {
            let start = traveler.window_start(k, config.window_minutes) as f64;
            let worst = worst_case_car_cost(toll.toll_at(start), fw, market.price, config.fuel_cost, config.literal_surplus_cost);
            traveler.income - 2.0 * worst >= 0.0
        })
        .collect();
    if feasible.is_empty() {
        return Err(Error::EmptyFeasibleSet { traveler: traveler.id });
    }
    Ok(feasible)
}

/// Expected car cost for window `k` given the traveler's wallet.
pub fn expected_car_cost(
    traveler: &TravelerProfile,
    k: usize,
    toll: &TollProfile,
    wallet: &TokenWallet,
    market: &MarketState,
    config: &ScenarioConfig,
    day_start: f64,
) -> f64 {
    let start = traveler.window_start(k, config.window_minutes) as f64;
    let balance = expected_token_balance(wallet, day_start + start, market);
    let t = toll.toll_at(start);
    if config.literal_surplus_cost {
        car_cost_literal(t, balance, market.full_wallet(), market.price, config.fuel_cost)
    } else {
        car_cost(t, balance, market.price, config.fuel_cost)
    }
}

/// Logit probabilities `exp(μ V_i) / Σ exp(μ V_k)`.
pub fn choice_probabilities(utilities: &[f64], scale: f64) -> Vec<f64> {
    let mut out = utilities.to_vec();
    softmax_in_place(&mut out, scale);
    out
}

/// In-place scaled softmax with max subtraction.
pub fn softmax_in_place(values: &mut [f64], scale: f64) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (scale * (*v - max)).exp();
        sum += *v;
    }
    for v in values.iter_mut() {
        *v /= sum;
    }
}

/// Inverse-CDF draw over probabilities in alternative order.
pub fn sample_index(probabilities: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probabilities.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::population::make_traveler;

    fn params() -> UtilityParams {
        UtilityParams::from_config(&ScenarioConfig::desk())
    }

    fn zeroed_traveler(income: f64) -> TravelerProfile {
        let mut t = make_traveler(0, &ScenarioConfig::desk(), income, 480.0, 18.0, 1.0);
        t.alpha = 0.0;
        t.beta_early = 0.0;
        t.beta_late = 0.0;
        t.beta_wait = 0.0;
        t
    }

    #[test]
    fn schedule_delay_cases() {
        assert_eq!(schedule_delays(400.0, 0.0, 430.0, 30.0), (0.0, 0.0));
        assert_eq!(schedule_delays(400.0, 0.0, 440.0, 30.0), (10.0, 0.0));
        assert_eq!(schedule_delays(400.0, 0.0, 425.0, 30.0), (0.0, 5.0));
        assert_eq!(schedule_delays(400.0, 10.0, 440.0, 30.0), (0.0, 0.0));
    }

    #[test]
    fn car_cost_cases() {
        let fw = 1.9368;
        assert!((car_cost(fw, fw, 1.15, 3.13) - 3.13).abs() < 1e-12);
        assert!((car_cost(0.0, fw, 1.15, 3.13) - (3.13 - fw * 1.15)).abs() < 1e-12);
        assert!((car_cost(0.0, fw, 1.15, 3.13) - 0.90268).abs() < 1e-5);
        assert!((car_cost(3.0, fw, 1.15, 3.13) - (3.13 + (3.0 - fw) * 1.15)).abs() < 1e-12);
        assert!((car_cost(3.0, fw, 1.15, 3.13) - 4.35268).abs() < 1e-5);
        // Literal branch only differs when a surplus is sold.
        assert!((car_cost_literal(0.5, fw, fw, 1.0, 0.0) - (fw - 0.5)).abs() < 1e-12);
        assert_eq!(car_cost_literal(3.0, fw, fw, 1.15, 3.13), car_cost(3.0, fw, 1.15, 3.13));
    }

    #[test]
    fn car_utility_income_block() {
        let t = zeroed_traveler(100.0);
        let p = params();
        let v = car_utility(&t, 400.0, 30.0, 0.0, &p);
        assert!((v - (100.0 + 3.0 * 102f64.ln())).abs() < 1e-12);
        let v = car_utility(&t, 400.0, 30.0, 50.0, &p);
        assert!((v - 3.0 * 2f64.ln()).abs() < 1e-12);
    }

    /// Straight-line transcription of the car utility, independent of the helpers above.
    fn car_utility_oracle(
        alpha: f64, beta_e: f64, beta_l: f64, income: f64, t_hat: f64,
        start: f64, tt: f64, toll: f64, balance: f64, price: f64, fuel: f64,
    ) -> f64 {
        let r = if balance >= toll { -(balance - toll) * price } else { (toll - balance) * price };
        let c = r + fuel;
        let arr = start + tt;
        let sde = if t_hat - arr > 0.0 { t_hat - arr } else { 0.0 };
        let sdl = if arr - t_hat > 0.0 { arr - t_hat } else { 0.0 };
        -2.0 * alpha * tt - beta_e * sde - beta_l * sdl + income - 2.0 * c + 3.0 * (2.0 + income - 2.0 * c).ln()
    }

    #[test]
    fn car_utility_matches_oracle() {
        let config = ScenarioConfig::desk();
        let p = params();
        let t = make_traveler(0, &config, 87.5, 471.3, 18.0, 1.0);
        for (start, tt, toll, bal, price) in [
            (420.0, 31.0, 2.5, 1.9368, 1.15),
            (455.0, 44.2, 0.2, 1.2, 0.8),
            (400.0, 24.0, 6.9, 0.0, 2.0),
            (470.0, 27.5, 0.0, 1.9368, 0.0),
        ] {
            let c = car_cost(toll, bal, price, config.fuel_cost);
            let got = car_utility(&t, start, tt, c, &p);
            let want = car_utility_oracle(t.alpha, t.beta_early, t.beta_late, t.income, t.desired_arrival, start, tt, toll, bal, price, 3.13);
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn pt_cost_and_utility() {
        let fw = 1.9368;
        assert_eq!(pt_cost(0.0, fw, 2.0), 2.0);
        assert!((pt_cost(1.15, fw, 2.0) - (-0.22732)).abs() < 1e-5);
        let t = zeroed_traveler(100.0);
        let v = pt_utility_with_cost(&t, 60.0, 5.0, 0.0, &params());
        assert!((v - (100.0 + 3.0 * 102f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn zero_toll_and_rich_travelers_keep_every_window() {
        let config = ScenarioConfig::desk();
        let market = MarketState::from_config(&config.market);
        let t = make_traveler(0, &config, 60.0, 480.0, 18.0, 1.0);
        let all = feasible_windows(&t, &TollProfile::zero(), &market, &config).unwrap();
        assert_eq!(all.len(), 121);
        let rich = make_traveler(1, &config, 1e6, 480.0, 18.0, 1.0);
        let tolled = TollProfile::new(7.0, 456.0, 50.0);
        assert_eq!(feasible_windows(&rich, &tolled, &market, &config).unwrap().len(), 121);
    }

    #[test]
    fn boundary_income_admits_peak_window() {
        let config = ScenarioConfig::desk();
        let mut market = MarketState::from_config(&config.market);
        market.price = 1.5;
        let toll = TollProfile::new(5.0, 456.0, 50.0);
        let mut t = make_traveler(0, &config, 100.0, 480.0, 18.0, 1.0);
        let peak = 456.0;
        let worst = worst_case_car_cost(toll.toll_at(peak), config.full_wallet(), market.price, config.fuel_cost, false);
        t.income = 2.0 * worst;
        let feasible = feasible_windows(&t, &toll, &market, &config).unwrap();
        let k_peak = t.window_index(456, 1).unwrap();
        assert!(feasible.contains(&k_peak), "non-strict inequality admits the boundary");
        t.income = 2.0 * worst - 1e-9;
        let feasible = feasible_windows(&t, &toll, &market, &config).unwrap();
        assert!(!feasible.contains(&k_peak));
        assert_eq!(feasible.len(), 120, "only the peak window is excluded");
    }

    #[test]
    fn empty_feasible_set_is_an_error() {
        let config = ScenarioConfig::desk();
        let market = MarketState::from_config(&config.market);
        let t = make_traveler(4, &config, 1.0, 480.0, 18.0, 1.0);
        match feasible_windows(&t, &TollProfile::zero(), &market, &config) {
            Err(Error::EmptyFeasibleSet { traveler }) => assert_eq!(traveler, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn softmax_cases() {
        assert_eq!(choice_probabilities(&[5.0, 5.0], 1.0), vec![0.5, 0.5]);
        assert_eq!(choice_probabilities(&[3.0], 2.0), vec![1.0]);
        let p = choice_probabilities(&[1.0, 0.0, 0.0], 1.0);
        let e = std::f64::consts::E;
        assert!((p[0] - e / (e + 2.0)).abs() < 1e-12);
        assert!((p[0] - 0.57611).abs() < 1e-5 && (p[1] - 0.21194).abs() < 1e-5);
        let huge = choice_probabilities(&[1e6, 1e6 - 1.0], 1.0);
        assert!(huge.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn inverse_cdf_sampling() {
        let p = [0.2, 0.5, 0.3];
        assert_eq!(sample_index(&p, 0.0), 0);
        assert_eq!(sample_index(&p, 0.19), 0);
        assert_eq!(sample_index(&p, 0.2), 1);
        assert_eq!(sample_index(&p, 0.71), 2);
        assert_eq!(sample_index(&p, 0.999_999_999), 2);
    }
}
