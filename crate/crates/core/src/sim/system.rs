//! The full commute system and its daily pipeline.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ScenarioConfig, FLOW_BIN_MINUTES};
use super::demand::{
    car_cost, car_cost_literal, car_utility, pt_cost, pt_utility_with_cost, sample_index, softmax_in_place,
    worst_case_car_cost, UtilityParams,
};
use super::learning::PerceptionTable;
use super::market::{adjust_price, expected_token_balance, settle_market, MarketState, TokenUse, TokenWallet, Transaction};
use super::population::{sample_population, TravelerProfile};
use super::supply::{simulate_mfd, CarTrip, MfdOutcome, SpeedFunction};
use super::toll::TollProfile;
use crate::error::{config_err, Error, Result};

const POPULATION_STREAM: u64 = 0;
const CHOICE_STREAM: u64 = 1;

/// A traveler's realized decision for the day.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Choice {
    /// Drive, departing at the start of window `window` (minute `departure`).
    Car { window: usize, departure: u32 },
    /// Take transit, departing at minute `departure`.
    Pt { departure: f64 },
}

impl Choice {
    pub fn is_car(&self) -> bool {
        matches!(self, Choice::Car { .. })
    }

    pub fn departure(&self) -> f64 {
        match *self {
            Choice::Car { departure, .. } => departure as f64,
            Choice::Pt { departure } => departure,
        }
    }
}

/// Probe travel times for unchosen windows, stored per distinct trip length
/// as a curve over departure minutes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FictionalTimes {
    curves: Vec<Vec<f64>>,
    traveler_curve: Vec<usize>,
}

impl FictionalTimes {
    fn build(mfd: &MfdOutcome, travelers: &[TravelerProfile]) -> Self {
        let mut index: HashMap<u64, usize> = HashMap::new();
        let mut curves = Vec::new();
        let traveler_curve = travelers
            .iter()
            .map(|t| {
                *index.entry(t.trip_length.to_bits()).or_insert_with(|| {
                    curves.push(mfd.probe_curve(t.trip_length));
                    curves.len() - 1
                })
            })
            .collect();
        Self { curves, traveler_curve }
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    /// Travel time `traveler` would have had departing at `minute`.
    #[inline]
    pub fn get(&self, traveler: usize, minute: u32) -> f64 {
        self.curves[self.traveler_curve[traveler]][minute as usize]
    }
}

/// Everything observed on one simulated day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayOutcome {
    pub day: u32,
    pub toll: TollProfile,
    /// Token price in effect during the day.
    pub price: f64,
    /// Price announced for the next day.
    pub next_price: f64,
    pub choices: Vec<Choice>,
    /// Realized travel time per traveler (transit riders get the fixed transit time).
    pub experienced_tt: Vec<f64>,
    #[serde(skip)]
    pub fictional: FictionalTimes,
    /// Car departures per 5-minute bin.
    pub departure_flows: Vec<f64>,
    #[serde(skip)]
    pub accumulation: Vec<u32>,
    #[serde(skip)]
    pub transactions: Vec<Transaction>,
    /// Mean travel time over all travelers (min).
    pub aitt: f64,
    /// Mean travel time over car travelers; `None` if nobody drove.
    pub car_aitt: Option<f64>,
    pub pt_share: f64,
    pub car_share: f64,
    /// Regulator net revenue ($).
    pub net_revenue: f64,
    /// Mean realized systematic utility of the chosen alternatives ($).
    pub welfare_per_capita: f64,
    /// Some trip ended after the horizon.
    pub overrun: bool,
}

impl DayOutcome {
    pub fn car_count(&self) -> usize {
        self.choices.iter().filter(|c| c.is_car()).count()
    }

    /// Compact per-day record without per-traveler vectors.
    pub fn summary(&self) -> DaySummary {
        DaySummary {
            day: self.day,
            amplitude: self.toll.amplitude,
            center: self.toll.center,
            width: self.toll.width,
            price: self.price,
            aitt: self.aitt,
            car_aitt: self.car_aitt,
            pt_share: self.pt_share,
            net_revenue: self.net_revenue,
            welfare_per_capita: self.welfare_per_capita,
            overrun: self.overrun,
        }
    }
}

/// Scalar view of a [`DayOutcome`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DaySummary {
    pub day: u32,
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub price: f64,
    pub aitt: f64,
    pub car_aitt: Option<f64>,
    pub pt_share: f64,
    pub net_revenue: f64,
    pub welfare_per_capita: f64,
    pub overrun: bool,
}

/// State of the commute system carried from day to day.
#[derive(Clone, Debug)]
pub struct TcsSystem {
    config: ScenarioConfig,
    travelers: Vec<TravelerProfile>,
    wallets: Vec<TokenWallet>,
    market: MarketState,
    perceptions: PerceptionTable,
    rng: ChaCha8Rng,
    day: u32,
    compute_fictional: bool,
    speed_fn: SpeedFunction,
    params: UtilityParams,
    // Scratch buffers reused across travelers.
    utilities: Vec<f64>,
    alternatives: Vec<usize>,
}

impl TcsSystem {
    /// Draws the population from `config.seed` and initializes wallets, market and perceptions.
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let mut pop_rng = ChaCha8Rng::seed_from_u64(config.seed);
        pop_rng.set_stream(POPULATION_STREAM);
        let travelers = sample_population(&config, &mut pop_rng)?;
        Self::with_travelers(config, travelers)
    }

    /// Builds a system around an explicit population.
    pub fn with_travelers(config: ScenarioConfig, travelers: Vec<TravelerProfile>) -> Result<Self> {
        config.validate()?;
        if travelers.is_empty() {
            return Err(config_err("population must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(CHOICE_STREAM);
        let market = MarketState::from_config(&config.market);
        let wallets = vec![TokenWallet::full(market.full_wallet()); travelers.len()];
        let perceptions = PerceptionTable::new(&travelers, config.car_free_flow_speed);
        let speed_fn = SpeedFunction {
            free_flow: config.car_free_flow_speed,
            jam_accumulation: config.jam_accumulation,
            min_speed: config.min_speed_mph,
        };
        let params = UtilityParams::from_config(&config);
        Ok(Self {
            config,
            travelers,
            wallets,
            market,
            perceptions,
            rng,
            day: 0,
            compute_fictional: true,
            speed_fn,
            params,
            utilities: Vec::new(),
            alternatives: Vec::new(),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn travelers(&self) -> &[TravelerProfile] {
        &self.travelers
    }

    pub fn wallets(&self) -> &[TokenWallet] {
        &self.wallets
    }

    pub fn market(&self) -> &MarketState {
        &self.market
    }

    pub fn perceptions(&self) -> &PerceptionTable {
        &self.perceptions
    }

    /// Number of days simulated so far.
    pub fn day(&self) -> u32 {
        self.day
    }

    /// Disables probe travel times; perceptions of unchosen windows then stay put.
    pub fn set_compute_fictional(&mut self, on: bool) {
        self.compute_fictional = on;
    }

    /// Simulates one day under `toll`: choices, traffic, trading, price update, learning.
    pub fn run_day(&mut self, toll: &TollProfile) -> Result<DayOutcome> {
        if !(toll.width > 0.0 && toll.width.is_finite() && toll.amplitude.is_finite() && toll.center.is_finite()) {
            return Err(config_err(format!("invalid toll profile {toll:?}")));
        }
        let horizon = self.config.horizon_minutes;
        let day_start = self.day as f64 * horizon as f64;
        let level = toll.level();
        let toll_by_minute = toll.by_minute(horizon);

        let choices = self.choose(&toll_by_minute, level, day_start)?;

        let trips: Vec<CarTrip> = choices
            .iter()
            .enumerate()
            .filter_map(|(n, c)| match *c {
                Choice::Car { departure, .. } => Some(CarTrip {
                    traveler: n,
                    departure,
                    length: self.travelers[n].trip_length,
                }),
                Choice::Pt { .. } => None,
            })
            .collect();
        let mfd = simulate_mfd(&trips, &self.speed_fn, horizon);

        let mut experienced_tt = vec![self.config.pt_travel_time; self.travelers.len()];
        for (trip, tt) in trips.iter().zip(&mfd.travel_times) {
            experienced_tt[trip.traveler] = *tt;
        }
        let fictional = if self.compute_fictional {
            FictionalTimes::build(&mfd, &self.travelers)
        } else {
            FictionalTimes::default()
        };

        let uses: Vec<TokenUse> = choices
            .iter()
            .map(|c| match *c {
                Choice::Car { departure, .. } => TokenUse::Drive {
                    clock: day_start + departure as f64,
                    toll: toll_by_minute[departure as usize],
                },
                Choice::Pt { departure } => TokenUse::Transit { clock: day_start + departure },
            })
            .collect();
        let price = self.market.price;
        let settlement = settle_market(&uses, &mut self.wallets, &self.market);
        self.market = adjust_price(&self.market, settlement.net_revenue);

        if self.compute_fictional {
            let dh = self.config.window_minutes;
            let travelers = &self.travelers;
            let chosen: Vec<Option<usize>> = choices
                .iter()
                .map(|c| match *c {
                    Choice::Car { window, .. } => Some(window),
                    Choice::Pt { .. } => None,
                })
                .collect();
            self.perceptions.update(level, self.config.learning_weight, |n, k| {
                if chosen[n] == Some(k) {
                    experienced_tt[n]
                } else {
                    fictional.get(n, travelers[n].window_start(k, dh))
                }
            });
        }

        let n = self.travelers.len() as f64;
        let mut departure_flows = vec![0.0; self.config.flow_bins()];
        let mut car_tt_sum = 0.0;
        let mut cars = 0usize;
        let mut welfare = 0.0;
        for (i, choice) in choices.iter().enumerate() {
            let traveler = &self.travelers[i];
            match *choice {
                Choice::Car { departure, .. } => {
                    departure_flows[departure as usize / FLOW_BIN_MINUTES] += 1.0;
                    car_tt_sum += experienced_tt[i];
                    cars += 1;
                    let cost = settlement.token_cost[i] + self.config.fuel_cost;
                    welfare += car_utility(traveler, departure as f64, experienced_tt[i], cost, &self.params);
                }
                Choice::Pt { .. } => {
                    let cost = settlement.token_cost[i] + self.config.pt_fare;
                    welfare += pt_utility_with_cost(traveler, self.config.pt_travel_time, self.config.pt_wait, cost, &self.params);
                }
            }
        }
        let aitt = experienced_tt.iter().sum::<f64>() / n;
        let car_share = cars as f64 / n;

        let outcome = DayOutcome {
            day: self.day,
            toll: *toll,
            price,
            next_price: self.market.price,
            choices,
            experienced_tt,
            fictional,
            departure_flows,
            accumulation: mfd.accumulation,
            transactions: settlement.transactions,
            aitt,
            car_aitt: (cars > 0).then(|| car_tt_sum / cars as f64),
            pt_share: 1.0 - car_share,
            car_share,
            net_revenue: settlement.net_revenue,
            welfare_per_capita: welfare / n,
            overrun: mfd.overrun,
        };
        self.day += 1;
        Ok(outcome)
    }

    /// Samples every traveler's mode and departure window.
    fn choose(&mut self, toll_by_minute: &[f64], level: usize, day_start: f64) -> Result<Vec<Choice>> {
        let config = &self.config;
        let market = &self.market;
        let fw = market.full_wallet();
        let price = market.price;
        let dh = config.window_minutes;
        let mut choices = Vec::with_capacity(self.travelers.len());

        for (n, traveler) in self.travelers.iter().enumerate() {
            let wallet = &self.wallets[n];
            let row = self.perceptions.traveler_row(level, n);
            let free_flow = traveler.trip_length / config.car_free_flow_speed * 60.0;
            self.utilities.clear();
            self.alternatives.clear();

            for k in 0..traveler.window_count as usize {
                let start = traveler.window_start(k, dh);
                let toll = toll_by_minute[start as usize];
                let worst = worst_case_car_cost(toll, fw, price, config.fuel_cost, config.literal_surplus_cost);
                if traveler.income - 2.0 * worst < 0.0 {
                    continue;
                }
                let balance = expected_token_balance(wallet, day_start + start as f64, market);
                let cost = if config.literal_surplus_cost {
                    car_cost_literal(toll, balance, fw, price, config.fuel_cost)
                } else {
                    car_cost(toll, balance, price, config.fuel_cost)
                };
                let perceived = row.map_or(free_flow, |r| r[k]);
                self.utilities.push(car_utility(traveler, start as f64, perceived, cost, &self.params));
                self.alternatives.push(k);
            }
            if self.alternatives.is_empty() {
                return Err(Error::EmptyFeasibleSet { traveler: n });
            }
            let cost = pt_cost(price, fw, config.pt_fare);
            self.utilities.push(pt_utility_with_cost(traveler, config.pt_travel_time, config.pt_wait, cost, &self.params));

            softmax_in_place(&mut self.utilities, traveler.scale);
            let u: f64 = self.rng.random();
            let pick = sample_index(&self.utilities, u);
            choices.push(if pick < self.alternatives.len() {
                let k = self.alternatives[pick];
                Choice::Car { window: k, departure: traveler.window_start(k, dh) }
            } else {
                Choice::Pt { departure: traveler.pt_departure }
            });
        }
        Ok(choices)
    }

    /// Choice probabilities of one traveler under `toll` for today's state,
    /// in alternative order (feasible car windows ascending, then transit).
    pub fn choice_distribution(&self, traveler: usize, toll: &TollProfile) -> Result<(Vec<usize>, Vec<f64>)> {
        let config = &self.config;
        let t = &self.travelers[traveler];
        let fw = self.market.full_wallet();
        let price = self.market.price;
        let day_start = self.day as f64 * config.horizon_minutes as f64;
        let level = toll.level();
        let mut windows = Vec::new();
        let mut utilities = Vec::new();
        for k in 0..t.window_count as usize {
            let start = t.window_start(k, config.window_minutes) as f64;
            let toll_now = toll.toll_at(start);
            let worst = worst_case_car_cost(toll_now, fw, price, config.fuel_cost, config.literal_surplus_cost);
            if t.income - 2.0 * worst < 0.0 {
                continue;
            }
            let balance = expected_token_balance(&self.wallets[traveler], day_start + start, &self.market);
            let cost = if config.literal_surplus_cost {
                car_cost_literal(toll_now, balance, fw, price, config.fuel_cost)
            } else {
                car_cost(toll_now, balance, price, config.fuel_cost)
            };
            utilities.push(car_utility(t, start, self.perceptions.get(level, traveler, k), cost, &self.params));
            windows.push(k);
        }
        if windows.is_empty() {
            return Err(Error::EmptyFeasibleSet { traveler });
        }
        let cost = pt_cost(price, fw, config.pt_fare);
        utilities.push(pt_utility_with_cost(t, config.pt_travel_time, config.pt_wait, cost, &self.params));
        softmax_in_place(&mut utilities, t.scale);
        Ok((windows, utilities))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::population::make_traveler;

    fn small(n: usize, seed: u64) -> ScenarioConfig {
        ScenarioConfig { population: n, jam_accumulation: 700.0 * n as f64 / 750.0, ..ScenarioConfig::desk() }.with_seed(seed)
    }

    #[test]
    fn single_deterministic_traveler_is_free_flow() {
        let config = ScenarioConfig { population: 1, ..ScenarioConfig::desk() };
        let traveler = make_traveler(0, &config, 100.0, 480.0, 18.0, 1e3);
        let mut sys = TcsSystem::with_travelers(config, vec![traveler]).unwrap();
        let out = sys.run_day(&TollProfile::zero()).unwrap();
        assert_eq!(out.choices[0], Choice::Car { window: 60, departure: 456 });
        assert_eq!(out.experienced_tt[0].round(), 24.0);
        assert_eq!(out.aitt, out.experienced_tt[0]);
    }

    #[test]
    fn same_seed_same_day() {
        let toll = TollProfile::new(3.0, 450.0, 60.0);
        let mut a = TcsSystem::new(small(120, 5)).unwrap();
        let mut b = TcsSystem::new(small(120, 5)).unwrap();
        for _ in 0..3 {
            assert_eq!(a.run_day(&toll).unwrap(), b.run_day(&toll).unwrap());
        }
        let mut c = TcsSystem::new(small(120, 6)).unwrap();
        assert_ne!(a.run_day(&toll).unwrap().choices, c.run_day(&toll).unwrap().choices);
    }

    #[test]
    fn aggregates_are_consistent() {
        let mut sys = TcsSystem::new(small(10, 11)).unwrap();
        let out = sys.run_day(&TollProfile::new(2.0, 450.0, 60.0)).unwrap();
        let mean = out.experienced_tt.iter().sum::<f64>() / 10.0;
        assert!((out.aitt - mean).abs() < 1e-12);
        assert_eq!(out.departure_flows.iter().sum::<f64>(), out.car_count() as f64);
        assert!((out.pt_share + out.car_share - 1.0).abs() < 1e-15);
        let ledger: f64 = out.transactions.iter().map(|t| t.revenue()).sum();
        assert_eq!(ledger, out.net_revenue);
    }

    #[test]
    fn choice_distribution_is_normalized() {
        let sys = TcsSystem::new(small(20, 2)).unwrap();
        for n in 0..20 {
            let (_, p) = sys.choice_distribution(n, &TollProfile::new(5.0, 440.0, 55.0)).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
