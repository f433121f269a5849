use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::state::{encode_state, reward, ActionMode};
use super::{Environment, StepInfo, Transition};
use crate::error::{config_err, Error, Result};
use crate::sim::{DayOutcome, ScenarioConfig, TcsSystem, TollProfile};

/// Episode settings of the tolling MDP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    /// Steps per episode D.
    pub horizon_days: usize,
    pub action_mode: ActionMode,
    /// Center used in 1D mode (min).
    pub fixed_center: f64,
    /// Width used in 1D mode (min).
    pub fixed_width: f64,
    /// Target transit share in the reward.
    pub pt_target: f64,
    /// Toll applied on day 0.
    pub initial_toll: TollProfile,
    /// Multiplier from raw action to parameter change, per (M, μ, σ).
    pub action_scale: [f64; 3],
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            horizon_days: 60,
            action_mode: ActionMode::OneD,
            fixed_center: 443.05,
            fixed_width: 63.18,
            pt_target: 0.1,
            initial_toll: TollProfile::zero(),
            action_scale: [1.0, 10.0, 2.0],
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_days == 0 {
            return Err(config_err("horizon_days must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.pt_target) {
            return Err(config_err("pt_target must lie in [0, 1]"));
        }
        if self.action_scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(config_err("action_scale entries must be positive"));
        }
        if !self.initial_toll.within_bounds() {
            return Err(config_err("initial_toll must lie within the toll bounds"));
        }
        Ok(())
    }

    /// Day-0 toll; in 1D mode center and width are the fixed ones.
    pub fn start_toll(&self) -> TollProfile {
        match self.action_mode {
            ActionMode::OneD => TollProfile::new(self.initial_toll.amplitude, self.fixed_center, self.fixed_width),
            ActionMode::ThreeD => self.initial_toll,
        }
        .clamped()
    }

    /// Applies a raw action to `toll` and clamps into bounds.
    pub fn apply_action(&self, toll: &TollProfile, action: &[f64]) -> Result<TollProfile> {
        let dim = self.action_mode.action_dim();
        if action.len() != dim {
            return Err(Error::Dimension { context: "action", expected: dim, actual: action.len() });
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite(format!("action {action:?}")));
        }
        let s = self.action_scale;
        let mut next = *toll;
        next.amplitude += s[0] * action[0];
        if dim == 3 {
            next.center += s[1] * action[1];
            next.width += s[2] * action[2];
        }
        Ok(next.clamped())
    }
}

/// The commute simulator wrapped as an episodic environment.
pub struct TollEnv {
    scenario: ScenarioConfig,
    episode: EpisodeConfig,
    seeds: ChaCha8Rng,
    system: Option<TcsSystem>,
    toll: TollProfile,
    steps: usize,
}

impl TollEnv {
    /// `seed` drives the per-episode scenario seeds drawn by [`Environment::reset`].
    pub fn new(scenario: ScenarioConfig, episode: EpisodeConfig, seed: u64) -> Result<Self> {
        scenario.validate()?;
        episode.validate()?;
        Ok(Self {
            toll: episode.start_toll(),
            scenario,
            episode,
            seeds: ChaCha8Rng::seed_from_u64(seed),
            system: None,
            steps: 0,
        })
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }

    pub fn episode(&self) -> &EpisodeConfig {
        &self.episode
    }

    pub fn toll(&self) -> &TollProfile {
        &self.toll
    }

    pub fn system(&self) -> Option<&TcsSystem> {
        self.system.as_ref()
    }

    /// Starts an episode whose population and choices are drawn from `seed`.
    pub fn reset_with_seed(&mut self, seed: u64) -> Result<Vec<f64>> {
        let mut system = TcsSystem::new(self.scenario.clone().with_seed(seed))?;
        self.toll = self.episode.start_toll();
        let outcome = system.run_day(&self.toll)?;
        self.system = Some(system);
        self.steps = 0;
        self.observe(&outcome)
    }

    /// Like [`Environment::step`] but also returns the full day outcome.
    pub fn step_outcome(&mut self, action: &[f64]) -> Result<(Transition, DayOutcome)> {
        if self.steps >= self.episode.horizon_days {
            return Err(Error::EpisodeDone);
        }
        let system = self.system.as_mut().ok_or(Error::EpisodeDone)?;
        self.toll = self.episode.apply_action(&self.toll, action)?;
        let outcome = system.run_day(&self.toll)?;
        self.steps += 1;
        let r = reward(outcome.aitt, outcome.pt_share, self.scenario.free_flow_time(), self.episode.pt_target);
        let transition = Transition {
            observation: self.observe(&outcome)?,
            reward: r,
            done: self.steps == self.episode.horizon_days,
            info: StepInfo { day: outcome.day, toll: self.toll, summary: Some(outcome.summary()) },
        };
        Ok((transition, outcome))
    }

    fn observe(&self, outcome: &DayOutcome) -> Result<Vec<f64>> {
        encode_state(
            &outcome.departure_flows,
            self.scenario.flow_bins(),
            self.scenario.population,
            outcome.next_price,
            &self.toll,
            self.episode.action_mode,
        )
    }
}

impl Environment for TollEnv {
    fn observation_dim(&self) -> usize {
        self.episode.action_mode.observation_dim(self.scenario.flow_bins())
    }

    fn action_dim(&self) -> usize {
        self.episode.action_mode.action_dim()
    }

    fn horizon(&self) -> usize {
        self.episode.horizon_days
    }

    fn reset(&mut self) -> Result<Vec<f64>> {
        let seed = self.seeds.next_u64();
        self.reset_with_seed(seed)
    }

    fn step(&mut self, action: &[f64]) -> Result<Transition> {
        self.step_outcome(action).map(|(t, _)| t)
    }
}
