//! The tolling problem as a finite-horizon MDP.
//!
//! One step is one simulated day. The action adjusts the toll parameters,
//! the adjusted profile is applied to the next day, and the reward is computed
//! from that day's outcome.

mod state;
mod stub;
mod toll_env;
mod trace;
mod vec_env;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sim::{DaySummary, TollProfile};

pub use state::{decode_params, encode_state, reward, ActionMode, PRICE_NORMALIZER};
pub use stub::QuadraticTollEnv;
pub use toll_env::{EpisodeConfig, TollEnv};
pub use trace::{TraceRecord, TraceWriter};
pub use vec_env::VecEnv;

/// What an environment reports after one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Diagnostics attached to a step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    /// Index of the day whose outcome this step reports.
    pub day: u32,
    /// Toll profile applied on that day.
    pub toll: TollProfile,
    /// Simulator outcome, absent for synthetic environments.
    pub summary: Option<DaySummary>,
}

/// Episodic environment driven by the trainer.
pub trait Environment: Send {
    fn observation_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Number of steps in an episode.
    fn horizon(&self) -> usize;
    /// Starts a new episode and returns its first observation.
    fn reset(&mut self) -> Result<Vec<f64>>;
    fn step(&mut self, action: &[f64]) -> Result<Transition>;
}
