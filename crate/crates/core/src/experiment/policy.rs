//! Training and deterministic evaluation of tolling policies.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{EpisodeConfig, TollEnv, TraceRecord, VecEnv};
use crate::error::{Error, Result};
use crate::ppo::{mean_action, CheckpointHeader, IterationStats, Layout, PolicyParams, PpoTrainer, TrainConfig};
use crate::sim::{DaySummary, ScenarioConfig};

/// Weights and learning curve of one training run.
#[derive(Clone, Debug)]
pub struct TrainedPolicy {
    pub seed: u64,
    pub params: PolicyParams,
    pub curve: Vec<IterationStats>,
    pub config_hash: String,
}

impl TrainedPolicy {
    pub fn header(&self) -> CheckpointHeader {
        CheckpointHeader {
            layout: self.params.layout,
            tensors: self.params.layout.tensors(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            iterations: self.curve.len(),
        }
    }
}

/// Per-environment episode seeds derived from a run seed.
pub fn env_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.next_u64()).collect()
}

/// Trains a policy for `iterations` rollouts, optionally starting from `init`.
pub fn train_policy(
    scenario: &ScenarioConfig,
    episode: &EpisodeConfig,
    train: &TrainConfig,
    iterations: usize,
    seed: u64,
    init: Option<PolicyParams>,
) -> Result<TrainedPolicy> {
    let envs = VecEnv::new(&env_seeds(seed, train.n_envs), |s| TollEnv::new(scenario.clone(), episode.clone(), s))?;
    let mut trainer = PpoTrainer::new(train.clone(), envs, seed, init)?;
    let mut curve = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let row = trainer.train_iteration()?;
        log::info!(
            "seed {seed} iter {} return {:.3} aitt6 {:.2} M {:.2}",
            row.iteration,
            row.mean_return,
            row.aitt_last6,
            row.toll_m_mean
        );
        curve.push(row);
    }
    let config_hash = crate::sim::config::config_hash(&(scenario, episode, train));
    Ok(TrainedPolicy { seed, params: trainer.params, curve, config_hash })
}

/// Day series of one deterministic episode.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyEvaluation {
    pub seed: u64,
    /// Days after each action (day 0, run before the first action, is excluded).
    pub days: Vec<DaySummary>,
    pub rewards: Vec<f64>,
    pub trace: Vec<TraceRecord>,
}

impl PolicyEvaluation {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

fn check_layout(params: &PolicyParams, env: &TollEnv) -> Result<()> {
    use crate::env::Environment;
    let expected = Layout::new(env.observation_dim(), params.layout.hidden, env.action_dim());
    if params.layout != expected {
        return Err(Error::Checkpoint(format!(
            "policy expects {} inputs and {} outputs but the environment has {} and {}",
            params.layout.input,
            params.layout.action,
            expected.input,
            expected.action
        )));
    }
    Ok(())
}

/// Runs one episode on the population drawn from `seed`, acting with the policy mean.
pub fn evaluate_policy(params: &PolicyParams, scenario: &ScenarioConfig, episode: &EpisodeConfig, seed: u64) -> Result<PolicyEvaluation> {
    let mut env = TollEnv::new(scenario.clone(), episode.clone(), seed)?;
    check_layout(params, &env)?;
    let mut obs = env.reset_with_seed(seed)?;
    let mut out = PolicyEvaluation { seed, days: Vec::new(), rewards: Vec::new(), trace: Vec::new() };
    for _ in 0..episode.horizon_days {
        let action = mean_action(params, &obs)?;
        let (tr, outcome) = env.step_outcome(&action)?;
        let summary = outcome.summary();
        out.trace.push(TraceRecord {
            episode: 0,
            day: summary.day,
            state: std::mem::replace(&mut obs, tr.observation),
            action,
            reward: tr.reward,
            outcome: Some(summary.clone()),
        });
        out.days.push(summary);
        out.rewards.push(tr.reward);
    }
    Ok(out)
}
