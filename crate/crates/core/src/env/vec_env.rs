use std::collections::HashSet;

use rayon::prelude::*;

use super::{Environment, Transition};
use crate::error::{config_err, Error, Result};

/// Independent environments stepped in lockstep.
///
/// Each environment owns its RNG, so results do not depend on how the
/// workers are scheduled.
pub struct VecEnv<E> {
    envs: Vec<E>,
}

impl<E: Environment> VecEnv<E> {
    /// Builds one environment per seed. Duplicate seeds are allowed but logged.
    pub fn new<F>(seeds: &[u64], mut make: F) -> Result<Self>
    where
        F: FnMut(u64) -> Result<E>,
    {
        if seeds.is_empty() {
            return Err(config_err("need at least one environment"));
        }
        let distinct: HashSet<u64> = seeds.iter().copied().collect();
        if distinct.len() < seeds.len() {
            log::warn!("vectorized environment has duplicate seeds: {seeds:?}");
        }
        let envs = seeds.iter().map(|&s| make(s)).collect::<Result<Vec<_>>>()?;
        Self::from_envs(envs)
    }

    pub fn from_envs(envs: Vec<E>) -> Result<Self> {
        let first = envs.first().ok_or_else(|| config_err("need at least one environment"))?;
        let (obs, act) = (first.observation_dim(), first.action_dim());
        if envs.iter().any(|e| e.observation_dim() != obs || e.action_dim() != act) {
            return Err(config_err("environments disagree on dimensions"));
        }
        Ok(Self { envs })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn observation_dim(&self) -> usize {
        self.envs[0].observation_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.envs[0].action_dim()
    }

    pub fn envs(&self) -> &[E] {
        &self.envs
    }

    pub fn envs_mut(&mut self) -> &mut [E] {
        &mut self.envs
    }

    pub fn reset_all(&mut self) -> Result<Vec<Vec<f64>>> {
        self.envs.par_iter_mut().map(|e| e.reset()).collect()
    }

    pub fn reset(&mut self, index: usize) -> Result<Vec<f64>> {
        self.envs[index].reset()
    }

    /// Steps every environment with its own action.
    pub fn step_all(&mut self, actions: &[Vec<f64>]) -> Result<Vec<Transition>> {
        if actions.len() != self.envs.len() {
            return Err(Error::Dimension { context: "vectorized actions", expected: self.envs.len(), actual: actions.len() });
        }
        self.envs
            .par_iter_mut()
            .zip(actions.par_iter())
            .map(|(e, a)| e.step(a))
            .collect()
    }
}
