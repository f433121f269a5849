use super::{Environment, StepInfo, Transition};
use crate::error::{Error, Result};
use crate::sim::toll::AMPLITUDE_BOUNDS;
use crate::sim::TollProfile;

/// Synthetic single-parameter environment with reward `-(M - target)^2`.
///
/// The action is a change of M, clamped to the amplitude bounds. Useful for
/// checking that a trainer can find a known optimum quickly.
#[derive(Clone, Debug)]
pub struct QuadraticTollEnv {
    pub target: f64,
    pub horizon: usize,
    pub start: f64,
    amplitude: f64,
    steps: usize,
}

impl QuadraticTollEnv {
    pub fn new(target: f64, horizon: usize) -> Self {
        Self { target, horizon, start: 0.0, amplitude: 0.0, steps: horizon }
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.amplitude / AMPLITUDE_BOUNDS.1]
    }
}

impl Environment for QuadraticTollEnv {
    fn observation_dim(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&mut self) -> Result<Vec<f64>> {
        self.amplitude = self.start;
        self.steps = 0;
        Ok(self.observation())
    }

    fn step(&mut self, action: &[f64]) -> Result<Transition> {
        if self.steps >= self.horizon {
            return Err(Error::EpisodeDone);
        }
        if action.len() != 1 {
            return Err(Error::Dimension { context: "action", expected: 1, actual: action.len() });
        }
        self.amplitude = (self.amplitude + action[0]).clamp(AMPLITUDE_BOUNDS.0, AMPLITUDE_BOUNDS.1);
        self.steps += 1;
        let gap = self.amplitude - self.target;
        Ok(Transition {
            observation: self.observation(),
            reward: -gap * gap,
            done: self.steps == self.horizon,
            info: StepInfo {
                day: self.steps as u32,
                toll: TollProfile::new(self.amplitude, 0.0, 1.0),
                summary: None,
            },
        })
    }
}
