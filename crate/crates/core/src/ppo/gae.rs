//! Generalized advantage estimation.

use crate::error::{Error, Result};

/// Advantages and returns for one environment's step sequence.
///
/// `dones[t]` marks that step `t` ended an episode, so nothing is bootstrapped
/// across it. `last_value` is the value of the state after the final step,
/// used only if that step did not end an episode.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n {
        return Err(Error::Dimension { context: "gae values", expected: n, actual: values.len() });
    }
    if dones.len() != n {
        return Err(Error::Dimension { context: "gae dones", expected: n, actual: dones.len() });
    }
    let mut advantages = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let (next_value, carry) = if dones[t] {
            (0.0, 0.0)
        } else if t + 1 == n {
            (last_value, 0.0)
        } else {
            (values[t + 1], running)
        };
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * carry;
        advantages[t] = running;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((advantages, returns))
}
