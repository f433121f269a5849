//! Observation encoding and reward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::toll::{AMPLITUDE_BOUNDS, CENTER_BOUNDS, WIDTH_BOUNDS};
use crate::sim::TollProfile;

/// Price scale used to normalize the token price feature.
pub const PRICE_NORMALIZER: f64 = 5.0;

/// Which toll parameters the agent controls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum ActionMode {
    /// Amplitude only; center and width stay fixed.
    #[default]
    #[serde(rename = "1d")]
    OneD,
    /// Amplitude, center and width.
    #[serde(rename = "3d")]
    ThreeD,
}

impl ActionMode {
    pub fn action_dim(self) -> usize {
        match self {
            ActionMode::OneD => 1,
            ActionMode::ThreeD => 3,
        }
    }

    pub fn from_dim(dim: usize) -> Result<Self> {
        match dim {
            1 => Ok(ActionMode::OneD),
            3 => Ok(ActionMode::ThreeD),
            _ => Err(Error::Config(format!("action dimension must be 1 or 3, got {dim}"))),
        }
    }

    /// Observation length for `flow_bins` departure bins.
    pub fn observation_dim(self, flow_bins: usize) -> usize {
        flow_bins + 1 + self.action_dim()
    }
}

fn unit(v: f64, (lo, hi): (f64, f64)) -> f64 {
    (v - lo) / (hi - lo)
}

fn from_unit(u: f64, (lo, hi): (f64, f64)) -> f64 {
    lo + u * (hi - lo)
}

/// `[flows / N, price / p_max, M, (μ, σ)]` with the toll parameters scaled to `[0, 1]` by their bounds.
pub fn encode_state(
    flows: &[f64],
    expected_bins: usize,
    population: usize,
    price: f64,
    toll: &TollProfile,
    mode: ActionMode,
) -> Result<Vec<f64>> {
    if flows.len() != expected_bins {
        return Err(Error::Dimension { context: "departure flows", expected: expected_bins, actual: flows.len() });
    }
    let n = population as f64;
    let mut out = Vec::with_capacity(mode.observation_dim(expected_bins));
    out.extend(flows.iter().map(|f| f / n));
    out.push(price / PRICE_NORMALIZER);
    out.push(unit(toll.amplitude, AMPLITUDE_BOUNDS));
    if mode == ActionMode::ThreeD {
        out.push(unit(toll.center, CENTER_BOUNDS));
        out.push(unit(toll.width, WIDTH_BOUNDS));
    }
    Ok(out)
}

/// Recovers the toll parameters from an encoded state. In 1D mode center and
/// width come from `fixed`.
pub fn decode_params(state: &[f64], mode: ActionMode, fixed: &TollProfile) -> Result<TollProfile> {
    let dims = mode.action_dim();
    if state.len() < dims + 1 {
        return Err(Error::Dimension { context: "encoded state", expected: dims + 1, actual: state.len() });
    }
    let params = &state[state.len() - dims..];
    let amplitude = from_unit(params[0], AMPLITUDE_BOUNDS);
    Ok(match mode {
        ActionMode::OneD => TollProfile::new(amplitude, fixed.center, fixed.width),
        ActionMode::ThreeD => TollProfile::new(
            amplitude,
            from_unit(params[1], CENTER_BOUNDS),
            from_unit(params[2], WIDTH_BOUNDS),
        ),
    })
}

/// `-AITT / τ₀ - |P_PT - target|`.
pub fn reward(aitt: f64, pt_share: f64, free_flow_time: f64, pt_target: f64) -> f64 {
    -aitt / free_flow_time - (pt_share - pt_target).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_cases() {
        assert_eq!(reward(24.0, 0.1, 24.0, 0.1), -1.0);
        assert!((reward(48.0, 0.2, 24.0, 0.1) + 2.1).abs() < 1e-12);
        assert!((reward(35.38, 0.10, 24.0, 0.1) + 1.474_166_666_666_666_7).abs() < 1e-12);
    }

    #[test]
    fn lengths_by_mode() {
        let flows = vec![0.0; 144];
        let t = TollProfile::zero();
        assert_eq!(encode_state(&flows, 144, 10, 1.0, &t, ActionMode::OneD).unwrap().len(), 146);
        assert_eq!(encode_state(&flows, 144, 10, 1.0, &t, ActionMode::ThreeD).unwrap().len(), 148);
        assert!(matches!(
            encode_state(&flows[..143], 144, 10, 1.0, &t, ActionMode::OneD),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn lower_and_upper_bounds() {
        let flows = vec![0.0; 144];
        let lo = TollProfile::new(0.0, 300.0, 50.0);
        let s = encode_state(&flows, 144, 10, 0.0, &lo, ActionMode::ThreeD).unwrap();
        assert!(s.iter().all(|&x| x == 0.0));
        let hi = TollProfile::new(7.0, 540.0, 70.0);
        let s = encode_state(&flows, 144, 10, 0.0, &hi, ActionMode::ThreeD).unwrap();
        assert_eq!(&s[145..], &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn round_trip() {
        let flows: Vec<f64> = (0..144).map(|i| (i % 7) as f64).collect();
        let t = TollProfile::new(3.37, 451.2, 61.9);
        let s = encode_state(&flows, 144, 750, 1.15, &t, ActionMode::ThreeD).unwrap();
        let back = decode_params(&s, ActionMode::ThreeD, &TollProfile::zero()).unwrap();
        assert!((back.amplitude - t.amplitude).abs() < 1e-12);
        assert!((back.center - t.center).abs() < 1e-12);
        assert!((back.width - t.width).abs() < 1e-12);
    }
}
