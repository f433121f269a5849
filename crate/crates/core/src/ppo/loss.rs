//! PPO loss with optional action-smoothness penalties, and its exact gradient.
//!
//! The minimized loss over a mini-batch of `n` samples is
//!
//! ```text
//! -mean_i min(r_i A_i, clip(r_i, 1-ε, 1+ε) A_i) - c_ent H + c_v mean_i (V_i - R_i)^2 + λ_T L_T + λ_S L_S
//! ```
//!
//! where the smoothness terms are distances between action means at paired
//! states and only the one selected by [`CapsMode`] is active.

use rand::Rng;
use rand_distr::StandardNormal;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

use super::gaussian::{entropy, log_prob};
use super::network::{Activations, PolicyParams};
use crate::error::{Error, Result};

/// Which smoothness penalty is active and with which norm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum CapsMode {
    #[default]
    None,
    /// Temporal, L1 distance between consecutive-state action means.
    TL1,
    /// Temporal, L2 distance.
    TL2,
    /// Spatial, L1 distance to the action mean at a perturbed state.
    SL1,
    /// Spatial, L2 distance.
    SL2,
}

impl CapsMode {
    pub const ALL: [CapsMode; 5] = [CapsMode::None, CapsMode::TL1, CapsMode::TL2, CapsMode::SL1, CapsMode::SL2];

    pub fn norm(self) -> Norm {
        match self {
            CapsMode::TL1 | CapsMode::SL1 => Norm::L1,
            _ => Norm::L2,
        }
    }

    pub fn temporal(self) -> bool {
        matches!(self, CapsMode::TL1 | CapsMode::TL2)
    }

    pub fn spatial(self) -> bool {
        matches!(self, CapsMode::SL1 | CapsMode::SL2)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CapsMode::None => "none",
            CapsMode::TL1 => "t_l1",
            CapsMode::TL2 => "t_l2",
            CapsMode::SL1 => "s_l1",
            CapsMode::SL2 => "s_l2",
        }
    }
}

impl FromStr for CapsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CapsMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown caps mode `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

/// Distance between two action vectors.
pub fn distance(a: &[f64], b: &[f64], norm: Norm) -> f64 {
    let diffs = a.iter().zip(b).map(|(x, y)| x - y);
    match norm {
        Norm::L1 => diffs.map(f64::abs).sum(),
        Norm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
    }
}

/// Gradient of [`distance`] with respect to `a` (the gradient with respect to
/// `b` is its negation). Zero at `a == b`.
fn distance_grad(a: &[f64], b: &[f64], norm: Norm) -> Vec<f64> {
    match norm {
        Norm::L1 => a
            .iter()
            .zip(b)
            .map(|(x, y)| {
                let d = x - y;
                if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            })
            .collect(),
        Norm::L2 => {
            let r = distance(a, b, Norm::L2);
            if r == 0.0 {
                vec![0.0; a.len()]
            } else {
                a.iter().zip(b).map(|(x, y)| (x - y) / r).collect()
            }
        }
    }
}

/// `min(r A, clip(r, 1-ε, 1+ε) A)` with `r = exp(logp_new - logp_old)`.
pub fn clipped_surrogate(logp_new: f64, logp_old: f64, advantage: f64, clip: f64) -> f64 {
    let r = (logp_new - logp_old).exp();
    (r * advantage).min(r.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// Derivative of [`clipped_surrogate`] with respect to `logp_new`; exactly zero in the clipped regime.
pub fn clipped_surrogate_grad(logp_new: f64, logp_old: f64, advantage: f64, clip: f64) -> f64 {
    let r = (logp_new - logp_old).exp();
    let clipped = (advantage > 0.0 && r > 1.0 + clip) || (advantage < 0.0 && r < 1.0 - clip);
    if clipped {
        0.0
    } else {
        r * advantage
    }
}

/// Loss coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    pub clip_range: f64,
    pub ent_coef: f64,
    pub vf_coef: f64,
    pub caps_mode: CapsMode,
    pub lambda_t: f64,
    pub lambda_s: f64,
}

/// A mini-batch in row-major flat arrays.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossBatch {
    pub obs: Vec<f64>,
    /// State following each observation in the same trajectory.
    pub next_obs: Vec<f64>,
    /// Noisy copy of each observation for the spatial penalty.
    pub perturbed_obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub logp_old: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl LossBatch {
    pub fn len(&self) -> usize {
        self.logp_old.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logp_old.is_empty()
    }
}

/// Loss value and its components for one mini-batch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossTerms {
    pub total: f64,
    /// Mean clipped surrogate (to be maximized).
    pub surrogate: f64,
    pub entropy: f64,
    pub value_loss: f64,
    pub l_t: f64,
    pub l_s: f64,
    /// `mean(logp_old - logp_new)`.
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Adds `σ̃ z` to every coordinate of every state.
pub fn perturb_states<R: Rng + ?Sized>(states: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    states
        .iter()
        .map(|s| {
            let z: f64 = rng.sample(StandardNormal);
            s + sigma * z
        })
        .collect()
}

/// Mean temporal and spatial distances of action means, both under `norm`.
pub fn caps_penalties(params: &PolicyParams, states: &[f64], next: &[f64], perturbed: &[f64], norm: Norm) -> (f64, f64) {
    let d = params.layout.input;
    let n = states.len() / d;
    if n == 0 {
        return (0.0, 0.0);
    }
    let layout = params.layout;
    let (mut a, mut b, mut c) = (Activations::new(&layout), Activations::new(&layout), Activations::new(&layout));
    let (mut lt, mut ls) = (0.0, 0.0);
    for i in 0..n {
        params.forward_into(&states[i * d..(i + 1) * d], &mut a);
        params.forward_into(&next[i * d..(i + 1) * d], &mut b);
        params.forward_into(&perturbed[i * d..(i + 1) * d], &mut c);
        lt += distance(&a.mean, &b.mean, norm);
        ls += distance(&a.mean, &c.mean, norm);
    }
    (lt / n as f64, ls / n as f64)
}

/// Evaluates the loss and, if `grad` is given, overwrites it with the exact gradient.
pub fn loss_and_grad(params: &PolicyParams, batch: &LossBatch, cfg: &LossConfig, mut grad: Option<&mut [f64]>) -> LossTerms {
    let layout = params.layout;
    let (d, k) = (layout.input, layout.action);
    let n = batch.len();
    let nf = n as f64;
    let log_std = params.log_std().to_vec();
    let inv_var: Vec<f64> = log_std.iter().map(|s| (-2.0 * s).exp()).collect();
    if let Some(g) = grad.as_deref_mut() {
        g.fill(0.0);
    }
    let ls_off = layout.log_std_offset();
    let norm = cfg.caps_mode.norm();

    let mut act = Activations::new(&layout);
    let mut other = Activations::new(&layout);
    let mut terms = LossTerms::default();
    let mut d_mean = vec![0.0; k];
    let mut d_log_std = vec![0.0; k];

    for i in 0..n {
        let x = &batch.obs[i * d..(i + 1) * d];
        let a = &batch.actions[i * k..(i + 1) * k];
        params.forward_into(x, &mut act);
        let lp = log_prob(a, &act.mean, &log_std);
        let (lp_old, adv) = (batch.logp_old[i], batch.advantages[i]);
        terms.surrogate += clipped_surrogate(lp, lp_old, adv, cfg.clip_range);
        terms.approx_kl += lp_old - lp;
        let ratio = (lp - lp_old).exp();
        if (ratio - 1.0).abs() > cfg.clip_range {
            terms.clip_fraction += 1.0;
        }
        let verr = act.value - batch.returns[i];
        terms.value_loss += verr * verr;

        let dsurr = clipped_surrogate_grad(lp, lp_old, adv, cfg.clip_range);
        // d total / d logp = -dsurr / n
        let dlp = -dsurr / nf;
        for j in 0..k {
            let diff = a[j] - act.mean[j];
            d_mean[j] = dlp * diff * inv_var[j];
            d_log_std[j] = dlp * (diff * diff * inv_var[j] - 1.0);
        }
        let d_value = cfg.vf_coef * 2.0 * verr / nf;

        // Smoothness terms pair this state with its successor or a noisy copy.
        let caps = [
            (cfg.caps_mode.temporal(), &batch.next_obs, cfg.lambda_t, 0usize),
            (cfg.caps_mode.spatial(), &batch.perturbed_obs, cfg.lambda_s, 1usize),
        ];
        for (active, partners, weight, slot) in caps {
            if partners.is_empty() {
                continue;
            }
            let y = &partners[i * d..(i + 1) * d];
            params.forward_into(y, &mut other);
            let dist = distance(&act.mean, &other.mean, norm);
            if slot == 0 {
                terms.l_t += dist;
            } else {
                terms.l_s += dist;
            }
            if active && weight != 0.0 {
                if let Some(g) = grad.as_deref_mut() {
                    let dd = distance_grad(&act.mean, &other.mean, norm);
                    let scale = weight / nf;
                    for j in 0..k {
                        d_mean[j] += scale * dd[j];
                    }
                    let neg: Vec<f64> = dd.iter().map(|v| -scale * v).collect();
                    params.backward(y, &other, &neg, 0.0, g);
                }
            }
        }

        if let Some(g) = grad.as_deref_mut() {
            params.backward(x, &act, &d_mean, d_value, g);
            for j in 0..k {
                g[ls_off + j] += d_log_std[j];
            }
        }
    }

    terms.surrogate /= nf;
    terms.approx_kl /= nf;
    terms.clip_fraction /= nf;
    terms.value_loss /= nf;
    terms.l_t /= nf;
    terms.l_s /= nf;
    terms.entropy = entropy(&log_std);
    terms.total = -terms.surrogate - cfg.ent_coef * terms.entropy + cfg.vf_coef * terms.value_loss;
    if cfg.caps_mode.temporal() {
        terms.total += cfg.lambda_t * terms.l_t;
    }
    if cfg.caps_mode.spatial() {
        terms.total += cfg.lambda_s * terms.l_s;
    }
    if let Some(g) = grad {
        for j in 0..k {
            g[ls_off + j] -= cfg.ent_coef;
        }
    }
    terms
}
