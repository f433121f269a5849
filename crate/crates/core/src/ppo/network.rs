//! Shared-trunk actor-critic MLP stored as one flat parameter vector.
//!
//! `x -> tanh(W1 x + b1) -> tanh(W2 h1 + b2) -> { Wa h2 + ba (action mean), wv·h2 + bv (value) }`
//! plus a free per-dimension `log_std`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer sizes of the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub input: usize,
    pub hidden: usize,
    pub action: usize,
}

/// A named contiguous slice of the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl Layout {
    pub fn new(input: usize, hidden: usize, action: usize) -> Self {
        Self { input, hidden, action }
    }

    fn w1(&self) -> usize {
        0
    }
    fn b1(&self) -> usize {
        self.hidden * self.input
    }
    fn w2(&self) -> usize {
        self.b1() + self.hidden
    }
    fn b2(&self) -> usize {
        self.w2() + self.hidden * self.hidden
    }
    fn wa(&self) -> usize {
        self.b2() + self.hidden
    }
    fn ba(&self) -> usize {
        self.wa() + self.action * self.hidden
    }
    fn wv(&self) -> usize {
        self.ba() + self.action
    }
    fn bv(&self) -> usize {
        self.wv() + self.hidden
    }
    pub fn log_std_offset(&self) -> usize {
        self.bv() + 1
    }

    pub fn param_count(&self) -> usize {
        self.log_std_offset() + self.action
    }

    /// Named tensors in storage order.
    pub fn tensors(&self) -> Vec<Tensor> {
        let t = |name: &str, shape: Vec<usize>, offset| Tensor { name: name.to_string(), shape, offset };
        vec![
            t("trunk.0.weight", vec![self.hidden, self.input], self.w1()),
            t("trunk.0.bias", vec![self.hidden], self.b1()),
            t("trunk.1.weight", vec![self.hidden, self.hidden], self.w2()),
            t("trunk.1.bias", vec![self.hidden], self.b2()),
            t("actor.weight", vec![self.action, self.hidden], self.wa()),
            t("actor.bias", vec![self.action], self.ba()),
            t("critic.weight", vec![1, self.hidden], self.wv()),
            t("critic.bias", vec![1], self.bv()),
            t("log_std", vec![self.action], self.log_std_offset()),
        ]
    }
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Clone, Debug, Default)]
pub struct Activations {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub mean: Vec<f64>,
    pub value: f64,
}

impl Activations {
    pub fn new(layout: &Layout) -> Self {
        Self {
            h1: vec![0.0; layout.hidden],
            h2: vec![0.0; layout.hidden],
            mean: vec![0.0; layout.action],
            value: 0.0,
        }
    }
}

/// Policy and value parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub layout: Layout,
    pub values: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl PolicyParams {
    pub fn zeros(layout: Layout) -> Self {
        Self { layout, values: vec![0.0; layout.param_count()] }
    }

    /// Scaled-normal initialization: trunk gain √2, actor head gain 0.01,
    /// critic head gain 1, zero biases, constant `log_std`.
    pub fn init<R: Rng + ?Sized>(layout: Layout, init_log_std: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(layout);
        let mut fill = |values: &mut [f64], fan_in: usize, gain: f64| {
            let sd = gain / (fan_in as f64).sqrt();
            for v in values {
                let z: f64 = rng.sample(StandardNormal);
                *v = sd * z;
            }
        };
        let (h, i, a) = (layout.hidden, layout.input, layout.action);
        let sqrt2 = std::f64::consts::SQRT_2;
        fill(&mut p.values[layout.w1()..layout.w1() + h * i], i, sqrt2);
        fill(&mut p.values[layout.w2()..layout.w2() + h * h], h, sqrt2);
        fill(&mut p.values[layout.wa()..layout.wa() + a * h], h, 0.01);
        fill(&mut p.values[layout.wv()..layout.wv() + h], h, 1.0);
        p.log_std_mut().fill(init_log_std);
        p
    }

    pub fn from_values(layout: Layout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.param_count() {
            return Err(Error::Dimension { context: "policy parameters", expected: layout.param_count(), actual: values.len() });
        }
        Ok(Self { layout, values })
    }

    pub fn log_std(&self) -> &[f64] {
        let o = self.layout.log_std_offset();
        &self.values[o..o + self.layout.action]
    }

    pub fn log_std_mut(&mut self) -> &mut [f64] {
        let o = self.layout.log_std_offset();
        let a = self.layout.action;
        &mut self.values[o..o + a]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Forward pass into `act`.
    pub fn forward_into(&self, x: &[f64], act: &mut Activations) {
        let l = &self.layout;
        debug_assert_eq!(x.len(), l.input);
        let v = &self.values;
        for j in 0..l.hidden {
            let row = &v[l.w1() + j * l.input..l.w1() + (j + 1) * l.input];
            act.h1[j] = (dot(row, x) + v[l.b1() + j]).tanh();
        }
        for j in 0..l.hidden {
            let row = &v[l.w2() + j * l.hidden..l.w2() + (j + 1) * l.hidden];
            act.h2[j] = (dot(row, &act.h1) + v[l.b2() + j]).tanh();
        }
        for j in 0..l.action {
            let row = &v[l.wa() + j * l.hidden..l.wa() + (j + 1) * l.hidden];
            act.mean[j] = dot(row, &act.h2) + v[l.ba() + j];
        }
        act.value = dot(&v[l.wv()..l.wv() + l.hidden], &act.h2) + v[l.bv()];
    }

    /// Action mean and value for one state.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        if x.len() != self.layout.input {
            return Err(Error::Dimension { context: "network input", expected: self.layout.input, actual: x.len() });
        }
        let mut act = Activations::new(&self.layout);
        self.forward_into(x, &mut act);
        Ok((act.mean, act.value))
    }

    /// Accumulates into `grad` the gradient of a scalar whose partials with
    /// respect to the action mean and value are `d_mean` and `d_value`.
    /// `log_std` gradients are not touched.
    pub fn backward(&self, x: &[f64], act: &Activations, d_mean: &[f64], d_value: f64, grad: &mut [f64]) {
        let l = &self.layout;
        let v = &self.values;
        let mut d_h2 = vec![0.0; l.hidden];
        for j in 0..l.action {
            let dm = d_mean[j];
            if dm == 0.0 {
                continue;
            }
            grad[l.ba() + j] += dm;
            for k in 0..l.hidden {
                grad[l.wa() + j * l.hidden + k] += dm * act.h2[k];
                d_h2[k] += dm * v[l.wa() + j * l.hidden + k];
            }
        }
        if d_value != 0.0 {
            grad[l.bv()] += d_value;
            for k in 0..l.hidden {
                grad[l.wv() + k] += d_value * act.h2[k];
                d_h2[k] += d_value * v[l.wv() + k];
            }
        }
        let mut d_h1 = vec![0.0; l.hidden];
        for j in 0..l.hidden {
            let dz = d_h2[j] * (1.0 - act.h2[j] * act.h2[j]);
            if dz == 0.0 {
                continue;
            }
            grad[l.b2() + j] += dz;
            for k in 0..l.hidden {
                grad[l.w2() + j * l.hidden + k] += dz * act.h1[k];
                d_h1[k] += dz * v[l.w2() + j * l.hidden + k];
            }
        }
        for j in 0..l.hidden {
            let dz = d_h1[j] * (1.0 - act.h1[j] * act.h1[j]);
            if dz == 0.0 {
                continue;
            }
            grad[l.b1() + j] += dz;
            let row = &mut grad[l.w1() + j * l.input..l.w1() + (j + 1) * l.input];
            for (g, xi) in row.iter_mut().zip(x) {
                *g += dz * xi;
            }
        }
    }

    /// Product of the spectral-norm upper bounds (Frobenius norms) of the
    /// actor path, a Lipschitz constant of the action mean in the input.
    pub fn actor_lipschitz_bound(&self) -> f64 {
        let l = &self.layout;
        let v = &self.values;
        let fro = |range: std::ops::Range<usize>| v[range].iter().map(|x| x * x).sum::<f64>().sqrt();
        fro(l.w1()..l.b1()) * fro(l.w2()..l.b2()) * fro(l.wa()..l.ba())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_counts() {
        let l = Layout::new(146, 8, 1);
        assert_eq!(l.param_count(), 146 * 8 + 8 + 64 + 8 + 8 + 1 + 8 + 1 + 1);
        let tensors = l.tensors();
        let total: usize = tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
        assert_eq!(total, l.param_count());
        for w in tensors.windows(2) {
            assert_eq!(w[0].offset + w[0].shape.iter().product::<usize>(), w[1].offset);
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = PolicyParams::zeros(Layout::new(5, 8, 3));
        let (mean, value) = p.forward(&[1.0, -2.0, 0.5, 3.0, 0.0]).unwrap();
        assert_eq!(mean, vec![0.0; 3]);
        assert_eq!(value, 0.0);
    }

    #[test]
    fn hand_computed_single_unit() {
        let l = Layout::new(1, 1, 1);
        // w1 b1 w2 b2 wa ba wv bv log_std
        let p = PolicyParams::from_values(l, vec![0.5, 0.1, 2.0, -0.3, 1.5, 0.2, -1.0, 0.4, -1.0]).unwrap();
        let x = 0.8f64;
        let h1 = (0.5 * x + 0.1).tanh();
        let h2 = (2.0 * h1 - 0.3).tanh();
        let (mean, value) = p.forward(&[x]).unwrap();
        assert_eq!(mean[0], 1.5 * h2 + 0.2);
        assert_eq!(value, -h2 + 0.4);
    }

    #[test]
    fn perturbation_respects_lipschitz_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = PolicyParams::init(Layout::new(6, 8, 2), -1.0, &mut rng);
        let x: Vec<f64> = (0..6).map(|i| 0.1 * i as f64).collect();
        let bound = p.actor_lipschitz_bound();
        for i in 0..6 {
            let mut y = x.clone();
            y[i] += 1e-3;
            let (a, _) = p.forward(&x).unwrap();
            let (b, _) = p.forward(&y).unwrap();
            let d = a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            assert!(d <= bound * 1e-3 + 1e-15);
        }
    }

    #[test]
    fn wrong_input_rejected() {
        let p = PolicyParams::zeros(Layout::new(3, 2, 1));
        assert!(p.forward(&[1.0]).is_err());
    }
}
