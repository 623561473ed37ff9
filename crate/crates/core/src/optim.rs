//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// L2 penalty added to the gradient; off by default.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, weight_decay: 0.0 }
    }
}

/// Optimizer state: one first- and second-moment tensor per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<S = f32> {
    config: AdamConfig,
    first: Vec<Tensor<S>>,
    second: Vec<Tensor<S>>,
    step: u64,
}

impl<S: Scalar> Adam<S> {
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Tensor<S>>) -> Self {
        let first: Vec<Tensor<S>> = params.into_iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect();
        Self { config, second: first.clone(), first, step: 0 }
    }

    /// Rebuilds saved state; moment tensors must pair up by shape.
    pub fn from_parts(config: AdamConfig, first: Vec<Tensor<S>>, second: Vec<Tensor<S>>, step: u64) -> Result<Self> {
        if first.len() != second.len() || first.iter().zip(&second).any(|(a, b)| a.shape() != b.shape()) {
            return Err(Error::Optimizer("moment tensors do not pair up".into()));
        }
        Ok(Self { config, first, second, step })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor<S>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor<S>] {
        &self.second
    }

    /// One update of every parameter. Nothing is modified if any gradient
    /// is non-finite or mis-shaped.
    pub fn step(&mut self, params: &mut [&mut Tensor<S>], grads: &[Tensor<S>]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::Optimizer(format!(
                "{} params and {} grads for {} state slots",
                params.len(),
                grads.len(),
                self.first.len()
            )));
        }
        for (i, ((p, g), m)) in params.iter().zip(grads).zip(&self.first).enumerate() {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::Optimizer(format!(
                    "slot {i}: param {:?}, grad {:?}, state {:?}",
                    p.shape(),
                    g.shape(),
                    m.shape()
                )));
            }
            if !g.all_finite() {
                return Err(Error::NonFinite(format!("gradient of parameter slot {i}")));
            }
        }

        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let b1 = S::lit(c.beta1);
        let b2 = S::lit(c.beta2);
        let one = S::one();
        let correct1 = S::lit(1.0 - c.beta1.powi(t));
        let correct2 = S::lit(1.0 - c.beta2.powi(t));
        let lr = S::lit(c.learning_rate);
        let eps = S::lit(c.epsilon);
        let wd = S::lit(c.weight_decay);

        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
            let pd = p.data_mut();
            for (((w, &g), m), v) in pd.iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                let g = g + wd * *w;
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / correct1;
                let v_hat = *v / correct2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
