//! AdamW with decoupled weight decay.
//!
//! The decay term is applied directly to the parameters rather than folded
//! into the gradient:
//!
//! ```text
//! m <- b1 m + (1-b1) g        m_hat = m / (1 - b1^t)
//! v <- b2 v + (1-b2) g^2      v_hat = v / (1 - b2^t)
//! p <- p - lr (m_hat / (sqrt(v_hat) + eps) + wd p)
//! ```

use crate::error::{Error, Result};
use crate::nn::{Model, Param};
use crate::tensor::Tensor;

/// AdamW hyperparameters. Only the learning rate has a canonical value for
/// this experiment (0.001); the rest are the usual defaults and all of them
/// are configurable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamWConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
    pub weight_decay: f32,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.004,
        }
    }
}

/// First and second moment estimates for one parameter tensor.
#[derive(Clone, Debug)]
pub struct Moments {
    pub m: Tensor,
    pub v: Tensor,
}

/// Optimizer state: per-parameter moments plus the shared step counter.
#[derive(Clone, Debug)]
pub struct AdamW {
    cfg: AdamWConfig,
    t: u64,
    moments: Vec<Moments>,
}

impl AdamW {
    /// Fresh state with zero moments, one slot per parameter.
    pub fn new(params: &[Param], cfg: AdamWConfig) -> Self {
        let moments = params
            .iter()
            .map(|p| Moments {
                m: Tensor::zeros(p.value.shape()),
                v: Tensor::zeros(p.value.shape()),
            })
            .collect();
        AdamW { cfg, t: 0, moments }
    }

    /// Rebuild from checkpointed state.
    pub fn restore(cfg: AdamWConfig, t: u64, moments: Vec<Moments>) -> Self {
        AdamW { cfg, t, moments }
    }

    pub fn config(&self) -> &AdamWConfig {
        &self.cfg
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn moments(&self) -> &[Moments] {
        &self.moments
    }

    /// One update over all parameters. If any gradient element is not
    /// finite the step is rejected before anything mutates.
    pub fn step(&mut self, params: &mut [Param]) -> Result<()> {
        if params.len() != self.moments.len() {
            return Err(Error::Contract(format!(
                "optimizer tracks {} parameters but the model has {}",
                self.moments.len(),
                params.len()
            )));
        }
        for (p, s) in params.iter().zip(&self.moments) {
            if !p.grad.is_finite() {
                return Err(Error::NonFiniteGrad(p.name.clone()));
            }
            if p.value.shape() != s.m.shape() {
                return Err(Error::Contract(format!(
                    "optimizer state shape {:?} does not match parameter '{}' {:?}",
                    s.m.shape(),
                    p.name,
                    p.value.shape()
                )));
            }
        }

        self.t += 1;
        let t = self.t as i32;
        let bias1 = 1.0 / (1.0 - (self.cfg.beta1 as f64).powi(t)) as f32;
        let bias2 = 1.0 / (1.0 - (self.cfg.beta2 as f64).powi(t)) as f32;
        let AdamWConfig {
            lr,
            beta1,
            beta2,
            epsilon,
            weight_decay,
        } = self.cfg;

        for (p, s) in params.iter_mut().zip(&mut self.moments) {
            let grads = p.grad.data();
            let values = p.value.data_mut();
            let m = s.m.data_mut();
            let v = s.v.data_mut();
            for i in 0..values.len() {
                let g = grads[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] * bias1;
                let v_hat = v[i] * bias2;
                values[i] -= lr * (m_hat / (v_hat.sqrt() + epsilon) + weight_decay * values[i]);
            }
        }
        Ok(())
    }
}

/// Clear every gradient buffer of the model.
pub fn zero_grads(model: &mut Model) {
    model.zero_grads();
}
