//! Adam updates and the cosine learning-rate schedule.

use std::collections::HashMap;

use crate::error::Result;
use crate::model::ModelState;
use crate::tensor::{Gradients, Tensor};

/// Cosine annealing: `lr_min + 0.5 (lr_init - lr_min)(1 + cos(pi t / total))`.
/// Hits `lr_init` at `t = 0` and `lr_min` at `t = total`.
pub fn cosine_lr(t: usize, total: usize, lr_init: f64, lr_min: f64) -> f64 {
    if total == 0 {
        return lr_init;
    }
    let phase = std::f64::consts::PI * t as f64 / total as f64;
    lr_min + 0.5 * (lr_init - lr_min) * (1.0 + phase.cos())
}

/// Adam with bias correction; moment state keyed by parameter name.
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    moments: HashMap<String, (Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new() -> Adam {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            moments: HashMap::new(),
        }
    }

    /// One update over every model parameter; returns the stepped model.
    pub fn step(&mut self, model: &ModelState, grads: &Gradients, lr: f64) -> Result<ModelState> {
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let bias1 = 1.0 - b1.powi(t);
        let bias2 = 1.0 - b2.powi(t);
        model.map(&mut |name, p| {
            let g = grads.for_param(p);
            let (m, v) = self
                .moments
                .entry(name.to_string())
                .or_insert_with(|| (vec![0.0; p.len()], vec![0.0; p.len()]));
            let mut data = p.data().to_vec();
            for i in 0..data.len() {
                let gi = g.data()[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                data[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            Tensor::param(data, p.shape())
        })
    }
}

impl Default for Adam {
    fn default() -> Self {
        Adam::new()
    }
}
