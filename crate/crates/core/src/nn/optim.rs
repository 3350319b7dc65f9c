use serde::{Deserialize, Serialize};

use super::params::{Grads, Params};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 0.01, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..AdamConfig::default() }
    }
}

/// Adaptive-moment optimizer state for one parameter container.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    pub first: Vec<Tensor>,
    pub second: Vec<Tensor>,
}

impl Adam {
    pub fn new<P: Params + ?Sized>(params: &P, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor> = params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        Adam { config, step: 0, first: zeros.clone(), second: zeros }
    }

    /// Applies one bias-corrected update in place.
    pub fn apply<P: Params + ?Sized>(&mut self, params: &mut P, grads: &Grads) -> Result<()> {
        grads.check_congruent(params)?;
        if self.first.len() != grads.tensors().len()
            || self.first.iter().zip(grads.tensors()).any(|(m, g)| m.shape() != g.shape())
        {
            return Err(Error::dim("optimizer state is not congruent with parameters"));
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powf(self.step as f64);
        let bc2 = 1.0 - beta2.powf(self.step as f64);
        let mut ps = params.tensors_mut();
        for (k, g) in grads.tensors().iter().enumerate() {
            let p = ps[k].data_mut();
            let m = self.first[k].data_mut();
            let v = self.second[k].data_mut();
            for (j, &gj) in g.data().iter().enumerate() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
                v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
