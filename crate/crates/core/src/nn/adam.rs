//! Adam optimizer with bias correction.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::TensorTable;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.005,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    moments: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    /// Applies one update to every named parameter in `grads`.
    pub fn update(&mut self, params: &mut TensorTable, grads: &[(String, Vec<f64>)]) -> Result<()> {
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        self.step += 1;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (name, g) in grads {
            let mut p = params.require(name)?.clone();
            if p.numel() != g.len() {
                return Err(Error::ShapeMismatch(format!(
                    "gradient for {name} has {} elements, parameter has {}",
                    g.len(),
                    p.numel()
                )));
            }
            let (m, v) = self
                .moments
                .entry(name.clone())
                .or_insert_with(|| (vec![0.0; g.len()], vec![0.0; g.len()]));
            for i in 0..g.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                p.data[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
            params.insert(name.clone(), p);
        }
        Ok(())
    }
}
