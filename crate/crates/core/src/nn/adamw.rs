use serde::{Deserialize, Serialize};

use super::{Gradients, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            learning_rate: 2e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Adam with decoupled weight decay.
///
/// Per parameter `p` with gradient `g` at step `t`:
///
/// ```text
/// m = β1·m + (1-β1)·g
/// v = β2·v + (1-β2)·g²
/// p = p - lr·( m/(1-β1^t) / (sqrt(v/(1-β2^t)) + ε) + wd·p )
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    pub config: AdamWConfig,
    pub step: u64,
    first: Gradients,
    second: Gradients,
}

impl AdamWState {
    pub fn new(config: AdamWConfig, mlp: &Mlp) -> Self {
        AdamWState {
            config,
            step: 0,
            first: Gradients::zeros_like(mlp),
            second: Gradients::zeros_like(mlp),
        }
    }

    /// Applies one update. Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, mlp: &mut Mlp, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != mlp.layers().len() || self.first.layers.len() != grads.layers.len() {
            return Err(Error::Invalid("gradient shape does not match network".into()));
        }
        for (i, (g, l)) in grads.layers.iter().zip(mlp.layers()).enumerate() {
            if g.weight.len() != l.weight.len() || g.bias.len() != l.bias.len() {
                return Err(Error::Invalid(format!("gradient shape mismatch at layer {i}")));
            }
            if let Some(j) = g.weight.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: format!("gradient of layer {i} weight[{j}]") });
            }
            if let Some(j) = g.bias.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: format!("gradient of layer {i} bias[{j}]") });
            }
        }

        self.step += 1;
        let AdamWConfig { learning_rate: lr, beta1, beta2, epsilon, weight_decay } = self.config;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let correction1 = 1.0 - beta1.powi(t);
        let correction2 = 1.0 - beta2.powi(t);

        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= lr * (m_hat / (v_hat.sqrt() + epsilon) + weight_decay * *p);
        };
        for (((layer, g), m), v) in mlp
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first.layers)
            .zip(&mut self.second.layers)
        {
            for (((p, &g), m), v) in layer.weight.iter_mut().zip(&g.weight).zip(&mut m.weight).zip(&mut v.weight) {
                update(p, g, m, v);
            }
            for (((p, &g), m), v) in layer.bias.iter_mut().zip(&g.bias).zip(&mut m.bias).zip(&mut v.bias) {
                update(p, g, m, v);
            }
        }
        Ok(())
    }
}
