use serde::{Deserialize, Serialize};

use super::{NeuralError, ParamSet, Tensor};

/// Adam with bias correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Adam {
    pub fn with_lr(lr: f64) -> Self {
        Adam { lr, ..Adam::default() }
    }

    /// One update of every parameter; `grads[i]` pairs with `params.params[i]`.
    pub fn step(&self, params: &mut ParamSet, grads: &[Tensor]) -> Result<(), NeuralError> {
        if grads.len() != params.params.len() {
            return Err(NeuralError::Shape(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.params.len()
            )));
        }
        for (p, g) in params.params.iter().zip(grads) {
            if p.value.len() != g.len() {
                return Err(NeuralError::Shape(format!("gradient for `{}`", p.name)));
            }
        }
        params.step += 1;
        let t = params.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (p, g) in params.params.iter_mut().zip(grads) {
            for i in 0..g.data.len() {
                let gi = g.data[i];
                p.m.data[i] = self.beta1 * p.m.data[i] + (1.0 - self.beta1) * gi;
                p.v.data[i] = self.beta2 * p.v.data[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = p.m.data[i] / c1;
                let v_hat = p.v.data[i] / c2;
                p.value.data[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
