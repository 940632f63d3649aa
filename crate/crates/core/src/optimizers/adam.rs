use serde::{Deserialize, Serialize};

use crate::autodiff::ParamVector;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub lr: f64,
    pub params: AdamParams,
    m: Vec<f64>,
    v: Vec<f64>,
    step_count: usize,
}

impl AdamState {
    pub fn new(lr: f64, params: AdamParams) -> Self {
        Self {
            lr,
            params,
            m: Vec::new(),
            v: Vec::new(),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn step(&mut self, theta: &ParamVector, grad: &ParamVector, iteration: usize) -> Result<ParamVector> {
        theta.check_layout(grad)?;
        if !grad.is_finite() {
            return Err(Error::NonFiniteGradient { iteration });
        }
        if self.m.is_empty() {
            self.m = vec![0.0; theta.len()];
            self.v = vec![0.0; theta.len()];
        }
        self.step_count += 1;
        let AdamParams { beta1, beta2, eps } = self.params;
        let t = self.step_count as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let mut out = theta.as_slice().to_vec();
        for (i, (&g, x)) in grad.as_slice().iter().zip(out.iter_mut()).enumerate() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            *x -= self.lr * m_hat / (v_hat.sqrt() + eps);
        }
        theta.with_data(out)
    }
}
