use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        Self { lr, beta1, beta2, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize, config: AdamConfig) -> Self {
        Self { config, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// One bias-corrected Adam step. Entries flagged in `nonneg` are clamped
    /// to zero from below afterwards.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], nonneg: Option<&[bool]>) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(NnError::Shape(format!("adam over {} params got {}/{}", self.m.len(), params.len(), grad.len())));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(NnError::NonFinite(format!("gradient entry {i}")));
        }
        let c = self.config;
        self.t += 1;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * grad[i];
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= c.lr * mh / (vh.sqrt() + c.eps);
        }
        if let Some(mask) = nonneg {
            for (p, &m) in params.iter_mut().zip(mask) {
                if m && *p < 0.0 {
                    *p = 0.0;
                }
            }
        }
        Ok(())
    }
}
