//! Latent/exploration noise processes.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian { mu: f64, sigma: f64 },
    OrnsteinUhlenbeck { theta: f64, sigma: f64 },
}

impl Default for NoiseKind {
    fn default() -> Self {
        NoiseKind::Gaussian { mu: 0.0, sigma: 0.3 }
    }
}

impl NoiseKind {
    pub fn ornstein_uhlenbeck() -> Self {
        NoiseKind::OrnsteinUhlenbeck { theta: 0.15, sigma: 0.2 }
    }
}

/// Vector-valued noise with per-episode state.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseProcess {
    kind: NoiseKind,
    dim: usize,
    state: Vec<f64>,
}

impl NoiseProcess {
    pub fn new(kind: NoiseKind, dim: usize) -> Self {
        Self { kind, dim, state: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Next draw; `dt` is the environment step used by the OU discretization.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R, dt: f64) -> Vec<f64> {
        match self.kind {
            NoiseKind::Gaussian { mu, sigma } => (0..self.dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    mu + sigma * z
                })
                .collect(),
            NoiseKind::OrnsteinUhlenbeck { theta, sigma } => {
                for x in &mut self.state {
                    let z: f64 = StandardNormal.sample(rng);
                    *x += -theta * *x * dt + sigma * dt.sqrt() * z;
                }
                self.state.clone()
            }
        }
    }
}
