use rand::Rng;
use serde::{Deserialize, Serialize};

/// One step of a forward-actor rollout, in feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatiTransition {
    pub s_hat: [f64; 2],
    pub a_hat: Vec<f64>,
    pub a_star: Vec<f64>,
    pub r: f64,
    pub eta: Vec<f64>,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdpgTransition {
    pub s_hat: [f64; 2],
    pub a_hat: Vec<f64>,
    pub r: f64,
    pub s_next: [f64; 2],
    pub t: f64,
    pub t_next: f64,
    pub done: bool,
}

/// Unbounded buffer with uniform sampling (with replacement).
#[derive(Debug, Clone, Default)]
pub struct ReplayBuffer<T> {
    items: Vec<T>,
}

impl<T> ReplayBuffer<T> {
    pub fn new() -> Self {
        Self { items: Vec::new() }
    }

    pub fn push(&mut self, item: T) {
        self.items.push(item);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn sample<'a, R: Rng + ?Sized>(&'a self, rng: &mut R, batch: usize) -> Vec<&'a T> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..batch).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect()
    }
}
