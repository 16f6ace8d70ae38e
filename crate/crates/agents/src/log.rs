use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: u64,
    pub name: String,
    pub value: f64,
}

/// Averages loss values over windows of `every` updates.
#[derive(Debug, Clone, Default)]
pub struct LossLog {
    every: u64,
    pending: BTreeMap<String, (f64, u64)>,
    updates: u64,
    pub records: Vec<LossRecord>,
}

impl LossLog {
    pub fn new(every: u64) -> Self {
        Self { every: every.max(1), ..Self::default() }
    }

    pub fn add(&mut self, name: &str, value: f64) {
        let e = self.pending.entry(name.to_string()).or_insert((0.0, 0));
        e.0 += value;
        e.1 += 1;
    }

    /// Marks the end of one update; flushes window means at `step`.
    pub fn end_update(&mut self, step: u64) {
        self.updates += 1;
        if self.updates % self.every == 0 {
            self.flush(step);
        }
    }

    pub fn flush(&mut self, step: u64) {
        for (name, (sum, n)) in std::mem::take(&mut self.pending) {
            if n > 0 {
                self.records.push(LossRecord { step, name, value: sum / n as f64 });
            }
        }
    }
}
