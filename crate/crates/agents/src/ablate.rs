//! Layer ablations of the adversarial agent.

use serde::{Deserialize, Serialize};

use crate::dati::{train_dati, CheckpointPolicy, DatiConfig};
use crate::error::Result;
use crate::policy::{evaluate, EvalReport};
use crate::task::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Original,
    /// No time slot in any network.
    NoTimeEmbedding,
    /// No reward slot in the critics.
    NoRewardReinforcement,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::NoTimeEmbedding => "no_time_embedding",
            Variant::NoRewardReinforcement => "no_reward_reinforcement",
        }
    }

    pub fn apply(self, base: &DatiConfig) -> DatiConfig {
        let mut c = base.clone();
        match self {
            Variant::Original => {}
            Variant::NoTimeEmbedding => c.use_time = false,
            Variant::NoRewardReinforcement => c.use_reward = false,
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub variant: Variant,
    pub top1: Option<f64>,
    pub top2: Option<f64>,
    pub report: EvalReport,
}

/// Trains and evaluates `variant` once per seed; top-1/top-2 are the best
/// two per-seed minima.
pub fn ablate(task: &Task, base: &DatiConfig, variant: Variant, seeds: &[u64], n_refs: u64) -> Result<AblationResult> {
    let config = variant.apply(base);
    let mut report = EvalReport::default();
    for &seed in seeds {
        let out = train_dati(task, config.clone(), seed, &CheckpointPolicy::default())?;
        report.merge(evaluate(task, &mut out.agent.policy(), seed, n_refs)?);
    }
    let (top1, top2) = report.top2();
    Ok(AblationResult { variant, top1, top2, report })
}
