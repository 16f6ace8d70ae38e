//! Rollouts and evaluation shared by all agents.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use traji_core::seed::{stream_rng, Stream};
use traji_core::{State2, Trajectory, TrajectoryEnv};

use crate::error::Result;
use crate::task::Task;

/// Offset separating evaluation noise streams from training ones.
pub const EVAL_NOISE_BASE: u64 = 1 << 32;

/// Noise generator for evaluation rollout `index` of `seed`.
pub fn eval_rng(seed: u64, index: u64) -> ChaCha8Rng {
    stream_rng(seed, Stream::Noise, EVAL_NOISE_BASE + index)
}

/// Anything that picks a physical action from the current state and time.
pub trait Policy {
    /// Called at the start of each rollout.
    fn begin_episode(&mut self) {}

    fn act(&mut self, task: &Task, env: &TrajectoryEnv, rng: &mut ChaCha8Rng) -> Result<Vec<f64>>;
}

/// Replays the reference exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct PerfectPolicy;

impl Policy for PerfectPolicy {
    fn act(&mut self, _task: &Task, env: &TrajectoryEnv, _rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        Ok(env.expert_action()?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub trajectory: Trajectory,
    pub raw_dtw: f64,
    pub smoothed_dtw: f64,
    /// Smoothed DTW divided by the task diameter.
    pub normalized: f64,
    pub sticking_events: usize,
}

/// Rolls `policy` out against `reference`, starting on its first point.
pub fn rollout(task: &Task, policy: &mut dyn Policy, reference: Trajectory, rng: &mut ChaCha8Rng) -> Result<Rollout> {
    let mut env = task.make_env()?;
    let s0 = env.reset_with(reference);
    policy.begin_episode();
    let mut states: Vec<State2> = vec![s0];
    let mut times = vec![env.time()];
    let (mut raw, mut smoothed, mut normalized) = (0.0, 0.0, 0.0);
    while !env.is_done() {
        let a = policy.act(task, &env, rng)?;
        let step = env.step(&a)?;
        states.push(step.next_state);
        times.push(env.time());
        raw = step.info.raw_dtw;
        smoothed = step.info.smoothed_dtw;
        normalized = step.info.normalized;
    }
    Ok(Rollout {
        trajectory: Trajectory::new(states, times)?,
        raw_dtw: raw,
        smoothed_dtw: smoothed,
        normalized,
        sticking_events: env.sticking_events(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub seed: u64,
    pub ref_id: u64,
    /// Final smoothed DTW.
    pub dtw: f64,
    pub norm_dtw: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn best(&self) -> Option<f64> {
        self.rows.iter().map(|r| r.norm_dtw).min_by(f64::total_cmp)
    }

    /// Per-seed minima sorted ascending.
    pub fn per_seed_best(&self) -> Vec<(u64, f64)> {
        let mut seeds: Vec<u64> = self.rows.iter().map(|r| r.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        let mut out: Vec<(u64, f64)> = seeds
            .into_iter()
            .map(|s| {
                let b = self.rows.iter().filter(|r| r.seed == s).map(|r| r.norm_dtw).fold(f64::INFINITY, f64::min);
                (s, b)
            })
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1));
        out
    }

    /// Best and second-best per-seed minima.
    pub fn top2(&self) -> (Option<f64>, Option<f64>) {
        let v = self.per_seed_best();
        (v.first().map(|p| p.1), v.get(1).map(|p| p.1))
    }

    /// Whether any row is within `epsilon` (normalized) of its reference.
    pub fn any_representative(&self, epsilon: f64) -> bool {
        self.rows.iter().any(|r| r.norm_dtw < epsilon)
    }

    pub fn merge(&mut self, other: EvalReport) {
        self.rows.extend(other.rows);
    }
}

/// Rolls out on `n_refs` held-out references of the run seeded `seed`.
pub fn evaluate(task: &Task, policy: &mut dyn Policy, seed: u64, n_refs: u64) -> Result<EvalReport> {
    let mut rows = Vec::with_capacity(n_refs as usize);
    for i in 0..n_refs {
        let reference = task.source.eval(seed, i)?;
        let mut rng = eval_rng(seed, i);
        let r = rollout(task, policy, reference, &mut rng)?;
        rows.push(EvalRow { seed, ref_id: i, dtw: r.smoothed_dtw, norm_dtw: r.normalized });
    }
    Ok(EvalReport { rows })
}
