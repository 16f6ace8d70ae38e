//! Behavioral cloning with a diagonal Gaussian policy head.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use traji_core::seed::{stream_rng, Stream};
use traji_core::TrajectoryEnv;
use traji_nn::{Activation, AdamConfig, Graph, SlotSpec, Var};

use crate::codec::Codec;
use crate::error::{AgentError, Result};
use crate::log::LossRecord;
use crate::nets::{forward_named, mlp, rows, Trainable, HIDDEN};
use crate::policy::Policy;
use crate::task::Task;

const STATE: &str = "state";
const MIN_STD: f64 = 1e-4;
const HALF_LOG_TWO_PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcConfig {
    /// Training references the demonstrations are drawn from.
    pub episodes: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub entropy_weight: f64,
    pub extractor_width: usize,
    pub hidden: Vec<usize>,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self { episodes: 100, epochs: 20, batch_size: 64, lr: 1e-3, entropy_weight: 1e-3, extractor_width: 156, hidden: HIDDEN.to_vec() }
    }
}

/// One expert (state, action) pair in feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demo {
    pub s: [f64; 2],
    pub a: Vec<f64>,
}

/// Perfect-policy demonstrations over the first `episodes` training references.
pub fn collect_demos(task: &Task, seed: u64, episodes: u64) -> Result<Vec<Demo>> {
    let mut demos = Vec::new();
    for ep in 0..episodes {
        let r = task.source.train(seed, ep)?;
        for i in 0..r.n_steps() {
            let a = task.kinematics.perfect_action(r.states[i], r.states[i + 1], r.dt(i));
            demos.push(Demo { s: task.codec.encode_state(r.states[i]), a: task.codec.encode_action(&a) });
        }
    }
    Ok(demos)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcAgent {
    pub config: BcConfig,
    pub codec: Codec,
    pub policy_net: Trainable,
}

/// Graph nodes of the Gaussian head for a batch of states.
pub struct GaussianHead {
    pub mean: Var,
    pub std: Var,
}

impl BcAgent {
    pub fn new(task: &Task, config: BcConfig, seed: u64) -> Result<Self> {
        if config.epochs == 0 || config.batch_size == 0 || !(config.lr > 0.0) {
            return Err(AgentError::Config("epochs, batch_size and lr must be positive".into()));
        }
        let ad = task.action_dim();
        let net = mlp(vec![SlotSpec::dense(STATE, task.state_dim(), config.extractor_width)], &config.hidden, 2 * ad, Activation::Identity)?;
        let policy_net = Trainable::new(net, &mut stream_rng(seed, Stream::Init, 0), &[AdamConfig::new(config.lr, 0.9, 0.999)]);
        Ok(Self { config, codec: task.codec.clone(), policy_net })
    }

    pub fn head(&self, g: &mut Graph, b: &traji_nn::BoundParams, s: Var) -> Result<GaussianHead> {
        let ad = self.codec.action_dim();
        let z = forward_named(&self.policy_net.net, g, b, &[(STATE, s)])?;
        let zm = g.slice(z, 0, ad)?;
        let mean = self.codec.action_head(g, zm)?;
        let zs = g.slice(z, ad, ad)?;
        let sp = g.softplus(zs);
        let std = g.add_scalar(sp, MIN_STD);
        Ok(GaussianHead { mean, std })
    }

    /// Mean negative log-likelihood and mean entropy of `a` under the head.
    pub fn nll_and_entropy(&self, g: &mut Graph, head: &GaussianHead, a: Var) -> Result<(Var, Var)> {
        let n = g.shape(a).0 as f64;
        let d = g.shape(a).1 as f64;
        let diff = self.codec.action_diff(g, a, head.mean)?;
        let z = g.recip(head.std);
        let z = g.mul(diff, z)?;
        let z2 = g.square(z);
        let quad = g.sum(z2);
        let quad = g.scale(quad, 0.5);
        let log_std = g.log(head.std);
        let log_std = g.sum(log_std);
        let nll = g.add(quad, log_std)?;
        let nll = g.scale(nll, 1.0 / n);
        let nll = g.add_scalar(nll, d * HALF_LOG_TWO_PI);
        // Diagonal Gaussian entropy: sum_j (0.5 log(2 pi e) + log sigma_j).
        let ent = g.scale(log_std, 1.0 / n);
        let ent = g.add_scalar(ent, d * (HALF_LOG_TWO_PI + 0.5));
        Ok((nll, ent))
    }

    /// Mean action features for one state.
    pub fn act_features(&self, s_feat: [f64; 2]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let b = self.policy_net.net.bind_const(&mut g, &self.policy_net.params)?;
        let s = g.constant(rows(2, [&s_feat[..]]));
        let h = self.head(&mut g, &b, s)?;
        Ok(g.value(h.mean).row(0).to_vec())
    }

    /// Mean log-likelihood of the demos (in feature space).
    pub fn mean_log_likelihood(&self, demos: &[Demo]) -> Result<f64> {
        let mut g = Graph::new();
        let b = self.policy_net.net.bind_const(&mut g, &self.policy_net.params)?;
        let s = g.constant(rows(2, demos.iter().map(|d| &d.s[..])));
        let a = g.constant(rows(self.codec.action_dim(), demos.iter().map(|d| &d.a[..])));
        let h = self.head(&mut g, &b, s)?;
        let (nll, _) = self.nll_and_entropy(&mut g, &h, a)?;
        Ok(-g.scalar(nll))
    }

    pub fn policy(&self) -> BcPolicy<'_> {
        BcPolicy { agent: self }
    }

    pub fn checkpoint(&self, step: u64, seed: u64) -> traji_nn::Checkpoint {
        let t = &self.policy_net;
        let net = traji_nn::checkpoint::NamedNetwork {
            name: "policy".into(),
            spec: t.net.spec().clone(),
            params: t.params.clone(),
            optimizers: t.optimizers.clone(),
        };
        let meta = serde_json::json!({ "agent": "bc", "seed": seed, "config": self.config, "codec": self.codec });
        traji_nn::Checkpoint::new(vec![net], None, step, meta)
    }
}

pub struct BcPolicy<'a> {
    agent: &'a BcAgent,
}

impl Policy for BcPolicy<'_> {
    fn act(&mut self, _task: &Task, env: &TrajectoryEnv, _rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let f = self.agent.act_features(self.agent.codec.encode_state(env.state()))?;
        Ok(self.agent.codec.decode_action(&f))
    }
}

#[derive(Debug, Clone)]
pub struct BcOutcome {
    pub agent: BcAgent,
    /// Per-epoch mean training loss, NLL and entropy.
    pub losses: Vec<LossRecord>,
}

pub fn train_bc_on(task: &Task, config: BcConfig, seed: u64, demos: &[Demo]) -> Result<BcOutcome> {
    if demos.is_empty() {
        return Err(AgentError::Config("no demonstrations".into()));
    }
    let mut agent = BcAgent::new(task, config, seed)?;
    let cfg = agent.config.clone();
    let ad = task.action_dim();
    let mut rng = stream_rng(seed, Stream::Batch, 0);
    let mut order: Vec<usize> = (0..demos.len()).collect();
    let mut losses = Vec::new();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut sum_loss, mut sum_nll, mut sum_ent, mut batches) = (0.0, 0.0, 0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let mut g = Graph::new();
            let b = agent.policy_net.net.bind(&mut g, &agent.policy_net.params)?;
            let s = g.constant(rows(2, chunk.iter().map(|&i| &demos[i].s[..])));
            let a = g.constant(rows(ad, chunk.iter().map(|&i| &demos[i].a[..])));
            let h = agent.head(&mut g, &b, s)?;
            let (nll, ent) = agent.nll_and_entropy(&mut g, &h, a)?;
            let bonus = g.scale(ent, cfg.entropy_weight);
            let loss = g.sub(nll, bonus)?;
            let grads = g.backward(loss).map_err(|e| AgentError::Diverged { step: epoch as u64, reason: e.to_string() })?;
            let flat = agent.policy_net.net.flat_grad(&grads, &b);
            agent.policy_net.step(0, &flat)?;
            sum_loss += g.scalar(loss);
            sum_nll += g.scalar(nll);
            sum_ent += g.scalar(ent);
            batches += 1;
        }
        let k = batches as f64;
        let step = epoch as u64 + 1;
        losses.push(LossRecord { step, name: "bc_loss".into(), value: sum_loss / k });
        losses.push(LossRecord { step, name: "bc_nll".into(), value: sum_nll / k });
        losses.push(LossRecord { step, name: "bc_entropy".into(), value: sum_ent / k });
    }
    Ok(BcOutcome { agent, losses })
}

/// Collects demonstrations from the task's training references and fits.
pub fn train_bc(task: &Task, config: BcConfig, seed: u64) -> Result<BcOutcome> {
    let demos = collect_demos(task, seed, config.episodes)?;
    train_bc_on(task, config, seed, &demos)
}
