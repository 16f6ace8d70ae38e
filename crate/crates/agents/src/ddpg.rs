//! Deterministic policy gradient with a time-aware actor and critic.
//!
//! The actor sees its own predicted state (never the reference) and time.
//! Both networks share one time embedding, which is trained through the
//! critic and copied into the actor.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use traji_core::seed::{stream_rng, Stream};
use traji_core::TrajectoryEnv;
use traji_nn::{Activation, AdamConfig, Checkpoint, Graph, NamedNetwork, NetworkParams, SlotSpec, Var};

use crate::codec::Codec;
use crate::dati::CheckpointPolicy;
use crate::error::{AgentError, Result};
use crate::log::{LossLog, LossRecord};
use crate::nets::{column, forward_named, mlp, rows, Trainable, HIDDEN, TIME_DIM};
use crate::noise::{NoiseKind, NoiseProcess};
use crate::policy::Policy;
use crate::replay::{DdpgTransition, ReplayBuffer};
use crate::task::Task;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgConfig {
    pub episodes: u64,
    pub warmup_episodes: u64,
    pub batch_size: usize,
    pub update_every: u64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
    /// Target tracking rate.
    pub tau: f64,
    pub noise: NoiseKind,
    pub extractor_width: usize,
    pub hidden: Vec<usize>,
    pub use_time: bool,
    pub log_every: u64,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            episodes: 100,
            warmup_episodes: 1,
            batch_size: 64,
            update_every: 1,
            actor_lr: 1e-4,
            critic_lr: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            gamma: 0.9,
            tau: 1e-3,
            noise: NoiseKind::default(),
            extractor_width: 80,
            hidden: HIDDEN.to_vec(),
            use_time: true,
            log_every: 200,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.batch_size == 0 || self.update_every == 0 || self.extractor_width == 0 {
            return Err(AgentError::Config("episodes, batch_size, update_every and extractor_width must be positive".into()));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(AgentError::Config("learning rates must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.tau) {
            return Err(AgentError::Config("gamma and tau must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

const STATE: &str = "state";
const ACTION: &str = "action";
const TIME: &str = "time";
const TIME_PREFIX: &str = "time.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdpgAgent {
    pub config: DdpgConfig,
    pub codec: Codec,
    pub actor: Trainable,
    pub critic: Trainable,
    pub target_actor: NetworkParams,
    pub target_critic: NetworkParams,
}

/// Copies the time-embedding blocks of `from` into `to`.
fn share_time(from_net: &traji_nn::Network, from: &NetworkParams, to_net: &traji_nn::Network, to: &mut NetworkParams) {
    for b in from_net.blocks().iter().filter(|b| b.name.starts_with(TIME_PREFIX)) {
        if let Some(d) = to_net.blocks().iter().find(|d| d.name == b.name) {
            let n = b.rows * b.cols;
            to.values[d.offset..d.offset + n].copy_from_slice(&from.values[b.offset..b.offset + n]);
        }
    }
}

fn zero_time(net: &traji_nn::Network, grad: &mut [f64]) {
    for b in net.blocks().iter().filter(|b| b.name.starts_with(TIME_PREFIX)) {
        grad[b.offset..b.offset + b.rows * b.cols].iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Soft update `target <- tau * learned + (1 - tau) * target`.
pub fn soft_update(target: &mut NetworkParams, learned: &NetworkParams, tau: f64) {
    target.soft_update(learned, tau);
}

impl DdpgAgent {
    pub fn new(task: &Task, config: DdpgConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let sd = task.state_dim();
        let ad = task.action_dim();
        let w = config.extractor_width;
        let time = |mut v: Vec<SlotSpec>| {
            if config.use_time {
                v.push(SlotSpec::time(TIME, TIME_DIM, task.time_horizon));
            }
            v
        };
        let actor_net = mlp(time(vec![SlotSpec::dense(STATE, sd, w)]), &config.hidden, ad, Activation::Identity)?;
        let critic_net = mlp(
            time(vec![SlotSpec::dense(STATE, sd, w), SlotSpec::raw(ACTION, ad)]),
            &config.hidden,
            1,
            Activation::Identity,
        )?;
        let actor = Trainable::new(actor_net, &mut stream_rng(seed, Stream::Init, 0), &[AdamConfig::new(config.actor_lr, config.beta1, config.beta2)]);
        let critic = Trainable::new(critic_net, &mut stream_rng(seed, Stream::Init, 1), &[AdamConfig::new(config.critic_lr, config.beta1, config.beta2)]);
        let mut agent = Self {
            target_actor: actor.params.clone(),
            target_critic: critic.params.clone(),
            actor,
            critic,
            codec: task.codec.clone(),
            config,
        };
        agent.sync_time();
        agent.target_actor = agent.actor.params.clone();
        Ok(agent)
    }

    fn sync_time(&mut self) {
        share_time(&self.critic.net, &self.critic.params, &self.actor.net, &mut self.actor.params);
    }

    fn action_on(&self, g: &mut Graph, params: &NetworkParams, s: Var, t: Var, track: bool) -> Result<Var> {
        let b = if track { self.actor.net.bind(g, params)? } else { self.actor.net.bind_const(g, params)? };
        let z = forward_named(&self.actor.net, g, &b, &[(STATE, s), (TIME, t)])?;
        self.codec.action_head(g, z)
    }

    /// Deterministic action features for one state.
    pub fn act_features(&self, s_feat: [f64; 2], t: f64) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let s = g.constant(rows(2, [&s_feat[..]]));
        let t = g.constant(column([t]));
        let a = self.action_on(&mut g, &self.actor.params, s, t, false)?;
        Ok(g.value(a).row(0).to_vec())
    }

    fn update(&mut self, batch: &[&DdpgTransition], log: &mut LossLog) -> Result<()> {
        let ad = self.codec.action_dim();
        let s = rows(2, batch.iter().map(|x| &x.s_hat[..]));
        let a = rows(ad, batch.iter().map(|x| &x.a_hat[..]));
        let s2 = rows(2, batch.iter().map(|x| &x.s_next[..]));
        let t = column(batch.iter().map(|x| x.t));
        let t2 = column(batch.iter().map(|x| x.t_next));
        let r = column(batch.iter().map(|x| x.r));
        let live = column(batch.iter().map(|x| if x.done { 0.0 } else { 1.0 }));

        // Bootstrapped target from the target networks.
        let y = {
            let mut g = Graph::new();
            let s2v = g.constant(s2);
            let t2v = g.constant(t2);
            let a2 = self.action_on(&mut g, &self.target_actor, s2v, t2v, false)?;
            let cb = self.critic.net.bind_const(&mut g, &self.target_critic)?;
            let q2 = forward_named(&self.critic.net, &mut g, &cb, &[(STATE, s2v), (ACTION, a2), (TIME, t2v)])?;
            &r + &(g.value(q2) * &live * self.config.gamma)
        };

        let mut g = Graph::new();
        let cb = self.critic.net.bind(&mut g, &self.critic.params)?;
        let sv = g.constant(s.clone());
        let av = g.constant(a);
        let tv = g.constant(t.clone());
        let yv = g.constant(y);
        let q = forward_named(&self.critic.net, &mut g, &cb, &[(STATE, sv), (ACTION, av), (TIME, tv)])?;
        let d = g.sub(q, yv)?;
        let d2 = g.square(d);
        let critic_loss = g.mean(d2);
        let grads = g.backward(critic_loss)?;
        let flat = self.critic.net.flat_grad(&grads, &cb);
        self.critic.step(0, &flat)?;
        self.sync_time();
        log.add("critic_td", g.scalar(critic_loss));

        let mut g = Graph::new();
        let ab = self.actor.net.bind(&mut g, &self.actor.params)?;
        let cb = self.critic.net.bind_const(&mut g, &self.critic.params)?;
        let sv = g.constant(s);
        let tv = g.constant(t);
        let z = forward_named(&self.actor.net, &mut g, &ab, &[(STATE, sv), (TIME, tv)])?;
        let a_pi = self.codec.action_head(&mut g, z)?;
        let q = forward_named(&self.critic.net, &mut g, &cb, &[(STATE, sv), (ACTION, a_pi), (TIME, tv)])?;
        let mq = g.mean(q);
        let actor_loss = g.neg(mq);
        let grads = g.backward(actor_loss)?;
        let mut flat = self.actor.net.flat_grad(&grads, &ab);
        zero_time(&self.actor.net, &mut flat);
        self.actor.step(0, &flat)?;
        log.add("actor_q", -g.scalar(actor_loss));

        soft_update(&mut self.target_critic, &self.critic.params, self.config.tau);
        soft_update(&mut self.target_actor, &self.actor.params, self.config.tau);
        share_time(&self.critic.net, &self.target_critic.clone(), &self.actor.net, &mut self.target_actor);
        Ok(())
    }

    pub fn policy(&self) -> DdpgPolicy<'_> {
        DdpgPolicy { agent: self }
    }

    pub fn checkpoint(&self, step: u64, seed: u64) -> Checkpoint {
        let nets = vec![
            NamedNetwork { name: "actor".into(), spec: self.actor.net.spec().clone(), params: self.actor.params.clone(), optimizers: self.actor.optimizers.clone() },
            NamedNetwork { name: "critic".into(), spec: self.critic.net.spec().clone(), params: self.critic.params.clone(), optimizers: self.critic.optimizers.clone() },
            NamedNetwork { name: "target_actor".into(), spec: self.actor.net.spec().clone(), params: self.target_actor.clone(), optimizers: vec![] },
            NamedNetwork { name: "target_critic".into(), spec: self.critic.net.spec().clone(), params: self.target_critic.clone(), optimizers: vec![] },
        ];
        let meta = serde_json::json!({ "agent": "ddpg_ti", "seed": seed, "config": self.config, "codec": self.codec });
        Checkpoint::new(nets, None, step, meta)
    }
}

/// Greedy (noise-free) rollout policy.
pub struct DdpgPolicy<'a> {
    agent: &'a DdpgAgent,
}

impl Policy for DdpgPolicy<'_> {
    fn act(&mut self, _task: &Task, env: &TrajectoryEnv, _rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let f = self.agent.act_features(self.agent.codec.encode_state(env.state()), env.time())?;
        Ok(self.agent.codec.decode_action(&f))
    }
}

#[derive(Debug, Clone)]
pub struct DdpgOutcome {
    pub agent: DdpgAgent,
    pub losses: Vec<LossRecord>,
    pub sticking_events: usize,
}

pub fn train_ddpg(task: &Task, config: DdpgConfig, seed: u64, ckpt: &CheckpointPolicy) -> Result<DdpgOutcome> {
    let mut agent = DdpgAgent::new(task, config, seed)?;
    let cfg = agent.config.clone();
    let mut env = task.make_env()?;
    let mut buffer = ReplayBuffer::new();
    let mut noise = NoiseProcess::new(cfg.noise, task.action_dim());
    let mut noise_rng = stream_rng(seed, Stream::Noise, 0);
    let mut batch_rng = stream_rng(seed, Stream::Batch, 0);
    let mut log = LossLog::new(cfg.log_every);
    let mut step = 0u64;
    let mut sticking = 0;
    for episode in 0..cfg.episodes {
        env.reset_with(task.source.train(seed, episode)?);
        noise.reset();
        while !env.is_done() {
            let s_hat = task.codec.encode_state(env.state());
            let t = env.time();
            let mut a = agent.act_features(s_hat, t)?;
            for (v, n) in a.iter_mut().zip(noise.sample(&mut noise_rng, task.nominal_dt)) {
                *v += n;
            }
            task.codec.project_features(&mut a);
            let out = env.step(&task.codec.decode_action(&a))?;
            buffer.push(DdpgTransition {
                s_hat,
                a_hat: a,
                r: out.reward,
                s_next: task.codec.encode_state(out.next_state),
                t,
                t_next: env.time(),
                done: out.done,
            });
            step += 1;
            if episode >= cfg.warmup_episodes && step % cfg.update_every == 0 {
                let batch = buffer.sample(&mut batch_rng, cfg.batch_size);
                if let Err(e) = agent.update(&batch, &mut log) {
                    if let Some(dir) = &ckpt.dir {
                        let _ = agent.checkpoint(step, seed).save(&dir.join(format!("ddpg_seed{seed}_diverged.json")));
                    }
                    return Err(AgentError::Diverged { step, reason: e.to_string() });
                }
                log.end_update(step);
            }
        }
        sticking += env.sticking_events();
        if ckpt.every > 0 && (episode + 1) % ckpt.every == 0 {
            if let Some(dir) = &ckpt.dir {
                agent.checkpoint(step, seed).save(&dir.join(format!("ddpg_seed{seed}_ep{}.json", episode + 1)))?;
            }
        }
    }
    log.flush(step);
    Ok(DdpgOutcome { agent, losses: log.records, sticking_events: sticking })
}
