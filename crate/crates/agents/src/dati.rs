//! Adversarial, cycle-consistent trajectory imitation.
//!
//! Two actor/critic pairs. The forward actor maps (state, noise, time) to an
//! action; the backward actor maps (action, noise, time) back to a state. Each
//! critic scores its actor's outputs conditioned on the sparse DTW reward and
//! time, trained as a Wasserstein critic with gradient penalty. Actors also
//! minimize L1 cycle losses and an L1 distance to the expert action.

use std::path::PathBuf;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use traji_core::seed::{stream_rng, Stream};
use traji_core::TrajectoryEnv;
use traji_nn::penalty::{joint_penalty_on_graph, Interpolated};
use traji_nn::{AdamConfig, Checkpoint, Graph, NamedNetwork, SlotSpec, Var};

use crate::codec::{l1_mean, Codec};
use crate::error::{AgentError, Result};
use crate::log::{LossLog, LossRecord};
use crate::nets::{column, forward_named, mlp, ordered_inputs, rows, Trainable, HIDDEN, NOISE_DIM, TIME_DIM};
use crate::noise::{NoiseKind, NoiseProcess};
use crate::policy::Policy;
use crate::replay::{DatiTransition, ReplayBuffer};
use crate::task::Task;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatiConfig {
    pub episodes: u64,
    pub warmup_episodes: u64,
    pub batch_size: usize,
    /// Critic updates per actor update.
    pub critic_updates: usize,
    /// Environment steps between optimization rounds.
    pub update_every: u64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub l1_lr: f64,
    pub l1_weight: f64,
    pub gp_lambda: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub noise: NoiseKind,
    pub extractor_width: usize,
    pub hidden: Vec<usize>,
    pub use_time: bool,
    pub use_reward: bool,
    pub log_every: u64,
}

impl Default for DatiConfig {
    fn default() -> Self {
        Self {
            episodes: 100,
            warmup_episodes: 1,
            batch_size: 64,
            critic_updates: 5,
            update_every: 4,
            actor_lr: 1e-4,
            critic_lr: 1e-5,
            l1_lr: 1e-3,
            l1_weight: 10.0,
            gp_lambda: 10.0,
            beta1: 0.5,
            beta2: 0.9,
            noise: NoiseKind::default(),
            extractor_width: 16,
            hidden: HIDDEN.to_vec(),
            use_time: true,
            use_reward: true,
            log_every: 200,
        }
    }
}

impl DatiConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.actor_lr, self.critic_lr, self.l1_lr, self.beta2];
        if self.episodes == 0 || self.batch_size == 0 || self.update_every == 0 || self.extractor_width == 0 {
            return Err(AgentError::Config("episodes, batch_size, update_every and extractor_width must be positive".into()));
        }
        if positive.iter().any(|v| !(*v > 0.0)) || !(0.0..1.0).contains(&self.beta1) || self.beta2 >= 1.0 {
            return Err(AgentError::Config("learning rates must be positive and betas in [0, 1)".into()));
        }
        if self.gp_lambda < 0.0 || self.l1_weight < 0.0 {
            return Err(AgentError::Config("loss weights must be non-negative".into()));
        }
        Ok(())
    }
}

/// Where and how often to write checkpoints.
#[derive(Debug, Clone, Default)]
pub struct CheckpointPolicy {
    pub dir: Option<PathBuf>,
    /// Episodes between checkpoints; 0 disables periodic checkpoints.
    pub every: u64,
}

impl CheckpointPolicy {
    fn path(&self, name: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(name))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatiAgent {
    pub config: DatiConfig,
    pub codec: Codec,
    pub nominal_dt: f64,
    pub forward_actor: Trainable,
    pub backward_actor: Trainable,
    pub forward_critic: Trainable,
    pub backward_critic: Trainable,
}

#[derive(Debug, Clone)]
pub struct DatiOutcome {
    pub agent: DatiAgent,
    pub losses: Vec<LossRecord>,
    pub sticking_events: usize,
    pub transitions: usize,
}

const STATE: &str = "state";
const ACTION: &str = "action";
const NOISE: &str = "noise";
const TIME: &str = "time";
const REWARD: &str = "reward";

impl DatiAgent {
    pub fn new(task: &Task, config: DatiConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let sd = task.state_dim();
        let ad = task.action_dim();
        let w = config.extractor_width;
        let with_time = |mut v: Vec<SlotSpec>| {
            if config.use_time {
                v.push(SlotSpec::time(TIME, TIME_DIM, task.time_horizon));
            }
            v
        };
        let with_reward = |mut v: Vec<SlotSpec>| {
            if config.use_reward {
                v.push(SlotSpec::reward(REWARD));
            }
            v
        };
        let adv = AdamConfig::new(config.actor_lr, config.beta1, config.beta2);
        let l1 = AdamConfig::new(config.l1_lr, config.beta1, config.beta2);
        let critic = AdamConfig::new(config.critic_lr, config.beta1, config.beta2);
        let out = traji_nn::Activation::Identity;
        let elu = traji_nn::Activation::Elu;
        let fa = mlp(with_time(vec![SlotSpec::dense(STATE, sd, w), SlotSpec::raw(NOISE, NOISE_DIM)]), &config.hidden, ad, out)?;
        let ba = mlp(with_time(vec![SlotSpec::dense(ACTION, ad, w), SlotSpec::raw(NOISE, NOISE_DIM)]), &config.hidden, sd, out)?;
        let fc = mlp(with_reward(with_time(vec![SlotSpec::dense(ACTION, ad, w)])), &config.hidden, 1, elu)?;
        let bc = mlp(with_reward(with_time(vec![SlotSpec::dense(STATE, sd, w)])), &config.hidden, 1, elu)?;
        Ok(Self {
            forward_actor: Trainable::new(fa, &mut stream_rng(seed, Stream::Init, 0), &[adv, l1]),
            backward_actor: Trainable::new(ba, &mut stream_rng(seed, Stream::Init, 1), &[adv, l1]),
            forward_critic: Trainable::new(fc, &mut stream_rng(seed, Stream::Init, 2), &[critic]),
            backward_critic: Trainable::new(bc, &mut stream_rng(seed, Stream::Init, 3), &[critic]),
            codec: task.codec.clone(),
            nominal_dt: task.nominal_dt,
            config,
        })
    }

    /// Action features chosen by the forward actor for one state.
    pub fn act_features(&self, s_feat: [f64; 2], eta: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let b = self.forward_actor.net.bind_const(&mut g, &self.forward_actor.params)?;
        let s = g.constant(rows(2, [&s_feat[..]]));
        let e = g.constant(rows(eta.len(), [eta]));
        let t = g.constant(column([t]));
        let a = forward_action(&self.forward_actor, &self.codec, &mut g, &b, s, e, t)?;
        Ok(g.value(a).row(0).to_vec())
    }

    /// One critic update on `items` (forward pair if `forward`, else the
    /// backward pair). Returns the Wasserstein term `mean(fake) - mean(real)`
    /// evaluated before the update, and the penalty.
    pub fn critic_step(&mut self, forward: bool, items: &[&DatiTransition], rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
        if items.is_empty() {
            return Err(AgentError::Config("empty batch".into()));
        }
        critic_update(self, forward, &Batch::from(items), rng)
    }

    pub fn policy(&self) -> DatiPolicy<'_> {
        DatiPolicy { agent: self, noise: NoiseProcess::new(self.config.noise, NOISE_DIM) }
    }

    fn named_networks(&self) -> Vec<NamedNetwork> {
        [
            ("forward_actor", &self.forward_actor),
            ("backward_actor", &self.backward_actor),
            ("forward_critic", &self.forward_critic),
            ("backward_critic", &self.backward_critic),
        ]
        .into_iter()
        .map(|(name, t)| NamedNetwork {
            name: name.into(),
            spec: t.net.spec().clone(),
            params: t.params.clone(),
            optimizers: t.optimizers.clone(),
        })
        .collect()
    }

    pub fn checkpoint(&self, rng: Option<ChaCha8Rng>, step: u64, seed: u64) -> Checkpoint {
        let meta = serde_json::json!({ "agent": "dati", "seed": seed, "config": self.config, "codec": self.codec });
        Checkpoint::new(self.named_networks(), rng, step, meta)
    }
}

fn forward_action(actor: &Trainable, codec: &Codec, g: &mut Graph, b: &traji_nn::BoundParams, s: Var, eta: Var, t: Var) -> Result<Var> {
    let z = forward_named(&actor.net, g, b, &[(STATE, s), (NOISE, eta), (TIME, t)])?;
    codec.action_head(g, z)
}

fn backward_state(actor: &Trainable, g: &mut Graph, b: &traji_nn::BoundParams, a: Var, eta: Var, t: Var) -> Result<Var> {
    let z = forward_named(&actor.net, g, b, &[(ACTION, a), (NOISE, eta), (TIME, t)])?;
    Ok(g.tanh(z))
}

pub struct DatiPolicy<'a> {
    agent: &'a DatiAgent,
    noise: NoiseProcess,
}

impl Policy for DatiPolicy<'_> {
    fn begin_episode(&mut self) {
        self.noise.reset();
    }

    fn act(&mut self, _task: &Task, env: &TrajectoryEnv, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let eta = self.noise.sample(rng, self.agent.nominal_dt);
        let f = self.agent.act_features(self.agent.codec.encode_state(env.state()), &eta, env.time())?;
        Ok(self.agent.codec.decode_action(&f))
    }
}

struct Batch {
    s: Array2<f64>,
    a_hat: Array2<f64>,
    a_star: Array2<f64>,
    r: Array2<f64>,
    eta: Array2<f64>,
    t: Array2<f64>,
}

impl Batch {
    fn from(items: &[&DatiTransition]) -> Self {
        let ad = items[0].a_hat.len();
        Self {
            s: rows(2, items.iter().map(|x| &x.s_hat[..])),
            a_hat: rows(ad, items.iter().map(|x| &x.a_hat[..])),
            a_star: rows(ad, items.iter().map(|x| &x.a_star[..])),
            r: column(items.iter().map(|x| x.r)),
            eta: rows(items[0].eta.len(), items.iter().map(|x| &x.eta[..])),
            t: column(items.iter().map(|x| x.t)),
        }
    }
}

/// One Wasserstein critic step with gradient penalty. Expert/real samples
/// are conditioned on reward +1, generated ones on the stored reward.
/// Returns (Wasserstein term, penalty).
fn critic_update(agent: &mut DatiAgent, forward: bool, b: &Batch, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
    let cfg = agent.config.clone();
    let mut g = Graph::new();
    let eta = g.constant(b.eta.clone());
    let t = g.constant(b.t.clone());
    let (real, fake, slot) = if forward {
        let ab = agent.forward_actor.net.bind_const(&mut g, &agent.forward_actor.params)?;
        let s = g.constant(b.s.clone());
        let a = forward_action(&agent.forward_actor, &agent.codec, &mut g, &ab, s, eta, t)?;
        (b.a_star.clone(), g.value(a).clone(), ACTION)
    } else {
        let bb = agent.backward_actor.net.bind_const(&mut g, &agent.backward_actor.params)?;
        let a = g.constant(b.a_hat.clone());
        let s = backward_state(&agent.backward_actor, &mut g, &bb, a, eta, t)?;
        (b.s.clone(), g.value(s).clone(), STATE)
    };
    let critic = if forward { &mut agent.forward_critic } else { &mut agent.backward_critic };
    let cb = critic.net.bind(&mut g, &critic.params)?;
    let ones = g.constant(Array2::ones((b.r.nrows(), 1)));
    let r = g.constant(b.r.clone());
    let real_v = g.constant(real.clone());
    let fake_v = g.constant(fake.clone());
    let real_out = forward_named(&critic.net, &mut g, &cb, &[(slot, real_v), (TIME, t), (REWARD, ones)])?;
    let fake_out = forward_named(&critic.net, &mut g, &cb, &[(slot, fake_v), (TIME, t), (REWARD, r)])?;
    let mf = g.mean(fake_out);
    let mr = g.mean(real_out);
    let w = g.sub(mf, mr)?;
    let weights: Vec<f64> = (0..real.nrows()).map(|_| rng.random_range(0.0..1.0)).collect();
    let others = ordered_inputs(&critic.net, &[(slot, fake_v), (TIME, t), (REWARD, r)])?;
    let idx = critic.net.slot_index(slot).expect("critic has its sample slot");
    let real_r = Array2::ones((b.r.nrows(), 1));
    let mut interp = vec![Interpolated { slot: idx, real: &real, fake: &fake }];
    if let Some(ri) = critic.net.slot_index(REWARD) {
        interp.push(Interpolated { slot: ri, real: &real_r, fake: &b.r });
    }
    let gp = joint_penalty_on_graph(&mut g, &critic.net, &cb, &others, &interp, &weights, cfg.gp_lambda)?;
    let loss = g.add(w, gp)?;
    let grads = g.backward(loss)?;
    let flat = critic.net.flat_grad(&grads, &cb);
    critic.step(0, &flat)?;
    Ok((g.scalar(w), g.scalar(gp)))
}

struct ActorLosses {
    adversarial: f64,
    supervised: f64,
    cycle_state: f64,
    cycle_action: f64,
}

fn actor_update(agent: &mut DatiAgent, b: &Batch) -> Result<ActorLosses> {
    let mut g = Graph::new();
    let fa = agent.forward_actor.net.bind(&mut g, &agent.forward_actor.params)?;
    let ba = agent.backward_actor.net.bind(&mut g, &agent.backward_actor.params)?;
    let fc = agent.forward_critic.net.bind_const(&mut g, &agent.forward_critic.params)?;
    let bc = agent.backward_critic.net.bind_const(&mut g, &agent.backward_critic.params)?;
    let s = g.constant(b.s.clone());
    let eta = g.constant(b.eta.clone());
    let t = g.constant(b.t.clone());
    let r = g.constant(b.r.clone());
    let a_hat = g.constant(b.a_hat.clone());
    let a_star = g.constant(b.a_star.clone());
    let codec = &agent.codec;

    let a_gen = forward_action(&agent.forward_actor, codec, &mut g, &fa, s, eta, t)?;
    let q_f = forward_named(&agent.forward_critic.net, &mut g, &fc, &[(ACTION, a_gen), (TIME, t), (REWARD, r)])?;
    let q_f = g.mean(q_f);
    let sup = codec.action_diff(&mut g, a_gen, a_star)?;
    let sup = l1_mean(&mut g, sup);
    let s_back = backward_state(&agent.backward_actor, &mut g, &ba, a_gen, eta, t)?;
    let cyc_s = g.sub(s_back, s)?;
    let cyc_s = l1_mean(&mut g, cyc_s);

    let s_gen = backward_state(&agent.backward_actor, &mut g, &ba, a_hat, eta, t)?;
    let q_b = forward_named(&agent.backward_critic.net, &mut g, &bc, &[(STATE, s_gen), (TIME, t), (REWARD, r)])?;
    let q_b = g.mean(q_b);
    let a_cyc = forward_action(&agent.forward_actor, codec, &mut g, &fa, s_gen, eta, t)?;
    let cyc_a = codec.action_diff(&mut g, a_cyc, a_hat)?;
    let cyc_a = l1_mean(&mut g, cyc_a);

    let q = g.add(q_f, q_b)?;
    let adv = g.neg(q);
    let l1 = g.add(sup, cyc_s)?;
    let l1 = g.add(l1, cyc_a)?;
    let l1 = g.scale(l1, agent.config.l1_weight);

    let g_adv = g.backward(adv)?;
    let g_l1 = g.backward(l1)?;
    let fa_adv = agent.forward_actor.net.flat_grad(&g_adv, &fa);
    let ba_adv = agent.backward_actor.net.flat_grad(&g_adv, &ba);
    let fa_l1 = agent.forward_actor.net.flat_grad(&g_l1, &fa);
    let ba_l1 = agent.backward_actor.net.flat_grad(&g_l1, &ba);
    agent.forward_actor.step(0, &fa_adv)?;
    agent.backward_actor.step(0, &ba_adv)?;
    agent.forward_actor.step(1, &fa_l1)?;
    agent.backward_actor.step(1, &ba_l1)?;
    Ok(ActorLosses {
        adversarial: g.scalar(adv),
        supervised: g.scalar(sup),
        cycle_state: g.scalar(cyc_s),
        cycle_action: g.scalar(cyc_a),
    })
}

/// Trains a fresh agent on `task` with run seed `seed`.
pub fn train_dati(task: &Task, config: DatiConfig, seed: u64, ckpt: &CheckpointPolicy) -> Result<DatiOutcome> {
    let mut agent = DatiAgent::new(task, config, seed)?;
    let cfg = agent.config.clone();
    let mut env = task.make_env()?;
    let mut buffer: ReplayBuffer<DatiTransition> = ReplayBuffer::new();
    let mut noise = NoiseProcess::new(cfg.noise, NOISE_DIM);
    let mut noise_rng = stream_rng(seed, Stream::Noise, 0);
    let mut batch_rng = stream_rng(seed, Stream::Batch, 0);
    let mut penalty_rng = stream_rng(seed, Stream::Penalty, 0);
    let mut log = LossLog::new(cfg.log_every);
    let mut step: u64 = 0;
    let mut sticking = 0;
    for episode in 0..cfg.episodes {
        let reference = task.source.train(seed, episode)?;
        env.reset_with(reference);
        noise.reset();
        while !env.is_done() {
            let s_hat = task.codec.encode_state(env.state());
            let t = env.time();
            let eta = noise.sample(&mut noise_rng, task.nominal_dt);
            let a_hat = agent.act_features(s_hat, &eta, t)?;
            let a_star = task.codec.encode_action(&env.expert_action()?);
            let out = env.step(&task.codec.decode_action(&a_hat))?;
            buffer.push(DatiTransition { s_hat, a_hat, a_star, r: out.reward, eta, t });
            step += 1;
            if episode >= cfg.warmup_episodes && step % cfg.update_every == 0 {
                let round = optimization_round(&mut agent, &buffer, &mut batch_rng, &mut penalty_rng, &mut log);
                if let Err(e) = round {
                    return Err(diverged(&agent, ckpt, &batch_rng, step, seed, e));
                }
                log.end_update(step);
            }
        }
        sticking += env.sticking_events();
        if ckpt.every > 0 && (episode + 1) % ckpt.every == 0 {
            if let Some(path) = ckpt.path(&format!("dati_seed{seed}_ep{}.json", episode + 1)) {
                agent.checkpoint(Some(batch_rng.clone()), step, seed).save(&path)?;
            }
        }
        log::debug!("dati seed {seed} episode {episode}: buffer {}", buffer.len());
    }
    log.flush(step);
    Ok(DatiOutcome { agent, losses: log.records, sticking_events: sticking, transitions: buffer.len() })
}

fn optimization_round(
    agent: &mut DatiAgent,
    buffer: &ReplayBuffer<DatiTransition>,
    batch_rng: &mut ChaCha8Rng,
    penalty_rng: &mut ChaCha8Rng,
    log: &mut LossLog,
) -> Result<()> {
    let n = agent.config.batch_size;
    for _ in 0..agent.config.critic_updates {
        let batch = Batch::from(&buffer.sample(batch_rng, n));
        let (wf, pf) = critic_update(agent, true, &batch, penalty_rng)?;
        let (wb, pb) = critic_update(agent, false, &batch, penalty_rng)?;
        log.add("critic_forward_w", wf);
        log.add("critic_forward_gp", pf);
        log.add("critic_backward_w", wb);
        log.add("critic_backward_gp", pb);
    }
    let batch = Batch::from(&buffer.sample(batch_rng, n));
    let l = actor_update(agent, &batch)?;
    log.add("actor_adversarial", l.adversarial);
    log.add("actor_l1_expert", l.supervised);
    log.add("actor_cycle_state", l.cycle_state);
    log.add("actor_cycle_action", l.cycle_action);
    Ok(())
}

fn diverged(agent: &DatiAgent, ckpt: &CheckpointPolicy, rng: &ChaCha8Rng, step: u64, seed: u64, e: AgentError) -> AgentError {
    let reason = e.to_string();
    if let Some(path) = ckpt.path(&format!("dati_seed{seed}_diverged.json")) {
        if let Err(io) = agent.checkpoint(Some(rng.clone()), step, seed).save(&path) {
            log::error!("could not write divergence checkpoint: {io}");
        }
    }
    AgentError::Diverged { step, reason }
}
