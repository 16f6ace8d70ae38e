//! Restoring trained agents from checkpoints.

use serde::de::DeserializeOwned;
use traji_nn::{Checkpoint, NetworkParams};

use crate::bc::{BcAgent, BcConfig};
use crate::codec::Codec;
use crate::dati::{DatiAgent, DatiConfig};
use crate::ddpg::{DdpgAgent, DdpgConfig};
use crate::error::{AgentError, Result};
use crate::nets::Trainable;
use crate::policy::{PerfectPolicy, Policy};
use crate::task::Task;

#[derive(Debug, Clone)]
pub enum SavedAgent {
    Dati(DatiAgent),
    Ddpg(DdpgAgent),
    Bc(BcAgent),
    /// Replays the reference; a pseudo-checkpoint for checking the evaluation path.
    Perfect,
}

fn meta<T: DeserializeOwned>(ckpt: &Checkpoint, key: &str) -> Result<T> {
    let v = ckpt.meta.get(key).ok_or_else(|| AgentError::Mismatch(format!("checkpoint metadata lacks `{key}`")))?;
    serde_json::from_value(v.clone()).map_err(|e| AgentError::Mismatch(format!("checkpoint `{key}`: {e}")))
}

fn params(ckpt: &Checkpoint, name: &str, into: &Trainable) -> Result<(NetworkParams, Vec<traji_nn::AdamState>)> {
    let n = ckpt.network(name).ok_or_else(|| AgentError::Mismatch(format!("network `{name}` missing")))?;
    if &n.spec != into.net.spec() || n.params.values.len() != into.net.n_params() {
        return Err(AgentError::Mismatch(format!("network `{name}` has a different architecture")));
    }
    Ok((n.params.clone(), n.optimizers.clone()))
}

fn restore(ckpt: &Checkpoint, name: &str, into: &mut Trainable) -> Result<()> {
    let (p, o) = params(ckpt, name, into)?;
    into.params = p;
    if o.len() == into.optimizers.len() {
        into.optimizers = o;
    }
    Ok(())
}

/// Checkpoint standing in for the perfect policy.
pub fn perfect_checkpoint() -> Checkpoint {
    Checkpoint::new(Vec::new(), None, 0, serde_json::json!({ "agent": "perfect" }))
}

impl SavedAgent {
    pub fn kind(&self) -> &'static str {
        match self {
            SavedAgent::Dati(_) => "dati",
            SavedAgent::Ddpg(_) => "ddpg_ti",
            SavedAgent::Bc(_) => "bc",
            SavedAgent::Perfect => "perfect",
        }
    }

    /// Rebuilds the agent for `task`; the stored codec and network shapes
    /// must match what the task would produce.
    pub fn from_checkpoint(task: &Task, ckpt: &Checkpoint) -> Result<Self> {
        let kind: String = meta(ckpt, "agent")?;
        if kind == "perfect" {
            return Ok(SavedAgent::Perfect);
        }
        let seed: u64 = meta(ckpt, "seed")?;
        let codec: Codec = meta(ckpt, "codec")?;
        if codec != task.codec {
            return Err(AgentError::Mismatch(format!("action/state encoding differs from task `{}`", task.name)));
        }
        match kind.as_str() {
            "dati" => {
                let mut a = DatiAgent::new(task, meta::<DatiConfig>(ckpt, "config")?, seed)?;
                restore(ckpt, "forward_actor", &mut a.forward_actor)?;
                restore(ckpt, "backward_actor", &mut a.backward_actor)?;
                restore(ckpt, "forward_critic", &mut a.forward_critic)?;
                restore(ckpt, "backward_critic", &mut a.backward_critic)?;
                Ok(SavedAgent::Dati(a))
            }
            "ddpg_ti" => {
                let mut a = DdpgAgent::new(task, meta::<DdpgConfig>(ckpt, "config")?, seed)?;
                restore(ckpt, "actor", &mut a.actor)?;
                restore(ckpt, "critic", &mut a.critic)?;
                a.target_actor = params(ckpt, "target_actor", &a.actor)?.0;
                a.target_critic = params(ckpt, "target_critic", &a.critic)?.0;
                Ok(SavedAgent::Ddpg(a))
            }
            "bc" => {
                let mut a = BcAgent::new(task, meta::<BcConfig>(ckpt, "config")?, seed)?;
                restore(ckpt, "policy", &mut a.policy_net)?;
                Ok(SavedAgent::Bc(a))
            }
            other => Err(AgentError::Mismatch(format!("unknown agent kind `{other}`"))),
        }
    }

    pub fn policy(&self) -> Box<dyn Policy + '_> {
        match self {
            SavedAgent::Dati(a) => Box::new(a.policy()),
            SavedAgent::Ddpg(a) => Box::new(a.policy()),
            SavedAgent::Bc(a) => Box::new(a.policy()),
            SavedAgent::Perfect => Box::new(PerfectPolicy),
        }
    }
}
