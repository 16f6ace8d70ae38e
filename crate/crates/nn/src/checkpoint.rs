//! Versioned JSON checkpoints.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adam::AdamState;
use crate::error::{NnError, Result};
use crate::network::{NetworkParams, NetworkSpec};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedNetwork {
    pub name: String,
    pub spec: NetworkSpec,
    pub params: NetworkParams,
    pub optimizers: Vec<AdamState>,
}

/// Serialized RNG; the full generator state round-trips through serde.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngState(pub ChaCha8Rng);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub networks: Vec<NamedNetwork>,
    pub rng: Option<RngState>,
    pub step: u64,
    pub meta: serde_json::Value,
}

impl Checkpoint {
    pub fn new(networks: Vec<NamedNetwork>, rng: Option<ChaCha8Rng>, step: u64, meta: serde_json::Value) -> Self {
        Self { version: CHECKPOINT_VERSION, networks, rng: rng.map(RngState), step, meta }
    }

    pub fn network(&self, name: &str) -> Option<&NamedNetwork> {
        self.networks.iter().find(|n| n.name == name)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == CHECKPOINT_VERSION as u64 => {}
            Some(v) => return Err(NnError::Checkpoint(format!("unsupported version {v}"))),
            None => return Err(NnError::Checkpoint("missing version".into())),
        }
        Ok(serde_json::from_value(value)?)
    }
}
