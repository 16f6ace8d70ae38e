//! Trainable imitation agents and their evaluation.
//!
//! All agents work in a normalized feature space: states are mapped into
//! `[-1, 1]²` by the task's region of interest, bounded action components
//! into `[-1, 1]` and angular components into `(-1, 1]` with wrap-around.

pub mod ablate;
pub mod bc;
pub mod codec;
pub mod dati;
pub mod ddpg;
pub mod error;
pub mod log;
pub mod nets;
pub mod noise;
pub mod policy;
pub mod replay;
pub mod saved;
pub mod task;

pub use codec::{Codec, Component};
pub use dati::{train_dati, CheckpointPolicy, DatiAgent, DatiConfig, DatiOutcome};
pub use error::{AgentError, Result};
pub use log::{LossLog, LossRecord};
pub use noise::{NoiseKind, NoiseProcess};
pub use policy::{evaluate, rollout, EvalReport, EvalRow, PerfectPolicy, Policy, Rollout};
pub use task::{FamilySource, ReferenceSource, Task};
pub use ablate::{ablate, AblationResult, Variant};
pub use bc::{collect_demos, train_bc, train_bc_on, BcAgent, BcConfig, BcOutcome, Demo};
pub use ddpg::{train_ddpg, DdpgAgent, DdpgConfig, DdpgOutcome};
pub use saved::{perfect_checkpoint, SavedAgent};
