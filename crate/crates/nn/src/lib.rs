//! Minimal differentiable-network engine for the imitation agents.
//!
//! [`Graph`] records operations on row-major batches (`[batch, features]`).
//! [`Graph::backward`] returns numeric gradients; [`Graph::grad`] instead
//! appends the gradient computation to the graph itself so it can be
//! differentiated again, which the Wasserstein gradient penalty needs.

pub mod adam;
pub mod checkpoint;
pub mod error;
pub mod graph;
pub mod network;
pub mod penalty;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, NamedNetwork, RngState};
pub use error::{NnError, Result};
pub use graph::{Gradients, Graph, Var};
pub use network::{Activation, BoundParams, Network, NetworkParams, NetworkSpec, SlotKind, SlotSpec};
