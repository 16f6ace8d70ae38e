//! Network layouts and a small trainable wrapper.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use traji_nn::{Activation, AdamConfig, AdamState, Graph, Network, NetworkParams, NetworkSpec, SlotSpec, Var};

use crate::error::{AgentError, Result};

pub const NOISE_DIM: usize = 64;
pub const TIME_DIM: usize = 76;
pub const HIDDEN: [usize; 4] = [32; 4];

pub fn mlp(slots: Vec<SlotSpec>, hidden: &[usize], output_dim: usize, output_activation: Activation) -> Result<Network> {
    Ok(Network::new(NetworkSpec {
        slots,
        hidden: hidden.to_vec(),
        hidden_activation: Activation::Relu,
        extractor_activation: Activation::Relu,
        output_dim,
        output_activation,
    })?)
}

/// Forward pass with inputs matched to slots by name; names the network
/// does not have are ignored.
pub fn forward_named(net: &Network, g: &mut Graph, bound: &traji_nn::BoundParams, named: &[(&str, Var)]) -> Result<Var> {
    let inputs = ordered_inputs(net, named)?;
    Ok(net.forward(g, bound, &inputs)?)
}

pub fn ordered_inputs(net: &Network, named: &[(&str, Var)]) -> Result<Vec<Var>> {
    net.spec()
        .slots
        .iter()
        .map(|s| {
            named
                .iter()
                .find(|(n, _)| *n == s.name)
                .map(|(_, v)| *v)
                .ok_or_else(|| AgentError::Config(format!("no input for slot `{}`", s.name)))
        })
        .collect()
}

/// Network, parameters and one optimizer per loss group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trainable {
    pub net: Network,
    pub params: NetworkParams,
    pub optimizers: Vec<AdamState>,
}

impl Trainable {
    pub fn new<R: Rng + ?Sized>(net: Network, rng: &mut R, optimizers: &[AdamConfig]) -> Self {
        let params = net.init(rng);
        let optimizers = optimizers.iter().map(|c| AdamState::new(params.len(), *c)).collect();
        Self { net, params, optimizers }
    }

    pub fn step(&mut self, group: usize, grad: &[f64]) -> Result<()> {
        let mask = self.net.nonneg_mask();
        let has_mask = mask.iter().any(|m| *m);
        self.optimizers[group].step(&mut self.params.values, grad, has_mask.then_some(mask.as_slice()))?;
        Ok(())
    }

    /// Batch inference with named inputs.
    pub fn predict(&self, named: &[(&str, &Array2<f64>)]) -> Result<Array2<f64>> {
        let mut g = Graph::new();
        let bound = self.net.bind_const(&mut g, &self.params)?;
        let vars: Vec<(&str, Var)> = named.iter().map(|(n, a)| (*n, g.constant((*a).clone()))).collect();
        let out = forward_named(&self.net, &mut g, &bound, &vars)?;
        Ok(g.value(out).clone())
    }
}

pub fn column(values: impl IntoIterator<Item = f64>) -> Array2<f64> {
    let v: Vec<f64> = values.into_iter().collect();
    let n = v.len();
    Array2::from_shape_vec((n, 1), v).expect("column shape")
}

pub fn rows<'a>(width: usize, rows: impl IntoIterator<Item = &'a [f64]>) -> Array2<f64> {
    let mut flat = Vec::new();
    let mut n = 0;
    for r in rows {
        debug_assert_eq!(r.len(), width);
        flat.extend_from_slice(r);
        n += 1;
    }
    Array2::from_shape_vec((n, width), flat).expect("row shape")
}
