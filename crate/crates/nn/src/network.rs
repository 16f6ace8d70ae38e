//! Slot-structured MLPs.
//!
//! A network takes one input per slot. Each slot is mapped to a feature block
//! (a dense extractor, a pass-through, a learned time embedding, or a reward
//! block with a non-negative kernel), the blocks are concatenated and fed
//! through the hidden stack.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::graph::{Gradients, Graph, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Elu,
    Tanh,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Relu => g.relu(x),
            Activation::Elu => g.elu(x),
            Activation::Tanh => g.tanh(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SlotKind {
    /// Dense layer with the extractor activation.
    Dense { width: usize },
    /// Passed through unchanged (noise vectors).
    Raw,
    /// Time2Vec-style embedding of a scalar time: one linear and `dim - 1`
    /// periodic components.
    Time { dim: usize, horizon: f64 },
    /// Scalar reward tiled to the width of the other features and mixed by a
    /// non-negative kernel.
    Reward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    pub dim: usize,
    pub kind: SlotKind,
}

impl SlotSpec {
    pub fn dense(name: &str, dim: usize, width: usize) -> Self {
        Self { name: name.into(), dim, kind: SlotKind::Dense { width } }
    }

    pub fn raw(name: &str, dim: usize) -> Self {
        Self { name: name.into(), dim, kind: SlotKind::Raw }
    }

    pub fn time(name: &str, dim: usize, horizon: f64) -> Self {
        Self { name: name.into(), dim: 1, kind: SlotKind::Time { dim, horizon } }
    }

    pub fn reward(name: &str) -> Self {
        Self { name: name.into(), dim: 1, kind: SlotKind::Reward }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub slots: Vec<SlotSpec>,
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
    pub extractor_activation: Activation,
    pub output_dim: usize,
    pub output_activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
    pub nonneg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub values: Vec<f64>,
}

impl NetworkParams {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self <- rate * other + (1 - rate) * self`.
    pub fn soft_update(&mut self, other: &NetworkParams, rate: f64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a = rate * b + (1.0 - rate) * *a;
        }
    }
}

/// Parameter blocks bound into a graph for one forward pass.
#[derive(Debug, Clone)]
pub struct BoundParams {
    pub vars: Vec<Var>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    spec: NetworkSpec,
    blocks: Vec<ParamBlock>,
    n_params: usize,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        if spec.slots.is_empty() {
            return Err(NnError::Spec("network needs at least one input slot".into()));
        }
        if spec.output_dim == 0 || spec.hidden.iter().any(|&h| h == 0) {
            return Err(NnError::Spec("zero-width layer".into()));
        }
        let rewards = spec.slots.iter().filter(|s| s.kind == SlotKind::Reward).count();
        if rewards > 1 {
            return Err(NnError::Spec("at most one reward slot".into()));
        }
        let mut blocks = Vec::new();
        let mut offset = 0;
        let mut add = |blocks: &mut Vec<ParamBlock>, name: String, rows: usize, cols: usize, nonneg: bool| {
            blocks.push(ParamBlock { name, rows, cols, offset, nonneg });
            offset += rows * cols;
        };
        let mut width = 0;
        for slot in &spec.slots {
            if slot.dim == 0 {
                return Err(NnError::Spec(format!("slot `{}` has zero width", slot.name)));
            }
            match slot.kind {
                SlotKind::Dense { width: w } => {
                    if w == 0 {
                        return Err(NnError::Spec(format!("slot `{}` extractor has zero width", slot.name)));
                    }
                    add(&mut blocks, format!("{}.w", slot.name), slot.dim, w, false);
                    add(&mut blocks, format!("{}.b", slot.name), 1, w, false);
                    width += w;
                }
                SlotKind::Raw => width += slot.dim,
                SlotKind::Time { dim, horizon } => {
                    if slot.dim != 1 || dim < 2 || !(horizon > 0.0) {
                        return Err(NnError::Spec(format!("time slot `{}` needs scalar input, dim >= 2, horizon > 0", slot.name)));
                    }
                    add(&mut blocks, format!("{}.w0", slot.name), 1, 1, false);
                    add(&mut blocks, format!("{}.b0", slot.name), 1, 1, false);
                    add(&mut blocks, format!("{}.freq", slot.name), 1, dim - 1, false);
                    add(&mut blocks, format!("{}.phase", slot.name), 1, dim - 1, false);
                    width += dim;
                }
                SlotKind::Reward => {
                    if slot.dim != 1 {
                        return Err(NnError::Spec("reward slot takes a scalar".into()));
                    }
                }
            }
        }
        if let Some(slot) = spec.slots.iter().find(|s| s.kind == SlotKind::Reward) {
            if width == 0 {
                return Err(NnError::Spec("reward slot needs other features to size against".into()));
            }
            add(&mut blocks, format!("{}.w", slot.name), width, width, true);
            add(&mut blocks, format!("{}.b", slot.name), 1, width, false);
            width *= 2;
        }
        for (i, &h) in spec.hidden.iter().enumerate() {
            add(&mut blocks, format!("hidden{i}.w"), width, h, false);
            add(&mut blocks, format!("hidden{i}.b"), 1, h, false);
            width = h;
        }
        add(&mut blocks, "out.w".into(), width, spec.output_dim, false);
        add(&mut blocks, "out.b".into(), 1, spec.output_dim, false);
        Ok(Self { spec, blocks, n_params: offset })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn slot_index(&self, name: &str) -> Option<usize> {
        self.spec.slots.iter().position(|s| s.name == name)
    }

    pub fn nonneg_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_params];
        for b in self.blocks.iter().filter(|b| b.nonneg) {
            mask[b.offset..b.offset + b.rows * b.cols].iter_mut().for_each(|m| *m = true);
        }
        mask
    }

    fn block(&self, name: &str) -> Option<&ParamBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> NetworkParams {
        let mut values = vec![0.0; self.n_params];
        let mut fill = |name: &str, f: &mut dyn FnMut() -> f64| {
            let b = self.block(name).expect("block exists");
            for v in &mut values[b.offset..b.offset + b.rows * b.cols] {
                *v = f();
            }
        };
        for slot in &self.spec.slots {
            match slot.kind {
                SlotKind::Dense { .. } => {
                    let lim = (6.0 / slot.dim as f64).sqrt();
                    fill(&format!("{}.w", slot.name), &mut || rng.random_range(-lim..lim));
                }
                SlotKind::Time { horizon, .. } => {
                    fill(&format!("{}.w0", slot.name), &mut || 1.0 / horizon);
                    let tau = std::f64::consts::TAU;
                    fill(&format!("{}.freq", slot.name), &mut || tau * rng.random_range(0.5..4.0) / horizon);
                    let pi = std::f64::consts::PI;
                    fill(&format!("{}.phase", slot.name), &mut || rng.random_range(-pi..pi));
                }
                SlotKind::Reward => {
                    let b = self.block(&format!("{}.w", slot.name)).expect("reward block");
                    let hi = 2.0 / b.rows as f64;
                    fill(&format!("{}.w", slot.name), &mut || rng.random_range(0.0..hi));
                }
                SlotKind::Raw => {}
            }
        }
        for i in 0..self.spec.hidden.len() {
            let name = format!("hidden{i}.w");
            let lim = (6.0 / self.block(&name).expect("hidden").rows as f64).sqrt();
            fill(&name, &mut || rng.random_range(-lim..lim));
        }
        fill("out.w", &mut || rng.random_range(-3e-3..3e-3));
        NetworkParams { values }
    }

    /// Binds parameters as differentiable leaves.
    pub fn bind(&self, g: &mut Graph, params: &NetworkParams) -> Result<BoundParams> {
        self.bind_with(g, params, true)
    }

    /// Binds parameters as constants (no gradients flow into them).
    pub fn bind_const(&self, g: &mut Graph, params: &NetworkParams) -> Result<BoundParams> {
        self.bind_with(g, params, false)
    }

    fn bind_with(&self, g: &mut Graph, params: &NetworkParams, track: bool) -> Result<BoundParams> {
        if params.len() != self.n_params {
            return Err(NnError::Shape(format!("expected {} parameters, got {}", self.n_params, params.len())));
        }
        let vars = self
            .blocks
            .iter()
            .map(|b| {
                let a = Array2::from_shape_vec((b.rows, b.cols), params.values[b.offset..b.offset + b.rows * b.cols].to_vec())
                    .expect("block shape");
                if track {
                    g.variable(a)
                } else {
                    g.constant(a)
                }
            })
            .collect();
        Ok(BoundParams { vars })
    }

    fn var(&self, bound: &BoundParams, name: &str) -> Var {
        let i = self.blocks.iter().position(|b| b.name == name).expect("block exists");
        bound.vars[i]
    }

    fn dense(&self, g: &mut Graph, bound: &BoundParams, x: Var, prefix: &str) -> Result<Var> {
        let w = self.var(bound, &format!("{prefix}.w"));
        let b = self.var(bound, &format!("{prefix}.b"));
        let h = g.matmul(x, w)?;
        g.add_row(h, b)
    }

    /// Forward pass; `inputs` are given in slot order, each `[batch, dim]`.
    pub fn forward(&self, g: &mut Graph, bound: &BoundParams, inputs: &[Var]) -> Result<Var> {
        if inputs.len() != self.spec.slots.len() {
            return Err(NnError::Shape(format!("expected {} inputs, got {}", self.spec.slots.len(), inputs.len())));
        }
        let batch = g.shape(inputs[0]).0;
        let mut feats = Vec::new();
        let mut reward_input = None;
        for (slot, &x) in self.spec.slots.iter().zip(inputs) {
            if g.shape(x) != (batch, slot.dim) {
                return Err(NnError::Shape(format!("slot `{}` expects [{batch},{}], got {:?}", slot.name, slot.dim, g.shape(x))));
            }
            match slot.kind {
                SlotKind::Dense { .. } => {
                    let h = self.dense(g, bound, x, &slot.name)?;
                    feats.push(self.spec.extractor_activation.apply(g, h));
                }
                SlotKind::Raw => feats.push(x),
                SlotKind::Time { .. } => {
                    let w0 = self.var(bound, &format!("{}.w0", slot.name));
                    let b0 = self.var(bound, &format!("{}.b0", slot.name));
                    let fr = self.var(bound, &format!("{}.freq", slot.name));
                    let ph = self.var(bound, &format!("{}.phase", slot.name));
                    let lin = g.matmul(x, w0)?;
                    let lin = g.add_row(lin, b0)?;
                    let per = g.matmul(x, fr)?;
                    let per = g.add_row(per, ph)?;
                    let per = g.sin(per);
                    feats.push(g.concat(&[lin, per])?);
                }
                SlotKind::Reward => reward_input = Some((x, slot.name.clone())),
            }
        }
        if let Some((r, name)) = reward_input {
            // Tiling r across k columns and multiplying by W equals r times the
            // column sums of W.
            let w = self.var(bound, &format!("{name}.w"));
            let b = self.var(bound, &format!("{name}.b"));
            let colsum = g.sum_cols(w);
            let h = g.matmul(r, colsum)?;
            let h = g.add_row(h, b)?;
            feats.push(self.spec.extractor_activation.apply(g, h));
        }
        let mut h = g.concat(&feats)?;
        for i in 0..self.spec.hidden.len() {
            let z = self.dense(g, bound, h, &format!("hidden{i}"))?;
            h = self.spec.hidden_activation.apply(g, z);
        }
        let out = self.dense(g, bound, h, "out")?;
        Ok(self.spec.output_activation.apply(g, out))
    }

    /// Gathers the gradient of each bound block back into a flat vector.
    pub fn flat_grad(&self, grads: &Gradients, bound: &BoundParams) -> Vec<f64> {
        let mut out = vec![0.0; self.n_params];
        for (b, &v) in self.blocks.iter().zip(&bound.vars) {
            if let Some(gr) = grads.get(v) {
                for (o, x) in out[b.offset..b.offset + b.rows * b.cols].iter_mut().zip(gr.iter()) {
                    *o += x;
                }
            }
        }
        out
    }

    /// Convenience inference without gradient tracking.
    pub fn predict(&self, params: &NetworkParams, inputs: &[Array2<f64>]) -> Result<Array2<f64>> {
        let mut g = Graph::new();
        let bound = self.bind_const(&mut g, params)?;
        let vars: Vec<Var> = inputs.iter().map(|a| g.constant(a.clone())).collect();
        let out = self.forward(&mut g, &bound, &vars)?;
        Ok(g.value(out).clone())
    }

    /// Inference with inputs addressed by slot name.
    pub fn predict_named(&self, params: &NetworkParams, inputs: &BTreeMap<String, Array2<f64>>) -> Result<Array2<f64>> {
        let ordered = self
            .spec
            .slots
            .iter()
            .map(|s| inputs.get(&s.name).cloned().ok_or_else(|| NnError::Shape(format!("missing input `{}`", s.name))))
            .collect::<Result<Vec<_>>>()?;
        self.predict(params, &ordered)
    }
}
