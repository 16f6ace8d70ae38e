//! Wasserstein gradient penalty.

use ndarray::Array2;

use crate::error::{NnError, Result};
use crate::graph::{Graph, Var};
use crate::network::{BoundParams, Network, NetworkParams};

const NORM_EPS: f64 = 1e-12;

/// One critic input slot interpolated by the penalty.
#[derive(Debug, Clone, Copy)]
pub struct Interpolated<'a> {
    pub slot: usize,
    pub real: &'a Array2<f64>,
    pub fake: &'a Array2<f64>,
}

/// Appends `lambda * mean_i (||d c(x_i) / d x_i|| - 1)^2` to the graph, where
/// slot `slot` of the critic input is replaced by `w * real + (1 - w) * fake`
/// row by row and the remaining slots are taken from `others` (the entry at
/// `slot` is ignored).
#[allow(clippy::too_many_arguments)]
pub fn penalty_on_graph(
    g: &mut Graph,
    critic: &Network,
    bound: &BoundParams,
    others: &[Var],
    slot: usize,
    real: &Array2<f64>,
    fake: &Array2<f64>,
    weights: &[f64],
    lambda: f64,
) -> Result<Var> {
    joint_penalty_on_graph(g, critic, bound, others, &[Interpolated { slot, real, fake }], weights, lambda)
}

/// Like [`penalty_on_graph`] but interpolates several slots with the same
/// per-row weights; the norm is taken over their concatenated gradients.
pub fn joint_penalty_on_graph(
    g: &mut Graph,
    critic: &Network,
    bound: &BoundParams,
    others: &[Var],
    slots: &[Interpolated<'_>],
    weights: &[f64],
    lambda: f64,
) -> Result<Var> {
    if slots.is_empty() {
        return Err(NnError::Shape("penalty needs at least one slot".into()));
    }
    let mut inputs = others.to_vec();
    let mut xs = Vec::with_capacity(slots.len());
    for s in slots {
        if s.real.dim() != s.fake.dim() || weights.len() != s.real.nrows() {
            return Err(NnError::Shape("penalty interpolation shapes".into()));
        }
        if s.slot >= inputs.len() {
            return Err(NnError::Shape(format!("penalty slot {} out of range", s.slot)));
        }
        let mut mixed = s.fake.clone();
        for (i, mut row) in mixed.rows_mut().into_iter().enumerate() {
            let w = weights[i];
            row.zip_mut_with(&s.real.row(i), |f, &r| *f = w * r + (1.0 - w) * *f);
        }
        let x = g.variable(mixed);
        inputs[s.slot] = x;
        xs.push(x);
    }
    let out = critic.forward(g, bound, &inputs)?;
    let total = g.sum(out);
    let grads = g.grad(total, &xs)?;
    let mut norm2 = None;
    for gx in grads {
        let sq = g.square(gx);
        let part = g.sum_rows(sq);
        norm2 = Some(match norm2 {
            Some(acc) => g.add(acc, part)?,
            None => part,
        });
    }
    let norm2 = g.add_scalar(norm2.expect("non-empty"), NORM_EPS);
    let norm = g.sqrt(norm2);
    let dev = g.add_scalar(norm, -1.0);
    let dev2 = g.square(dev);
    let m = g.mean(dev2);
    Ok(g.scale(m, lambda))
}

/// Penalty value and its gradient with respect to the critic parameters.
#[allow(clippy::too_many_arguments)]
pub fn gradient_penalty(
    critic: &Network,
    params: &NetworkParams,
    others: &[Array2<f64>],
    slot: usize,
    real: &Array2<f64>,
    fake: &Array2<f64>,
    weights: &[f64],
    lambda: f64,
) -> Result<(f64, Vec<f64>)> {
    let mut g = Graph::new();
    let bound = critic.bind(&mut g, params)?;
    let others: Vec<Var> = others.iter().map(|a| g.constant(a.clone())).collect();
    let pen = penalty_on_graph(&mut g, critic, &bound, &others, slot, real, fake, weights, lambda)?;
    let grads = g.backward(pen)?;
    Ok((g.scalar(pen), critic.flat_grad(&grads, &bound)))
}

/// Central-difference parameter gradient of the penalty. Slow; meant for
/// debugging the second-order path.
#[allow(clippy::too_many_arguments)]
pub fn gradient_penalty_fd(
    critic: &Network,
    params: &NetworkParams,
    others: &[Array2<f64>],
    slot: usize,
    real: &Array2<f64>,
    fake: &Array2<f64>,
    weights: &[f64],
    lambda: f64,
    h: f64,
) -> Result<Vec<f64>> {
    let value = |p: &NetworkParams| -> Result<f64> {
        let mut g = Graph::new();
        let bound = critic.bind(&mut g, p)?;
        let o: Vec<Var> = others.iter().map(|a| g.constant(a.clone())).collect();
        let pen = penalty_on_graph(&mut g, critic, &bound, &o, slot, real, fake, weights, lambda)?;
        Ok(g.scalar(pen))
    };
    let mut p = params.clone();
    let mut out = vec![0.0; p.len()];
    for i in 0..p.len() {
        let orig = p.values[i];
        p.values[i] = orig + h;
        let up = value(&p)?;
        p.values[i] = orig - h;
        let down = value(&p)?;
        p.values[i] = orig;
        out[i] = (up - down) / (2.0 * h);
    }
    Ok(out)
}
