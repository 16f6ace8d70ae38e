//! Mapping between physical states/actions and the normalized features the
//! networks see.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use traji_core::{Roi, State2};
use traji_nn::{Graph, Var};

use crate::error::{AgentError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Component {
    /// Physical range `[lo, hi]` mapped to `[-1, 1]`; network output squashed by tanh.
    Bounded { lo: f64, hi: f64 },
    /// Periodic quantity; features live in `(-1, 1]` and wrap around.
    Angle { period: f64, offset: f64 },
}

/// Wraps `x` to `(-1, 1]`.
pub fn wrap_unit(x: f64) -> f64 {
    let w = x - 2.0 * (x / 2.0).round();
    if w <= -1.0 {
        w + 2.0
    } else {
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codec {
    pub roi: Roi,
    pub actions: Vec<Component>,
}

impl Codec {
    pub fn new(roi: Roi, actions: Vec<Component>) -> Result<Self> {
        for c in &actions {
            match *c {
                Component::Bounded { lo, hi } if !(lo < hi) || !lo.is_finite() || !hi.is_finite() => {
                    return Err(AgentError::Config(format!("action range [{lo}, {hi}] is empty")));
                }
                Component::Angle { period, .. } if !(period > 0.0) => {
                    return Err(AgentError::Config("angle period must be positive".into()));
                }
                _ => {}
            }
        }
        Ok(Self { roi, actions })
    }

    /// Speed/heading codec for planar kinematics.
    pub fn planar(roi: Roi, u_max: f64) -> Result<Self> {
        Self::new(
            roi,
            vec![
                Component::Bounded { lo: 0.0, hi: u_max },
                Component::Angle { period: std::f64::consts::TAU, offset: 0.0 },
            ],
        )
    }

    pub fn state_dim(&self) -> usize {
        2
    }

    pub fn action_dim(&self) -> usize {
        self.actions.len()
    }

    pub fn encode_state(&self, s: State2) -> [f64; 2] {
        self.roi.normalize(s)
    }

    pub fn decode_state(&self, f: &[f64]) -> State2 {
        self.roi.denormalize([f[0], f[1]])
    }

    pub fn encode_action(&self, a: &[f64]) -> Vec<f64> {
        self.actions
            .iter()
            .zip(a)
            .map(|(c, &v)| match *c {
                Component::Bounded { lo, hi } => (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0),
                Component::Angle { period, offset } => wrap_unit(2.0 * (v - offset) / period),
            })
            .collect()
    }

    /// Physical action for feature values already in feature range.
    pub fn decode_action(&self, f: &[f64]) -> Vec<f64> {
        self.actions
            .iter()
            .zip(f)
            .map(|(c, &v)| match *c {
                Component::Bounded { lo, hi } => lo + (v.clamp(-1.0, 1.0) + 1.0) * 0.5 * (hi - lo),
                Component::Angle { period, offset } => {
                    let x = offset + wrap_unit(v) * period / 2.0;
                    if offset == 0.0 {
                        x
                    } else {
                        x.rem_euclid(period)
                    }
                }
            })
            .collect()
    }

    /// Squashes raw network outputs into feature range, on the graph.
    /// Bounded components pass through tanh; angles are wrapped (the wrap
    /// offset is piecewise constant, so its derivative is one).
    pub fn action_head(&self, g: &mut Graph, z: Var) -> Result<Var> {
        let (n, d) = g.shape(z);
        if d != self.actions.len() {
            return Err(AgentError::Config(format!("action head width {d} vs {} components", self.actions.len())));
        }
        let mut cols = Vec::with_capacity(d);
        for (j, c) in self.actions.iter().enumerate() {
            let col = g.slice(z, j, 1)?;
            cols.push(match c {
                Component::Bounded { .. } => g.tanh(col),
                Component::Angle { .. } => {
                    let shift = g.value(col).mapv(|x| x - wrap_unit(x));
                    let shift = g.constant(shift);
                    g.sub(col, shift)?
                }
            });
        }
        let _ = n;
        Ok(g.concat(&cols)?)
    }

    /// `a - b` in feature space with angle components taken along the short arc.
    pub fn action_diff(&self, g: &mut Graph, a: Var, b: Var) -> Result<Var> {
        let d = g.sub(a, b)?;
        if self.actions.iter().all(|c| matches!(c, Component::Bounded { .. })) {
            return Ok(d);
        }
        let mut shift = g.value(d).clone();
        for (j, c) in self.actions.iter().enumerate() {
            let mut col = shift.column_mut(j);
            match c {
                Component::Bounded { .. } => col.fill(0.0),
                Component::Angle { .. } => col.mapv_inplace(|x| x - wrap_unit(x)),
            }
        }
        let shift = g.constant(shift);
        Ok(g.sub(d, shift)?)
    }

    /// Wraps angle columns of a feature batch in place (used on stored or
    /// perturbed features).
    pub fn wrap_features(&self, f: &mut Array2<f64>) {
        for (j, c) in self.actions.iter().enumerate() {
            if let Component::Angle { .. } = c {
                f.column_mut(j).mapv_inplace(wrap_unit);
            }
        }
    }

    /// Clamps bounded and wraps angle features of one action.
    pub fn project_features(&self, f: &mut [f64]) {
        for (v, c) in f.iter_mut().zip(&self.actions) {
            *v = match c {
                Component::Bounded { .. } => v.clamp(-1.0, 1.0),
                Component::Angle { .. } => wrap_unit(*v),
            };
        }
    }
}

/// Mean over the batch of the per-row L1 norm.
pub fn l1_mean(g: &mut Graph, diff: Var) -> Var {
    let n = g.shape(diff).0.max(1) as f64;
    let a = g.abs(diff);
    let s = g.sum(a);
    g.scale(s, 1.0 / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn codec() -> Codec {
        Codec::planar(Roi::new(-1.0, 1.0, -2.0, 2.0).unwrap(), 4.0).unwrap()
    }

    #[test]
    fn wrap_unit_range() {
        for x in [-5.0, -1.0, -0.999, 0.0, 0.5, 1.0, 1.0001, 3.0, 7.3] {
            let w = wrap_unit(x);
            assert!(w > -1.0 && w <= 1.0, "{x} -> {w}");
            assert!(((x - w) / 2.0 - ((x - w) / 2.0).round()).abs() < 1e-12);
        }
    }

    #[test]
    fn action_round_trip() {
        let c = codec();
        for a in [[0.0, 0.0], [1.0, 3.0], [3.9, -3.0], [2.0, std::f64::consts::PI]] {
            let back = c.decode_action(&c.encode_action(&a));
            assert!((back[0] - a[0]).abs() < 1e-12);
            assert!((back[1] - a[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn angle_difference_takes_short_arc() {
        let c = codec();
        let mut g = Graph::new();
        let a = g.constant(Array2::from_shape_vec((1, 2), vec![0.0, 0.95]).unwrap());
        let b = g.constant(Array2::from_shape_vec((1, 2), vec![0.5, -0.95]).unwrap());
        let d = c.action_diff(&mut g, a, b).unwrap();
        let v = g.value(d);
        assert!((v[[0, 0]] + 0.5).abs() < 1e-12);
        assert!((v[[0, 1]] + 0.1).abs() < 1e-12);
    }

    #[test]
    fn compass_course_decodes_into_0_360() {
        let c = Codec::new(
            Roi::new(0.0, 1.0, 0.0, 1.0).unwrap(),
            vec![Component::Angle { period: 360.0, offset: 180.0 }],
        )
        .unwrap();
        for cog in [0.0, 10.0, 179.0, 181.0, 359.5] {
            let back = c.decode_action(&c.encode_action(&[cog]))[0];
            assert!((back - cog).abs() < 1e-9, "{cog} -> {back}");
        }
    }
}
