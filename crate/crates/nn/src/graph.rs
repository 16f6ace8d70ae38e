//! Reverse-mode tape.
//!
//! Every node stores its forward value. Backward rules in [`Graph::grad`] are
//! expressed with the same graph operations, so a gradient is itself a
//! differentiable node.

use std::rc::Rc;

use ndarray::{concatenate, s, Array2, Axis};

use crate::error::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    /// Elementwise product with a constant array (relu, abs and friends).
    Mask(usize, Rc<Array2<f64>>),
    Tanh(usize),
    Sigmoid(usize),
    Exp(usize),
    Log(usize),
    Sin(usize),
    Cos(usize),
    Sqrt(usize),
    Square(usize),
    Recip(usize),
    Elu(usize),
    Softplus(usize),
    SumAll(usize),
    SumRows(usize),
    SumCols(usize),
    BroadcastAll(usize),
    BroadcastCols(usize),
    BroadcastRows(usize),
    Transpose(usize),
    Concat(Vec<usize>),
    Slice(usize, usize),
    Pad(usize, usize),
}

impl Op {
    fn parents(&self) -> Vec<usize> {
        use Op::*;
        match self {
            Leaf => vec![],
            MatMul(a, b) | Add(a, b) | AddRow(a, b) | Sub(a, b) | Mul(a, b) => vec![*a, *b],
            Scale(a, _) | AddScalar(a) | Mask(a, _) | Slice(a, _) | Pad(a, _) => vec![*a],
            Tanh(a) | Sigmoid(a) | Exp(a) | Log(a) | Sin(a) | Cos(a) | Sqrt(a) | Square(a)
            | Recip(a) | Elu(a) | Softplus(a) | SumAll(a) | SumRows(a) | SumCols(a)
            | BroadcastAll(a) | BroadcastCols(a) | BroadcastRows(a) | Transpose(a) => vec![*a],
            Concat(parts) => parts.clone(),
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    value: Array2<f64>,
    op: Op,
    requires_grad: bool,
}

/// Numeric gradients of one scalar output, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        let requires_grad = op.parents().iter().any(|&p| self.nodes[p].requires_grad);
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that gradients do not flow into.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad: false });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that gradients are tracked for (parameters or differentiated inputs).
    pub fn variable(&mut self, value: Array2<f64>) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad: true });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let value = self.nodes[a.0].value.mapv(f);
        self.push(value, op)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        if ac != br {
            return Err(NnError::Shape(format!("matmul [{ar},{ac}] x [{br},{bc}]")));
        }
        let value = self.value(a).dot(self.value(b));
        Ok(self.push(value, Op::MatMul(a.0, b.0)))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(NnError::Shape(format!("{what} {:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let value = self.value(a) + self.value(b);
        Ok(self.push(value, Op::Add(a.0, b.0)))
    }

    /// Adds a `[1, m]` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (_, ac) = self.shape(a);
        if self.shape(row) != (1, ac) {
            return Err(NnError::Shape(format!("add_row {:?} + {:?}", self.shape(a), self.shape(row))));
        }
        let value = self.value(a) + self.value(row);
        Ok(self.push(value, Op::AddRow(a.0, row.0)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let value = self.value(a) - self.value(b);
        Ok(self.push(value, Op::Sub(a.0, b.0)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let value = self.value(a) * self.value(b);
        Ok(self.push(value, Op::Mul(a.0, b.0)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, Op::Scale(a.0, c), |x| c * x)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.map(a, Op::AddScalar(a.0), |x| x + c)
    }

    /// Elementwise product with a constant array of the same shape.
    pub fn mask(&mut self, a: Var, mask: Array2<f64>) -> Result<Var> {
        if mask.dim() != self.shape(a) {
            return Err(NnError::Shape(format!("mask {:?} on {:?}", mask.dim(), self.shape(a))));
        }
        let value = self.value(a) * &mask;
        Ok(self.push(value, Op::Mask(a.0, Rc::new(mask))))
    }

    fn mask_shared(&mut self, a: Var, mask: Rc<Array2<f64>>) -> Var {
        let value = self.value(a) * &*mask;
        self.push(value, Op::Mask(a.0, mask))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let m = self.value(a).mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
        self.mask_shared(a, Rc::new(m))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let m = self.value(a).mapv(|x| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 });
        self.mask_shared(a, Rc::new(m))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, Op::Tanh(a.0), f64::tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, Op::Sigmoid(a.0), sigmoid)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, Op::Exp(a.0), f64::exp)
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.map(a, Op::Log(a.0), f64::ln)
    }

    pub fn sin(&mut self, a: Var) -> Var {
        self.map(a, Op::Sin(a.0), f64::sin)
    }

    pub fn cos(&mut self, a: Var) -> Var {
        self.map(a, Op::Cos(a.0), f64::cos)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.map(a, Op::Sqrt(a.0), f64::sqrt)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.map(a, Op::Square(a.0), |x| x * x)
    }

    pub fn recip(&mut self, a: Var) -> Var {
        self.map(a, Op::Recip(a.0), f64::recip)
    }

    pub fn elu(&mut self, a: Var) -> Var {
        self.map(a, Op::Elu(a.0), elu)
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.map(a, Op::Softplus(a.0), softplus)
    }

    /// Sum of all entries as a `[1, 1]` node.
    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).sum();
        self.push(Array2::from_elem((1, 1), total), Op::SumAll(a.0))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1) as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Row sums, `[n, m] -> [n, 1]`.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let v = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(v, Op::SumRows(a.0))
    }

    /// Column sums, `[n, m] -> [1, m]`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let v = self.value(a).sum_axis(Axis(0)).insert_axis(Axis(0));
        self.push(v, Op::SumCols(a.0))
    }

    fn broadcast_all(&mut self, a: Var, shape: (usize, usize)) -> Var {
        let v = Array2::from_elem(shape, self.scalar(a));
        self.push(v, Op::BroadcastAll(a.0))
    }

    /// `[n, 1] -> [n, m]`.
    pub fn broadcast_cols(&mut self, a: Var, m: usize) -> Result<Var> {
        let (n, c) = self.shape(a);
        if c != 1 {
            return Err(NnError::Shape(format!("broadcast_cols on [{n},{c}]")));
        }
        let v = self.value(a).broadcast((n, m)).expect("checked").to_owned();
        Ok(self.push(v, Op::BroadcastCols(a.0)))
    }

    /// `[1, m] -> [n, m]`.
    pub fn broadcast_rows(&mut self, a: Var, n: usize) -> Result<Var> {
        let (r, m) = self.shape(a);
        if r != 1 {
            return Err(NnError::Shape(format!("broadcast_rows on [{r},{m}]")));
        }
        let v = self.value(a).broadcast((n, m)).expect("checked").to_owned();
        Ok(self.push(v, Op::BroadcastRows(a.0)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).t().as_standard_layout().into_owned();
        self.push(v, Op::Transpose(a.0))
    }

    /// Concatenates along the feature axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(NnError::Shape("concat of nothing".into()));
        }
        let rows = self.shape(parts[0]).0;
        if parts.iter().any(|&p| self.shape(p).0 != rows) {
            return Err(NnError::Shape("concat with differing batch sizes".into()));
        }
        if parts.len() == 1 {
            return Ok(parts[0]);
        }
        let views: Vec<_> = parts.iter().map(|&p| self.nodes[p.0].value.view()).collect();
        let v = concatenate(Axis(1), &views).map_err(|e| NnError::Shape(e.to_string()))?;
        Ok(self.push(v, Op::Concat(parts.iter().map(|p| p.0).collect())))
    }

    /// Columns `start..start + len`.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (_, m) = self.shape(a);
        if start + len > m {
            return Err(NnError::Shape(format!("slice {start}+{len} of width {m}")));
        }
        let v = self.value(a).slice(s![.., start..start + len]).to_owned();
        Ok(self.push(v, Op::Slice(a.0, start)))
    }

    /// Places `a` at column `start` of a zero matrix with `total` columns.
    fn pad(&mut self, a: Var, start: usize, total: usize) -> Var {
        let (n, m) = self.shape(a);
        let mut v = Array2::zeros((n, total));
        v.slice_mut(s![.., start..start + m]).assign(self.value(a));
        self.push(v, Op::Pad(a.0, start))
    }

    fn check_scalar_output(&self, output: Var) -> Result<()> {
        if self.shape(output) != (1, 1) {
            return Err(NnError::Shape(format!("gradient of non-scalar {:?}", self.shape(output))));
        }
        if !self.scalar(output).is_finite() {
            return Err(NnError::NonFinite(format!("loss value {}", self.scalar(output))));
        }
        Ok(())
    }

    /// Numeric reverse pass. Gradients are reported for every node that
    /// depends on a [`Graph::variable`].
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        self.check_scalar_output(output)?;
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; output.0 + 1];
        if self.nodes[output.0].requires_grad {
            grads[output.0] = Some(Array2::ones((1, 1)));
        }
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let mut acc = |idx: usize, contrib: Array2<f64>| {
                if !self.nodes[idx].requires_grad {
                    return;
                }
                match &mut grads[idx] {
                    Some(existing) => *existing += &contrib,
                    slot => *slot = Some(contrib),
                }
            };
            let val = |idx: usize| &self.nodes[idx].value;
            let y = &node.value;
            use Op::*;
            match &node.op {
                Leaf => {}
                MatMul(a, b) => {
                    if self.nodes[*a].requires_grad {
                        acc(*a, g.dot(&val(*b).t()));
                    }
                    if self.nodes[*b].requires_grad {
                        acc(*b, val(*a).t().dot(&g));
                    }
                }
                Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g.clone());
                }
                AddRow(a, b) => {
                    acc(*b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(*a, g.clone());
                }
                Sub(a, b) => {
                    acc(*b, -&g);
                    acc(*a, g.clone());
                }
                Mul(a, b) => {
                    acc(*a, &g * val(*b));
                    acc(*b, &g * val(*a));
                }
                Scale(a, c) => acc(*a, &g * *c),
                AddScalar(a) => acc(*a, g.clone()),
                Mask(a, m) => acc(*a, &g * &**m),
                Tanh(a) => acc(*a, &g * &y.mapv(|t| 1.0 - t * t)),
                Sigmoid(a) => acc(*a, &g * &y.mapv(|t| t * (1.0 - t))),
                Exp(a) => acc(*a, &g * y),
                Log(a) => acc(*a, &g / val(*a)),
                Sin(a) => acc(*a, &g * &val(*a).mapv(f64::cos)),
                Cos(a) => acc(*a, &g * &val(*a).mapv(|x| -x.sin())),
                Sqrt(a) => acc(*a, &g * &y.mapv(|t| 0.5 / t)),
                Square(a) => acc(*a, &g * &val(*a).mapv(|x| 2.0 * x)),
                Recip(a) => acc(*a, &g * &y.mapv(|t| -t * t)),
                Elu(a) => {
                    let d = ndarray::Zip::from(val(*a)).and(y).map_collect(|&x, &t| if x > 0.0 { 1.0 } else { t + 1.0 });
                    acc(*a, &g * &d)
                }
                Softplus(a) => acc(*a, &g * &val(*a).mapv(sigmoid)),
                SumAll(a) => acc(*a, Array2::from_elem(val(*a).dim(), g[[0, 0]])),
                SumRows(a) => acc(*a, g.broadcast(val(*a).dim()).expect("column").to_owned()),
                SumCols(a) => acc(*a, g.broadcast(val(*a).dim()).expect("row").to_owned()),
                BroadcastAll(a) => acc(*a, Array2::from_elem((1, 1), g.sum())),
                BroadcastCols(a) => acc(*a, g.sum_axis(Axis(1)).insert_axis(Axis(1))),
                BroadcastRows(a) => acc(*a, g.sum_axis(Axis(0)).insert_axis(Axis(0))),
                Transpose(a) => acc(*a, g.t().to_owned()),
                Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let w = val(p).ncols();
                        acc(p, g.slice(s![.., off..off + w]).to_owned());
                        off += w;
                    }
                }
                Slice(a, start) => {
                    let mut full = Array2::zeros(val(*a).dim());
                    full.slice_mut(s![.., *start..*start + g.ncols()]).assign(&g);
                    acc(*a, full)
                }
                Pad(a, start) => {
                    let w = val(*a).ncols();
                    acc(*a, g.slice(s![.., *start..*start + w]).to_owned())
                }
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Symbolic reverse pass: appends nodes computing `d output / d wrt[k]`
    /// and returns them. The returned nodes can be differentiated again.
    /// A `wrt` entry the output does not depend on yields a zero constant.
    pub fn grad(&mut self, output: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        self.check_scalar_output(output)?;
        let end = output.0 + 1;
        // Nodes lying on a path from some `wrt` to the output.
        let mut reaches = vec![false; end];
        for w in wrt {
            if w.0 < end {
                reaches[w.0] = true;
            }
        }
        for i in 0..end {
            if !reaches[i] && self.nodes[i].op.parents().iter().any(|&p| reaches[p]) {
                reaches[i] = true;
            }
        }
        let mut grads: Vec<Option<Var>> = vec![None; end];
        if reaches[output.0] {
            grads[output.0] = Some(self.constant(Array2::ones((1, 1))));
        }
        for i in (0..end).rev() {
            let Some(g) = grads[i] else { continue };
            if wrt.iter().any(|w| w.0 == i) && self.nodes[i].op.parents().is_empty() {
                continue;
            }
            let op = self.nodes[i].op.clone();
            let y = Var(i);
            let mut contribs: Vec<(usize, Var)> = Vec::new();
            use Op::*;
            match op {
                Leaf => {}
                MatMul(a, b) => {
                    if reaches[a] {
                        let bt = self.transpose(Var(b));
                        contribs.push((a, self.matmul(g, bt)?));
                    }
                    if reaches[b] {
                        let at = self.transpose(Var(a));
                        contribs.push((b, self.matmul(at, g)?));
                    }
                }
                Add(a, b) => {
                    contribs.push((a, g));
                    contribs.push((b, g));
                }
                AddRow(a, b) => {
                    contribs.push((a, g));
                    if reaches[b] {
                        contribs.push((b, self.sum_cols(g)));
                    }
                }
                Sub(a, b) => {
                    contribs.push((a, g));
                    if reaches[b] {
                        contribs.push((b, self.neg(g)));
                    }
                }
                Mul(a, b) => {
                    if reaches[a] {
                        contribs.push((a, self.mul(g, Var(b))?));
                    }
                    if reaches[b] {
                        contribs.push((b, self.mul(g, Var(a))?));
                    }
                }
                Scale(a, c) => contribs.push((a, self.scale(g, c))),
                AddScalar(a) => contribs.push((a, g)),
                Mask(a, m) => contribs.push((a, self.mask_shared(g, m))),
                Tanh(a) => {
                    let y2 = self.square(y);
                    let d = self.scale(y2, -1.0);
                    let d = self.add_scalar(d, 1.0);
                    contribs.push((a, self.mul(g, d)?));
                }
                Sigmoid(a) => {
                    let one_minus = self.scale(y, -1.0);
                    let one_minus = self.add_scalar(one_minus, 1.0);
                    let d = self.mul(y, one_minus)?;
                    contribs.push((a, self.mul(g, d)?));
                }
                Exp(a) => contribs.push((a, self.mul(g, y)?)),
                Log(a) => {
                    let r = self.recip(Var(a));
                    contribs.push((a, self.mul(g, r)?));
                }
                Sin(a) => {
                    let c = self.cos(Var(a));
                    contribs.push((a, self.mul(g, c)?));
                }
                Cos(a) => {
                    let s = self.sin(Var(a));
                    let gs = self.mul(g, s)?;
                    contribs.push((a, self.neg(gs)));
                }
                Sqrt(a) => {
                    let r = self.recip(y);
                    let r = self.scale(r, 0.5);
                    contribs.push((a, self.mul(g, r)?));
                }
                Square(a) => {
                    let d = self.scale(Var(a), 2.0);
                    contribs.push((a, self.mul(g, d)?));
                }
                Recip(a) => {
                    let y2 = self.square(y);
                    let gy = self.mul(g, y2)?;
                    contribs.push((a, self.neg(gy)));
                }
                Elu(a) => {
                    let pos = Rc::new(self.value(Var(a)).mapv(|x| if x > 0.0 { 1.0 } else { 0.0 }));
                    let neg = Rc::new(pos.mapv(|p| 1.0 - p));
                    // exp of the negative part only, so large inputs cannot overflow.
                    let xn = self.mask_shared(Var(a), neg.clone());
                    let e = self.exp(xn);
                    let e = self.mask_shared(e, neg);
                    let ones = self.constant((*pos).clone());
                    let d = self.add(e, ones)?;
                    contribs.push((a, self.mul(g, d)?));
                }
                Softplus(a) => {
                    let s = self.sigmoid(Var(a));
                    contribs.push((a, self.mul(g, s)?));
                }
                SumAll(a) => {
                    let shape = self.shape(Var(a));
                    contribs.push((a, self.broadcast_all(g, shape)));
                }
                SumRows(a) => {
                    let m = self.shape(Var(a)).1;
                    contribs.push((a, self.broadcast_cols(g, m)?));
                }
                SumCols(a) => {
                    let n = self.shape(Var(a)).0;
                    contribs.push((a, self.broadcast_rows(g, n)?));
                }
                BroadcastAll(a) => contribs.push((a, self.sum(g))),
                BroadcastCols(a) => contribs.push((a, self.sum_rows(g))),
                BroadcastRows(a) => contribs.push((a, self.sum_cols(g))),
                Transpose(a) => contribs.push((a, self.transpose(g))),
                Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.shape(Var(p)).1;
                        if reaches[p] {
                            contribs.push((p, self.slice(g, off, w)?));
                        }
                        off += w;
                    }
                }
                Slice(a, start) => {
                    let total = self.shape(Var(a)).1;
                    contribs.push((a, self.pad(g, start, total)));
                }
                Pad(a, start) => {
                    let w = self.shape(Var(a)).1;
                    contribs.push((a, self.slice(g, start, w)?));
                }
            }
            for (p, c) in contribs {
                if !reaches[p] {
                    continue;
                }
                grads[p] = Some(match grads[p] {
                    Some(prev) => self.add(prev, c)?,
                    None => c,
                });
            }
        }
        let mut out = Vec::with_capacity(wrt.len());
        for w in wrt {
            match grads.get(w.0).copied().flatten() {
                Some(g) => out.push(g),
                None => {
                    let shape = self.shape(*w);
                    out.push(self.constant(Array2::zeros(shape)));
                }
            }
        }
        Ok(out)
    }
}
