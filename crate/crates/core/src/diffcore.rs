//! Reverse-mode automatic differentiation over dense vectors.
//!
//! A [`Graph`] is an append-only list of vector-valued nodes. Leaves hold
//! values set by the caller; every other node is a primitive op whose inputs
//! were appended before it, so the node list is always topologically
//! ordered. The graph is built once and then re-run: `forward` recomputes
//! every interior node from the current leaf values and `backward` fills the
//! adjoint buffers of all nodes that (transitively) depend on a trainable
//! leaf. Constant subtrees never receive adjoints.
//!
//! Kinks: `relu` and `max_const` use a zero subgradient at the kink.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// Vector plus a broadcast length-1 node.
    AddScalar(NodeId, NodeId),
    /// Vector times a broadcast length-1 node.
    MulScalar(NodeId, NodeId),
    Scale(NodeId, f64),
    Shift(NodeId, f64),
    /// Row-major `rows x cols` matrix (and optional bias) read in place from
    /// a parameter node, applied to `x`.
    MatVec {
        w: NodeId,
        offset: usize,
        rows: usize,
        cols: usize,
        bias: Option<usize>,
        x: NodeId,
    },
    Sum(NodeId),
    Concat(Vec<NodeId>),
    Exp(NodeId),
    Log(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    Softplus(NodeId),
    /// Softmax applied independently to consecutive blocks.
    Softmax(NodeId, Vec<usize>),
    MaxConst(NodeId, f64),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    len: usize,
    grad: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    values: Vec<Vec<f64>>,
    adjoints: Vec<Vec<f64>>,
    leaves: Vec<NodeId>,
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

    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    fn push(&mut self, op: Op, len: usize, grad: bool) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, len, grad });
        self.values.push(vec![0.0; len]);
        self.adjoints.push(if grad { vec![0.0; len] } else { Vec::new() });
        id
    }

    fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes
            .get(id.0)
            .ok_or_else(|| Error::Shape(format!("unknown node {}", id.0)))
    }

    fn node_len(&self, id: NodeId) -> Result<usize> {
        self.node(id).map(|n| n.len)
    }

    fn needs_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].grad
    }

    fn same_len(&self, a: NodeId, b: NodeId, what: &str) -> Result<usize> {
        let (la, lb) = (self.node_len(a)?, self.node_len(b)?);
        if la != lb {
            return Err(Error::Shape(format!("{what}: lengths {la} and {lb}")));
        }
        Ok(la)
    }

    fn scalar(&self, s: NodeId, what: &str) -> Result<()> {
        match self.node_len(s)? {
            1 => Ok(()),
            n => Err(Error::Shape(format!("{what}: expected a scalar node, got length {n}"))),
        }
    }

    /// Trainable leaf; receives an adjoint on `backward`.
    pub fn variable(&mut self, len: usize) -> NodeId {
        let id = self.push(Op::Leaf, len, true);
        self.leaves.push(id);
        id
    }

    /// Non-trainable leaf whose value is set later with [`Graph::set`].
    pub fn input(&mut self, len: usize) -> NodeId {
        let id = self.push(Op::Leaf, len, false);
        self.leaves.push(id);
        id
    }

    /// Non-trainable leaf initialised to `values`.
    pub fn constant(&mut self, values: &[f64]) -> NodeId {
        let id = self.input(values.len());
        self.values[id.0].copy_from_slice(values);
        id
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let len = self.same_len(a, b, "add")?;
        let grad = self.needs_grad(a) || self.needs_grad(b);
        Ok(self.push(Op::Add(a, b), len, grad))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let len = self.same_len(a, b, "sub")?;
        let grad = self.needs_grad(a) || self.needs_grad(b);
        Ok(self.push(Op::Sub(a, b), len, grad))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let len = self.same_len(a, b, "mul")?;
        let grad = self.needs_grad(a) || self.needs_grad(b);
        Ok(self.push(Op::Mul(a, b), len, grad))
    }

    pub fn add_scalar(&mut self, a: NodeId, s: NodeId) -> Result<NodeId> {
        self.scalar(s, "add_scalar")?;
        let len = self.node_len(a)?;
        let grad = self.needs_grad(a) || self.needs_grad(s);
        Ok(self.push(Op::AddScalar(a, s), len, grad))
    }

    pub fn mul_scalar(&mut self, a: NodeId, s: NodeId) -> Result<NodeId> {
        self.scalar(s, "mul_scalar")?;
        let len = self.node_len(a)?;
        let grad = self.needs_grad(a) || self.needs_grad(s);
        Ok(self.push(Op::MulScalar(a, s), len, grad))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let len = self.node_len(a)?;
        let grad = self.needs_grad(a);
        Ok(self.push(Op::Scale(a, c), len, grad))
    }

    pub fn shift(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let len = self.node_len(a)?;
        let grad = self.needs_grad(a);
        Ok(self.push(Op::Shift(a, c), len, grad))
    }

    /// `W x (+ b)` where `W` occupies `rows * cols` entries of `w` starting at
    /// `offset` and the bias, when given, `rows` entries starting at `bias`.
    pub fn matvec(
        &mut self,
        w: NodeId,
        offset: usize,
        rows: usize,
        cols: usize,
        bias: Option<usize>,
        x: NodeId,
    ) -> Result<NodeId> {
        let wlen = self.node_len(w)?;
        let xlen = self.node_len(x)?;
        if xlen != cols {
            return Err(Error::Shape(format!("matvec: input length {xlen}, expected {cols}")));
        }
        if offset + rows * cols > wlen || bias.is_some_and(|b| b + rows > wlen) {
            return Err(Error::Shape(format!(
                "matvec: {rows}x{cols} block at {offset} exceeds parameter length {wlen}"
            )));
        }
        let grad = self.needs_grad(w) || self.needs_grad(x);
        Ok(self.push(Op::MatVec { w, offset, rows, cols, bias, x }, rows, grad))
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.node_len(a)?;
        let grad = self.needs_grad(a);
        Ok(self.push(Op::Sum(a), 1, grad))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let mut len = 0;
        let mut grad = false;
        for &p in parts {
            len += self.node_len(p)?;
            grad |= self.needs_grad(p);
        }
        Ok(self.push(Op::Concat(parts.to_vec()), len, grad))
    }

    fn unary(&mut self, a: NodeId, make: fn(NodeId) -> Op) -> Result<NodeId> {
        let len = self.node_len(a)?;
        let grad = self.needs_grad(a);
        Ok(self.push(make(a), len, grad))
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Exp)
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Log)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Tanh)
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Relu)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Sigmoid)
    }

    pub fn softplus(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Softplus)
    }

    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let len = self.node_len(a)?;
        self.softmax_blocks(a, &[len])
    }

    /// Softmax over each consecutive block of `blocks` (which must cover `a`).
    pub fn softmax_blocks(&mut self, a: NodeId, blocks: &[usize]) -> Result<NodeId> {
        let len = self.node_len(a)?;
        if blocks.iter().sum::<usize>() != len || blocks.contains(&0) {
            return Err(Error::Shape(format!("softmax: blocks {blocks:?} do not cover length {len}")));
        }
        let grad = self.needs_grad(a);
        Ok(self.push(Op::Softmax(a, blocks.to_vec()), len, grad))
    }

    /// Elementwise `max(a, c)`.
    pub fn max_const(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let len = self.node_len(a)?;
        let grad = self.needs_grad(a);
        Ok(self.push(Op::MaxConst(a, c), len, grad))
    }

    pub fn set(&mut self, id: NodeId, values: &[f64]) -> Result<()> {
        let node = self.node(id)?;
        if !matches!(node.op, Op::Leaf) {
            return Err(Error::Contract(format!("node {} is not a leaf", id.0)));
        }
        if node.len != values.len() {
            return Err(Error::Shape(format!(
                "leaf {}: got {} values, expected {}",
                id.0,
                values.len(),
                node.len
            )));
        }
        self.values[id.0].copy_from_slice(values);
        Ok(())
    }

    /// Mutable access to a leaf buffer, for callers that refill noise in place.
    pub fn leaf_mut(&mut self, id: NodeId) -> Result<&mut [f64]> {
        if !matches!(self.node(id)?.op, Op::Leaf) {
            return Err(Error::Contract(format!("node {} is not a leaf", id.0)));
        }
        Ok(&mut self.values[id.0])
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.values[id.0]
    }

    /// Adjoint buffer; empty for nodes that do not depend on a variable.
    pub fn adjoint(&self, id: NodeId) -> &[f64] {
        &self.adjoints[id.0]
    }

    /// Sets every leaf (in creation order) and runs the forward pass,
    /// returning the value of the last node.
    pub fn forward_with(&mut self, leaf_values: &[&[f64]]) -> Result<&[f64]> {
        if leaf_values.len() != self.leaves.len() {
            return Err(Error::Shape(format!(
                "{} leaf values for {} leaves",
                leaf_values.len(),
                self.leaves.len()
            )));
        }
        for i in 0..self.leaves.len() {
            self.set(self.leaves[i], leaf_values[i])?;
        }
        self.forward()?;
        Ok(self.values.last().map(Vec::as_slice).unwrap_or(&[]))
    }

    pub fn forward(&mut self) -> Result<()> {
        for i in 0..self.nodes.len() {
            let (done, rest) = self.values.split_at_mut(i);
            let out = &mut rest[0];
            let v = |id: NodeId| done[id.0].as_slice();
            match &self.nodes[i].op {
                Op::Leaf => continue,
                Op::Add(a, b) => zip_into(out, v(*a), v(*b), |x, y| x + y),
                Op::Sub(a, b) => zip_into(out, v(*a), v(*b), |x, y| x - y),
                Op::Mul(a, b) => zip_into(out, v(*a), v(*b), |x, y| x * y),
                Op::AddScalar(a, s) => {
                    let s = v(*s)[0];
                    map_into(out, v(*a), |x| x + s)
                }
                Op::MulScalar(a, s) => {
                    let s = v(*s)[0];
                    map_into(out, v(*a), |x| x * s)
                }
                Op::Scale(a, c) => map_into(out, v(*a), |x| x * c),
                Op::Shift(a, c) => map_into(out, v(*a), |x| x + c),
                Op::MatVec { w, offset, rows, cols, bias, x } => {
                    let w = v(*w);
                    let x = v(*x);
                    let mat = &w[*offset..*offset + rows * cols];
                    for (r, o) in out.iter_mut().enumerate() {
                        let row = &mat[r * cols..(r + 1) * cols];
                        let dot: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
                        *o = dot + bias.map_or(0.0, |b| w[b + r]);
                    }
                }
                Op::Sum(a) => out[0] = v(*a).iter().sum(),
                Op::Concat(parts) => {
                    let mut at = 0;
                    for p in parts {
                        let src = v(*p);
                        out[at..at + src.len()].copy_from_slice(src);
                        at += src.len();
                    }
                }
                Op::Exp(a) => map_into(out, v(*a), math::exp),
                Op::Log(a) => map_into(out, v(*a), math::ln),
                Op::Tanh(a) => map_into(out, v(*a), math::tanh),
                Op::Relu(a) => map_into(out, v(*a), |x| if x > 0.0 { x } else { 0.0 }),
                Op::Sigmoid(a) => map_into(out, v(*a), math::sigmoid),
                Op::Softplus(a) => map_into(out, v(*a), math::softplus),
                Op::Softmax(a, blocks) => {
                    let src = v(*a);
                    let mut at = 0;
                    for &k in blocks {
                        softmax_into(&mut out[at..at + k], &src[at..at + k]);
                        at += k;
                    }
                }
                Op::MaxConst(a, c) => map_into(out, v(*a), |x| if x > *c { x } else { *c }),
            }
            if out.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteNode { node: i });
            }
        }
        Ok(())
    }

    /// Back-propagates from the scalar node `output` (seeded with 1).
    pub fn backward(&mut self, output: NodeId) -> Result<()> {
        if self.node_len(output)? != 1 {
            return Err(Error::Contract(format!("backward from non-scalar node {}", output.0)));
        }
        self.backward_from(output, &[1.0])
    }

    /// Vector-Jacobian product: back-propagates `seed` from `output`.
    pub fn backward_from(&mut self, output: NodeId, seed: &[f64]) -> Result<()> {
        if self.node_len(output)? != seed.len() {
            return Err(Error::Shape(format!("backward seed length {} for node {}", seed.len(), output.0)));
        }
        for adj in &mut self.adjoints {
            adj.iter_mut().for_each(|a| *a = 0.0);
        }
        if !self.nodes[output.0].grad {
            return Ok(());
        }
        self.adjoints[output.0].copy_from_slice(seed);

        let values = &self.values;
        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let (before, rest) = self.adjoints.split_at_mut(i);
            let up = rest[0].as_slice();
            let y = values[i].as_slice();
            let grad = |id: &NodeId| self.nodes[id.0].grad;
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    if grad(a) {
                        acc(&mut before[a.0], up, |u, _| u);
                    }
                    if grad(b) {
                        acc(&mut before[b.0], up, |u, _| u);
                    }
                }
                Op::Sub(a, b) => {
                    if grad(a) {
                        acc(&mut before[a.0], up, |u, _| u);
                    }
                    if grad(b) {
                        acc(&mut before[b.0], up, |u, _| -u);
                    }
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&values[a.0], &values[b.0]);
                    if grad(a) {
                        acc(&mut before[a.0], up, |u, j| u * vb[j]);
                    }
                    if grad(b) {
                        acc(&mut before[b.0], up, |u, j| u * va[j]);
                    }
                }
                Op::AddScalar(a, s) => {
                    if grad(a) {
                        acc(&mut before[a.0], up, |u, _| u);
                    }
                    if grad(s) {
                        before[s.0][0] += up.iter().sum::<f64>();
                    }
                }
                Op::MulScalar(a, s) => {
                    let sv = values[s.0][0];
                    if grad(a) {
                        acc(&mut before[a.0], up, |u, _| u * sv);
                    }
                    if grad(s) {
                        let va = &values[a.0];
                        before[s.0][0] += up.iter().zip(va).map(|(u, x)| u * x).sum::<f64>();
                    }
                }
                Op::Scale(a, c) => acc(&mut before[a.0], up, |u, _| u * c),
                Op::Shift(a, _) => acc(&mut before[a.0], up, |u, _| u),
                Op::MatVec { w, offset, rows, cols, bias, x } => {
                    let (rows, cols) = (*rows, *cols);
                    let wv = &values[w.0];
                    let xv = &values[x.0];
                    if grad(x) {
                        let dx = &mut before[x.0];
                        for r in 0..rows {
                            let u = up[r];
                            if u == 0.0 {
                                continue;
                            }
                            let row = &wv[offset + r * cols..offset + (r + 1) * cols];
                            dx.iter_mut().zip(row).for_each(|(d, wrc)| *d += u * wrc);
                        }
                    }
                    if grad(w) {
                        let dw = &mut before[w.0];
                        for r in 0..rows {
                            let u = up[r];
                            if u == 0.0 {
                                continue;
                            }
                            let row = &mut dw[offset + r * cols..offset + (r + 1) * cols];
                            row.iter_mut().zip(xv).for_each(|(d, xc)| *d += u * xc);
                        }
                        if let Some(b) = bias {
                            dw[*b..*b + rows].iter_mut().zip(up).for_each(|(d, u)| *d += u);
                        }
                    }
                }
                Op::Sum(a) => {
                    let u = up[0];
                    before[a.0].iter_mut().for_each(|d| *d += u);
                }
                Op::Concat(parts) => {
                    let mut at = 0;
                    for p in parts {
                        let n = self.nodes[p.0].len;
                        if grad(p) {
                            acc(&mut before[p.0], &up[at..at + n], |u, _| u);
                        }
                        at += n;
                    }
                }
                Op::Exp(a) => acc(&mut before[a.0], up, |u, j| u * y[j]),
                Op::Log(a) => {
                    let va = &values[a.0];
                    acc(&mut before[a.0], up, |u, j| u / va[j])
                }
                Op::Tanh(a) => acc(&mut before[a.0], up, |u, j| u * (1.0 - y[j] * y[j])),
                Op::Relu(a) => {
                    let va = &values[a.0];
                    acc(&mut before[a.0], up, |u, j| if va[j] > 0.0 { u } else { 0.0 })
                }
                Op::Sigmoid(a) => acc(&mut before[a.0], up, |u, j| u * y[j] * (1.0 - y[j])),
                Op::Softplus(a) => {
                    let va = &values[a.0];
                    acc(&mut before[a.0], up, |u, j| u * math::sigmoid(va[j]))
                }
                Op::Softmax(a, blocks) => {
                    let da = &mut before[a.0];
                    let mut at = 0;
                    for &k in blocks {
                        let (ys, us) = (&y[at..at + k], &up[at..at + k]);
                        let s: f64 = ys.iter().zip(us).map(|(y, u)| y * u).sum();
                        for j in 0..k {
                            da[at + j] += ys[j] * (us[j] - s);
                        }
                        at += k;
                    }
                }
                Op::MaxConst(a, c) => {
                    let va = &values[a.0];
                    acc(&mut before[a.0], up, |u, j| if va[j] > *c { u } else { 0.0 })
                }
            }
        }
        Ok(())
    }

    /// Adjoints of every leaf, in creation order (empty for constants).
    pub fn leaf_gradients(&self) -> Vec<&[f64]> {
        self.leaves.iter().map(|&l| self.adjoint(l)).collect()
    }
}

#[inline]
fn map_into(out: &mut [f64], a: &[f64], f: impl Fn(f64) -> f64) {
    out.iter_mut().zip(a).for_each(|(o, &x)| *o = f(x));
}

#[inline]
fn zip_into(out: &mut [f64], a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) {
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = f(x, y);
    }
}

#[inline]
fn acc(dst: &mut [f64], up: &[f64], f: impl Fn(f64, usize) -> f64) {
    for (j, (d, &u)) in dst.iter_mut().zip(up).enumerate() {
        *d += f(u, j);
    }
}

/// Max-subtracted softmax of `src` written to `out`.
pub fn softmax_into(out: &mut [f64], src: &[f64]) {
    let max = src.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(src) {
        *o = math::exp(x - max);
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

/// Flat parameter buffer with a gradient of the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub grads: Vec<f64>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        let grads = vec![0.0; values.len()];
        Self { values, grads }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn grads_finite(&self) -> bool {
        self.grads.iter().all(|g| g.is_finite())
    }
}

/// Largest relative disagreement between an analytic gradient and central
/// differences: `max_i |g_i - fd_i| / max(|g_i|, |fd_i|, 1e-3)`. The floor
/// keeps coordinates with a vanishing gradient from dividing rounding noise
/// by zero.
///
/// `f` returns the value and analytic gradient at a point.
pub fn grad_check<F>(mut f: F, point: &[f64], eps: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(eps > 0.0) {
        return Err(Error::Contract(format!("grad_check step {eps} must be positive")));
    }
    let (_, analytic) = f(point)?;
    if analytic.len() != point.len() {
        return Err(Error::Shape(format!(
            "gradient length {} for point length {}",
            analytic.len(),
            point.len()
        )));
    }
    let mut probe = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..point.len() {
        probe[i] = point[i] + eps;
        let up = f(&probe).map_err(|_| Error::NonFiniteProbe { coordinate: i })?.0;
        probe[i] = point[i] - eps;
        let down = f(&probe).map_err(|_| Error::NonFiniteProbe { coordinate: i })?.0;
        probe[i] = point[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFiniteProbe { coordinate: i });
        }
        let numeric = (up - down) / (2.0 * eps);
        worst = worst.max((analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-3));
    }
    Ok(worst)
}
