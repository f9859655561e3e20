//! Define-by-run reverse-mode differentiation.
//!
//! A [`Graph`] records every operation executed during one forward pass.
//! [`Graph::backward`] replays the records in reverse and accumulates
//! parameter gradients into a [`Gradients`] buffer. Parameters are read from
//! the borrowed [`ParamStore`] and never copied into the graph.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tensor::{Gradients, ParamId, ParamStore, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Softmax(Var),
    ConcatSeq(Vec<Var>),
    MaxPoolSeq { input: Var, argmax: Vec<usize> },
    CrossEntropy { logits: Var, target: usize, probs: Vec<f64> },
    Row(Var, usize),
    Slice(Var, usize),
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    /// `None` for parameters, whose value lives in the store.
    value: Option<Tensor>,
    op: Op,
    needs_grad: bool,
}

pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, Var>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match (&self.nodes[v.0].value, &self.nodes[v.0].op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.get(*id),
            _ => unreachable!("node without value"),
        }
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).item()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Node for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_nodes.get(&id) {
            return v;
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
            needs_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes.insert(id, v);
        v
    }

    /// `a · b` for `a: [m, k]` and `b: [k, n]` or `b: [k]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() > 2 {
            return Err(Error::dim(
                "matmul",
                format!("unsupported ranks {:?} x {:?}", ta.shape(), tb.shape()),
            ));
        }
        let (m, k) = ta.dims2();
        let (k2, n) = tb.dims2();
        if k != k2 {
            return Err(Error::dim(
                "matmul",
                format!("inner dimensions differ: {:?} x {:?}", ta.shape(), tb.shape()),
            ));
        }
        let (ad, bd) = (ta.data(), tb.data());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = &ad[i * k..(i + 1) * k];
            let orow = &mut out[i * n..(i + 1) * n];
            for (p, &av) in arow.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let brow = &bd[p * n..(p + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
        let shape = if tb.rank() == 1 { vec![m] } else { vec![m, n] };
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::new(shape, out)?, Op::MatMul(a, b), needs))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.rank() != 2 {
            return Err(Error::dim("transpose", format!("rank-2 input required, got {:?}", t.shape())));
        }
        let (r, c) = t.dims2();
        let d = t.data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = d[i * c + j];
            }
        }
        let needs = self.needs(a);
        Ok(self.push(Tensor::new(vec![c, r], out)?, Op::Transpose(a), needs))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::dim(op, format!("shapes differ: {sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn zip_with(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, rec: Op) -> Result<Var> {
        self.same_shape(op, a, b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let shape = ta.shape().to_vec();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::new(shape, data)?, rec, needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, rec: Op) -> Var {
        let t = self.value(a);
        let data = t.data().iter().map(|&x| f(x)).collect();
        let shape = t.shape().to_vec();
        let needs = self.needs(a);
        self.push(Tensor::new(shape, data).expect("same shape"), rec, needs)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        self.map(a, |x| x * factor, Op::Scale(a, factor))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, |x| if x > 0.0 { x } else { 0.0 }, Op::Relu(a))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.rank() != 1 {
            return Err(Error::dim("softmax", format!("vector input required, got {:?}", t.shape())));
        }
        let out = softmax(t.data());
        let needs = self.needs(a);
        Ok(self.push(Tensor::vector(out), Op::Softmax(a), needs))
    }

    /// Stacks `d`-vectors as the columns of a `[d, n]` matrix.
    pub fn concat_seq(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::dim("concat_seq", "no input vectors"));
        };
        let d = self.value(first).len();
        for &p in parts {
            let t = self.value(p);
            if t.rank() != 1 || t.len() != d {
                return Err(Error::dim(
                    "concat_seq",
                    format!("expected [{d}] vectors, got {:?}", t.shape()),
                ));
            }
        }
        let n = parts.len();
        let mut out = vec![0.0; d * n];
        for (c, &p) in parts.iter().enumerate() {
            for (r, &v) in self.value(p).data().iter().enumerate() {
                out[r * n + c] = v;
            }
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(Tensor::new(vec![d, n], out)?, Op::ConcatSeq(parts.to_vec()), needs))
    }

    /// Row-wise maximum of a `[d, n]` matrix; ties resolve to the lowest column.
    pub fn maxpool_seq(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.rank() != 2 {
            return Err(Error::dim("maxpool_seq", format!("matrix input required, got {:?}", t.shape())));
        }
        let (d, n) = t.dims2();
        let mut argmax = Vec::with_capacity(d);
        let mut out = Vec::with_capacity(d);
        for r in 0..d {
            let row = t.row(r);
            let mut best = 0;
            for c in 1..n {
                if row[c] > row[best] {
                    best = c;
                }
            }
            argmax.push(best);
            out.push(row[best]);
        }
        let needs = self.needs(a);
        Ok(self.push(Tensor::vector(out), Op::MaxPoolSeq { input: a, argmax }, needs))
    }

    /// `-log softmax(logits)[target]`, evaluated through log-sum-exp.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let t = self.value(logits);
        if t.rank() != 1 {
            return Err(Error::dim("cross_entropy", format!("vector logits required, got {:?}", t.shape())));
        }
        if target >= t.len() {
            return Err(Error::Index {
                op: "cross_entropy",
                index: target,
                len: t.len(),
            });
        }
        let lse = log_sum_exp(t.data());
        let loss = (lse - t.data()[target]).max(0.0);
        let probs = t.data().iter().map(|&x| (x - lse).exp()).collect();
        let needs = self.needs(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy { logits, target, probs },
            needs,
        ))
    }

    /// Row `index` of a `[n, e]` matrix as an `[e]` vector.
    pub fn row(&mut self, a: Var, index: usize) -> Result<Var> {
        let t = self.value(a);
        if t.rank() != 2 {
            return Err(Error::dim("row", format!("matrix input required, got {:?}", t.shape())));
        }
        let (n, _) = t.dims2();
        if index >= n {
            return Err(Error::Index { op: "row", index, len: n });
        }
        let out = t.row(index).to_vec();
        let needs = self.needs(a);
        Ok(self.push(Tensor::vector(out), Op::Row(a, index), needs))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(a);
        if t.rank() != 1 || len == 0 || start + len > t.len() {
            return Err(Error::dim(
                "slice",
                format!("[{start}..{}] out of bounds for {:?}", start + len, t.shape()),
            ));
        }
        let out = t.data()[start..start + len].to_vec();
        let needs = self.needs(a);
        Ok(self.push(Tensor::vector(out), Op::Slice(a, start), needs))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let needs = self.needs(a);
        self.push(Tensor::scalar(s), Op::Sum(a), needs)
    }

    /// Sum of scalar nodes; an empty list yields a zero constant.
    pub fn add_all(&mut self, terms: &[Var]) -> Result<Var> {
        let Some((&first, rest)) = terms.split_first() else {
            return Ok(self.constant(Tensor::scalar(0.0)));
        };
        rest.iter().try_fold(first, |acc, &t| self.add(acc, t))
    }

    /// Accumulates `∂loss/∂param` into `grads` for every parameter reachable from `loss`.
    pub fn backward(&self, loss: Var, grads: &mut Gradients) -> Result<()> {
        self.backward_scaled(loss, 1.0, grads)
    }

    /// As [`Graph::backward`] with the seed gradient set to `seed`.
    pub fn backward_scaled(&self, loss: Var, seed: f64, grads: &mut Gradients) -> Result<()> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(Error::dim("backward", format!("scalar loss required, got {:?}", lt.shape())));
        }
        if grads.len() != self.params.len() {
            return Err(Error::dim("backward", "gradient buffer does not match parameter store"));
        }
        let mut node_grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        node_grads[loss.0] = Some(vec![seed]);
        for i in (0..=loss.0).rev() {
            let Some(g) = node_grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let mut sink = Sink {
                graph: self,
                node_grads: &mut node_grads,
                params: grads,
            };
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    for (a, b) in sink.params.buf_mut(id.0).iter_mut().zip(&g) {
                        *a += b;
                    }
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k) = ta.dims2();
                    let (_, n) = tb.dims2();
                    if let Some(da) = sink.get(*a) {
                        let bd = tb.data();
                        for i in 0..m {
                            let grow = &g[i * n..(i + 1) * n];
                            for p in 0..k {
                                let brow = &bd[p * n..(p + 1) * n];
                                da[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                            }
                        }
                    }
                    if let Some(db) = sink.get(*b) {
                        let ad = ta.data();
                        for i in 0..m {
                            let grow = &g[i * n..(i + 1) * n];
                            for p in 0..k {
                                let av = ad[i * k + p];
                                if av == 0.0 {
                                    continue;
                                }
                                for (d, &gv) in db[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                    *d += av * gv;
                                }
                            }
                        }
                    }
                }
                Op::Transpose(a) => {
                    let (r, c) = self.value(*a).dims2();
                    if let Some(da) = sink.get(*a) {
                        for i in 0..r {
                            for j in 0..c {
                                da[i * c + j] += g[j * r + i];
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    for v in [*a, *b] {
                        if let Some(d) = sink.get(v) {
                            d.iter_mut().zip(&g).for_each(|(x, y)| *x += y);
                        }
                    }
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a).data(), self.value(*b).data());
                    if let Some(da) = sink.get(*a) {
                        for ((d, gv), bv) in da.iter_mut().zip(&g).zip(tb) {
                            *d += gv * bv;
                        }
                    }
                    if let Some(db) = sink.get(*b) {
                        for ((d, gv), av) in db.iter_mut().zip(&g).zip(ta) {
                            *d += gv * av;
                        }
                    }
                }
                Op::Scale(a, f) => {
                    if let Some(da) = sink.get(*a) {
                        da.iter_mut().zip(&g).for_each(|(x, y)| *x += f * y);
                    }
                }
                Op::Tanh(a) => {
                    let y = node.value.as_ref().expect("value").data();
                    if let Some(da) = sink.get(*a) {
                        for ((d, gv), yv) in da.iter_mut().zip(&g).zip(y) {
                            *d += gv * (1.0 - yv * yv);
                        }
                    }
                }
                Op::Sigmoid(a) => {
                    let y = node.value.as_ref().expect("value").data();
                    if let Some(da) = sink.get(*a) {
                        for ((d, gv), yv) in da.iter_mut().zip(&g).zip(y) {
                            *d += gv * yv * (1.0 - yv);
                        }
                    }
                }
                Op::Relu(a) => {
                    let x = self.value(*a).data();
                    if let Some(da) = sink.get(*a) {
                        for ((d, gv), xv) in da.iter_mut().zip(&g).zip(x) {
                            if *xv > 0.0 {
                                *d += gv;
                            }
                        }
                    }
                }
                Op::Softmax(a) => {
                    let y = node.value.as_ref().expect("value").data();
                    let dot: f64 = g.iter().zip(y).map(|(x, y)| x * y).sum();
                    if let Some(da) = sink.get(*a) {
                        for ((d, gv), yv) in da.iter_mut().zip(&g).zip(y) {
                            *d += yv * (gv - dot);
                        }
                    }
                }
                Op::ConcatSeq(parts) => {
                    let n = parts.len();
                    for (c, &p) in parts.iter().enumerate() {
                        if let Some(dp) = sink.get(p) {
                            for (r, d) in dp.iter_mut().enumerate() {
                                *d += g[r * n + c];
                            }
                        }
                    }
                }
                Op::MaxPoolSeq { input, argmax } => {
                    let (_, n) = self.value(*input).dims2();
                    if let Some(da) = sink.get(*input) {
                        for (r, &c) in argmax.iter().enumerate() {
                            da[r * n + c] += g[r];
                        }
                    }
                }
                Op::CrossEntropy { logits, target, probs } => {
                    if let Some(dl) = sink.get(*logits) {
                        for (j, (d, p)) in dl.iter_mut().zip(probs).enumerate() {
                            let onehot = if j == *target { 1.0 } else { 0.0 };
                            *d += g[0] * (p - onehot);
                        }
                    }
                }
                Op::Row(a, index) => {
                    let (_, e) = self.value(*a).dims2();
                    if let Some(da) = sink.get(*a) {
                        for (d, gv) in da[index * e..(index + 1) * e].iter_mut().zip(&g) {
                            *d += gv;
                        }
                    }
                }
                Op::Slice(a, start) => {
                    if let Some(da) = sink.get(*a) {
                        for (d, gv) in da[*start..*start + g.len()].iter_mut().zip(&g) {
                            *d += gv;
                        }
                    }
                }
                Op::Sum(a) => {
                    if let Some(da) = sink.get(*a) {
                        da.iter_mut().for_each(|x| *x += g[0]);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Routes gradient contributions either to an intermediate node buffer or,
/// for parameter nodes, straight into the parameter gradient store.
struct Sink<'a, 'g, 'p> {
    graph: &'a Graph<'p>,
    node_grads: &'a mut [Option<Vec<f64>>],
    params: &'g mut Gradients,
}

impl Sink<'_, '_, '_> {
    fn get(&mut self, v: Var) -> Option<&mut [f64]> {
        let node = &self.graph.nodes[v.0];
        if !node.needs_grad {
            return None;
        }
        if let Op::Param(id) = node.op {
            return Some(self.params.buf_mut(id.0));
        }
        let len = self.graph.value(v).len();
        Some(self.node_grads[v.0].get_or_insert_with(|| vec![0.0; len]).as_mut_slice())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Max-subtracted softmax of a non-empty slice.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|&x| (x - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Index of the maximum value; ties resolve to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
