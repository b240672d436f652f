//! Reverse-mode differentiation tape over vector and matrix values.
//!
//! A fresh tape is built per sentence (the graph shape depends on the action
//! sequence), forward values are computed eagerly as operations are
//! recorded, and `backward` accumulates parameter gradients into a
//! [`ParameterStore`]. Node ids are topological by construction, so the
//! backward sweep is a single reverse pass.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{CoreError, Result};
use crate::params::{ParamId, ParameterStore};
use crate::tensor::{Real, Tensor};

/// Handle to a value on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    /// Leaf constant; receives no gradient.
    Const,
    /// Leaf copy of a full parameter tensor.
    Param(ParamId),
    /// Leaf copy of one row of a matrix parameter (embedding lookup).
    ParamRow {
        param: ParamId,
        row: usize,
    },
    /// `W x + b` (bias optional).
    Affine {
        w: NodeId,
        x: NodeId,
        b: Option<NodeId>,
    },
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Neg(NodeId),
    Scale(NodeId, Real),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Slice {
        src: NodeId,
        start: usize,
    },
    Concat(Vec<NodeId>),
    Dot(NodeId, NodeId),
    /// Scalars stacked into a vector.
    Stack(Vec<NodeId>),
    Softmax(NodeId),
    LogSoftmax(NodeId),
    Gather {
        src: NodeId,
        indices: Vec<usize>,
    },
    /// One coordinate as a scalar.
    Pick {
        src: NodeId,
        index: usize,
    },
    /// `sum_k weights[k] * items[k]` over equally shaped vectors.
    WeightedSum {
        weights: NodeId,
        items: Vec<NodeId>,
    },
    SumScalars(Vec<NodeId>),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    // One Param node per slot per tape; repeated uses share it so gradient
    // contributions from every use site land on the same accumulator.
    param_nodes: BTreeMap<usize, NodeId>,
}

fn sigmoid(x: Real) -> Real {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn max_of(xs: &[Real]) -> Real {
    xs.iter().fold(Real::neg_infinity(), |a, &b| a.max(b))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn scalar_value(&self, id: NodeId) -> Result<Real> {
        let t = self.value(id);
        if t.len() != 1 {
            return Err(CoreError::ShapeMismatch {
                op: "scalar_value",
                left: t.shape().to_vec(),
                right: vec![1],
            });
        }
        Ok(t.data()[0])
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, value });
        id
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Const, value)
    }

    pub fn zeros(&mut self, len: usize) -> NodeId {
        self.constant(Tensor::zeros(&[len]))
    }

    /// Leaf for a full parameter tensor, memoized per tape.
    pub fn param(&mut self, store: &ParameterStore, id: ParamId) -> NodeId {
        if let Some(&n) = self.param_nodes.get(&id.0) {
            return n;
        }
        let n = self.push(Op::Param(id), store.value(id).clone());
        self.param_nodes.insert(id.0, n);
        n
    }

    /// Leaf for one row of a matrix parameter (embedding lookup).
    pub fn param_row(&mut self, store: &ParameterStore, id: ParamId, row: usize) -> Result<NodeId> {
        let value = Tensor::vector(store.value(id).row(row)?.to_vec());
        Ok(self.push(Op::ParamRow { param: id, row }, value))
    }

    pub fn affine(&mut self, w: NodeId, x: NodeId, b: Option<NodeId>) -> Result<NodeId> {
        let (rows, cols) = self.value(w).dims2()?;
        let xv = self.value(x);
        if xv.shape() != [cols] {
            return Err(CoreError::ShapeMismatch {
                op: "affine",
                left: self.value(w).shape().to_vec(),
                right: xv.shape().to_vec(),
            });
        }
        if let Some(b) = b {
            if self.value(b).shape() != [rows] {
                return Err(CoreError::ShapeMismatch {
                    op: "affine bias",
                    left: vec![rows],
                    right: self.value(b).shape().to_vec(),
                });
            }
        }
        let mut out = vec![0.0; rows];
        {
            let wd = self.value(w).data();
            let xd = self.value(x).data();
            for r in 0..rows {
                let wrow = &wd[r * cols..(r + 1) * cols];
                let mut acc = 0.0;
                for c in 0..cols {
                    acc += wrow[c] * xd[c];
                }
                out[r] = acc;
            }
            if let Some(b) = b {
                let bd = self.value(b).data();
                for r in 0..rows {
                    out[r] += bd[r];
                }
            }
        }
        Ok(self.push(Op::Affine { w, x, b }, Tensor::vector(out)))
    }

    fn elementwise2(&mut self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(CoreError::ShapeMismatch {
                op,
                left: self.value(a).shape().to_vec(),
                right: self.value(b).shape().to_vec(),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise2("add", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Op::Add(a, b), Tensor::from_vec(&shape, data)?))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise2("mul", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Op::Mul(a, b), Tensor::from_vec(&shape, data)?))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let data = self.value(a).data().iter().map(|x| -x).collect();
        let shape = self.value(a).shape().to_vec();
        self.push(Op::Neg(a), Tensor::from_vec(&shape, data).unwrap())
    }

    pub fn scale(&mut self, a: NodeId, factor: Real) -> NodeId {
        let data = self.value(a).data().iter().map(|x| x * factor).collect();
        let shape = self.value(a).shape().to_vec();
        self.push(
            Op::Scale(a, factor),
            Tensor::from_vec(&shape, data).unwrap(),
        )
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let data = self.value(a).data().iter().map(|x| x.tanh()).collect();
        let shape = self.value(a).shape().to_vec();
        self.push(Op::Tanh(a), Tensor::from_vec(&shape, data).unwrap())
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let data = self.value(a).data().iter().map(|&x| sigmoid(x)).collect();
        let shape = self.value(a).shape().to_vec();
        self.push(Op::Sigmoid(a), Tensor::from_vec(&shape, data).unwrap())
    }

    pub fn slice(&mut self, src: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let v = self.value(src);
        if !v.is_vector() || start + len > v.len() {
            return Err(CoreError::ShapeMismatch {
                op: "slice",
                left: v.shape().to_vec(),
                right: vec![start, len],
            });
        }
        let data = v.data()[start..start + len].to_vec();
        Ok(self.push(Op::Slice { src, start }, Tensor::vector(data)))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(CoreError::EmptyInput("concat"));
        }
        let mut data = Vec::new();
        for &p in parts {
            let v = self.value(p);
            if !v.is_vector() {
                return Err(CoreError::ShapeMismatch {
                    op: "concat",
                    left: v.shape().to_vec(),
                    right: vec![],
                });
            }
            data.extend_from_slice(v.data());
        }
        Ok(self.push(Op::Concat(parts.to_vec()), Tensor::vector(data)))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise2("dot", a, b)?;
        let s = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .sum();
        Ok(self.push(Op::Dot(a, b), Tensor::scalar(s)))
    }

    pub fn stack(&mut self, scalars: &[NodeId]) -> Result<NodeId> {
        if scalars.is_empty() {
            return Err(CoreError::EmptyInput("stack"));
        }
        let mut data = Vec::with_capacity(scalars.len());
        for &s in scalars {
            data.push(self.scalar_value(s)?);
        }
        Ok(self.push(Op::Stack(scalars.to_vec()), Tensor::vector(data)))
    }

    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a);
        if v.is_empty() || !v.is_vector() {
            return Err(CoreError::EmptyInput("softmax"));
        }
        let m = max_of(v.data());
        let mut data: Vec<Real> = v.data().iter().map(|&x| (x - m).exp()).collect();
        let sum: Real = data.iter().sum();
        for x in data.iter_mut() {
            *x /= sum;
        }
        Ok(self.push(Op::Softmax(a), Tensor::vector(data)))
    }

    pub fn log_softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a);
        if v.is_empty() || !v.is_vector() {
            return Err(CoreError::EmptyInput("log_softmax"));
        }
        let m = max_of(v.data());
        let lse: Real = v.data().iter().map(|&x| (x - m).exp()).sum::<Real>().ln() + m;
        let data = v.data().iter().map(|&x| x - lse).collect();
        Ok(self.push(Op::LogSoftmax(a), Tensor::vector(data)))
    }

    pub fn gather(&mut self, src: NodeId, indices: &[usize]) -> Result<NodeId> {
        if indices.is_empty() {
            return Err(CoreError::EmptyInput("gather"));
        }
        let v = self.value(src);
        let mut data = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= v.len() {
                return Err(CoreError::IdOutOfRange {
                    what: "gather index",
                    id: i,
                    size: v.len(),
                });
            }
            data.push(v.data()[i]);
        }
        Ok(self.push(
            Op::Gather {
                src,
                indices: indices.to_vec(),
            },
            Tensor::vector(data),
        ))
    }

    pub fn pick(&mut self, src: NodeId, index: usize) -> Result<NodeId> {
        let v = self.value(src);
        if index >= v.len() {
            return Err(CoreError::IdOutOfRange {
                what: "pick index",
                id: index,
                size: v.len(),
            });
        }
        let x = v.data()[index];
        Ok(self.push(Op::Pick { src, index }, Tensor::scalar(x)))
    }

    pub fn weighted_sum(&mut self, weights: NodeId, items: &[NodeId]) -> Result<NodeId> {
        if items.is_empty() {
            return Err(CoreError::EmptyInput("weighted_sum"));
        }
        let w = self.value(weights);
        if w.shape() != [items.len()] {
            return Err(CoreError::ShapeMismatch {
                op: "weighted_sum",
                left: w.shape().to_vec(),
                right: vec![items.len()],
            });
        }
        let dim = self.value(items[0]).len();
        let mut out = vec![0.0; dim];
        for (k, &item) in items.iter().enumerate() {
            let v = self.value(item);
            if v.shape() != self.value(items[0]).shape() {
                return Err(CoreError::ShapeMismatch {
                    op: "weighted_sum items",
                    left: self.value(items[0]).shape().to_vec(),
                    right: v.shape().to_vec(),
                });
            }
            let wk = self.value(weights).data()[k];
            for (o, &x) in out.iter_mut().zip(v.data()) {
                *o += wk * x;
            }
        }
        Ok(self.push(
            Op::WeightedSum {
                weights,
                items: items.to_vec(),
            },
            Tensor::vector(out),
        ))
    }

    pub fn sum_scalars(&mut self, terms: &[NodeId]) -> Result<NodeId> {
        if terms.is_empty() {
            return Err(CoreError::EmptyInput("sum_scalars"));
        }
        let mut acc = 0.0;
        for &t in terms {
            acc += self.scalar_value(t)?;
        }
        Ok(self.push(Op::SumScalars(terms.to_vec()), Tensor::scalar(acc)))
    }

    /// Reverse sweep from a scalar output, accumulating parameter gradients
    /// additively into `store` (callers zero the store between batches).
    pub fn backward(&self, output: NodeId, store: &mut ParameterStore) -> Result<()> {
        if self.value(output).len() != 1 {
            return Err(CoreError::ShapeMismatch {
                op: "backward output",
                left: self.value(output).shape().to_vec(),
                right: vec![1],
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Tensor::scalar(1.0));

        for i in (0..=output.0).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &self.nodes[i];
            match &node.op {
                Op::Const => {}
                Op::Param(id) => {
                    let dst = store.grad_mut(*id);
                    for (d, &s) in dst.data_mut().iter_mut().zip(g.data()) {
                        *d += s;
                    }
                }
                Op::ParamRow { param, row } => {
                    let dst = store.grad_mut(*param).row_mut(*row)?;
                    for (d, &s) in dst.iter_mut().zip(g.data()) {
                        *d += s;
                    }
                }
                Op::Affine { w, x, b } => {
                    let (rows, cols) = self.value(*w).dims2()?;
                    {
                        let xd = self.value(*x).data().to_vec();
                        let gw = Self::grad_slot(&mut grads, *w, self.value(*w).shape());
                        for r in 0..rows {
                            let grow = &mut gw.data_mut()[r * cols..(r + 1) * cols];
                            let gr = g.data()[r];
                            for c in 0..cols {
                                grow[c] += gr * xd[c];
                            }
                        }
                    }
                    {
                        let wd = self.value(*w).data().to_vec();
                        let gx = Self::grad_slot(&mut grads, *x, self.value(*x).shape());
                        for r in 0..rows {
                            let gr = g.data()[r];
                            let wrow = &wd[r * cols..(r + 1) * cols];
                            for c in 0..cols {
                                gx.data_mut()[c] += gr * wrow[c];
                            }
                        }
                    }
                    if let Some(b) = b {
                        let gb = Self::grad_slot(&mut grads, *b, self.value(*b).shape());
                        for (d, &s) in gb.data_mut().iter_mut().zip(g.data()) {
                            *d += s;
                        }
                    }
                }
                Op::Add(a, b) => {
                    Self::accumulate(&mut grads, *a, self.value(*a).shape(), g.data());
                    Self::accumulate(&mut grads, *b, self.value(*b).shape(), g.data());
                }
                Op::Mul(a, b) => {
                    let av = self.value(*a).data().to_vec();
                    let bv = self.value(*b).data().to_vec();
                    {
                        let ga = Self::grad_slot(&mut grads, *a, self.value(*a).shape());
                        for ((d, &gi), &bi) in ga.data_mut().iter_mut().zip(g.data()).zip(&bv) {
                            *d += gi * bi;
                        }
                    }
                    {
                        let gb = Self::grad_slot(&mut grads, *b, self.value(*b).shape());
                        for ((d, &gi), &ai) in gb.data_mut().iter_mut().zip(g.data()).zip(&av) {
                            *d += gi * ai;
                        }
                    }
                }
                Op::Neg(a) => {
                    let ga = Self::grad_slot(&mut grads, *a, self.value(*a).shape());
                    for (d, &s) in ga.data_mut().iter_mut().zip(g.data()) {
                        *d -= s;
                    }
                }
                Op::Scale(a, factor) => {
                    let f = *factor;
                    let ga = Self::grad_slot(&mut grads, *a, self.value(*a).shape());
                    for (d, &s) in ga.data_mut().iter_mut().zip(g.data()) {
                        *d += f * s;
                    }
                }
                Op::Tanh(a) => {
                    let y = node.value.data().to_vec();
                    let ga = Self::grad_slot(&mut grads, *a, self.value(*a).shape());
                    for ((d, &gi), &yi) in ga.data_mut().iter_mut().zip(g.data()).zip(&y) {
                        *d += gi * (1.0 - yi * yi);
                    }
                }
                Op::Sigmoid(a) => {
                    let y = node.value.data().to_vec();
                    let ga = Self::grad_slot(&mut grads, *a, self.value(*a).shape());
                    for ((d, &gi), &yi) in ga.data_mut().iter_mut().zip(g.data()).zip(&y) {
                        *d += gi * yi * (1.0 - yi);
                    }
                }
                Op::Slice { src, start } => {
                    let gs = Self::grad_slot(&mut grads, *src, self.value(*src).shape());
                    for (k, &s) in g.data().iter().enumerate() {
                        gs.data_mut()[start + k] += s;
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        let gp = Self::grad_slot(&mut grads, p, self.value(p).shape());
                        for k in 0..len {
                            gp.data_mut()[k] += g.data()[offset + k];
                        }
                        offset += len;
                    }
                }
                Op::Dot(a, b) => {
                    let gs = g.data()[0];
                    let av = self.value(*a).data().to_vec();
                    let bv = self.value(*b).data().to_vec();
                    {
                        let ga = Self::grad_slot(&mut grads, *a, self.value(*a).shape());
                        for (d, &bi) in ga.data_mut().iter_mut().zip(&bv) {
                            *d += gs * bi;
                        }
                    }
                    {
                        let gb = Self::grad_slot(&mut grads, *b, self.value(*b).shape());
                        for (d, &ai) in gb.data_mut().iter_mut().zip(&av) {
                            *d += gs * ai;
                        }
                    }
                }
                Op::Stack(scalars) => {
                    for (k, &s) in scalars.iter().enumerate() {
                        let gsum = g.data()[k];
                        let gp = Self::grad_slot(&mut grads, s, self.value(s).shape());
                        gp.data_mut()[0] += gsum;
                    }
                }
                Op::Softmax(a) => {
                    let y = node.value.data().to_vec();
                    let inner: Real = g.data().iter().zip(&y).map(|(&gi, &yi)| gi * yi).sum();
                    let ga = Self::grad_slot(&mut grads, *a, self.value(*a).shape());
                    for ((d, &gi), &yi) in ga.data_mut().iter_mut().zip(g.data()).zip(&y) {
                        *d += yi * (gi - inner);
                    }
                }
                Op::LogSoftmax(a) => {
                    let y = node.value.data().to_vec();
                    let gsum: Real = g.data().iter().sum();
                    let ga = Self::grad_slot(&mut grads, *a, self.value(*a).shape());
                    for ((d, &gi), &yi) in ga.data_mut().iter_mut().zip(g.data()).zip(&y) {
                        *d += gi - yi.exp() * gsum;
                    }
                }
                Op::Gather { src, indices } => {
                    let gs = Self::grad_slot(&mut grads, *src, self.value(*src).shape());
                    for (k, &idx) in indices.iter().enumerate() {
                        gs.data_mut()[idx] += g.data()[k];
                    }
                }
                Op::Pick { src, index } => {
                    let gs = Self::grad_slot(&mut grads, *src, self.value(*src).shape());
                    gs.data_mut()[*index] += g.data()[0];
                }
                Op::WeightedSum { weights, items } => {
                    let wv = self.value(*weights).data().to_vec();
                    for (k, &item) in items.iter().enumerate() {
                        let iv = self.value(item).data().to_vec();
                        {
                            let gw =
                                Self::grad_slot(&mut grads, *weights, self.value(*weights).shape());
                            let mut acc = 0.0;
                            for (&gi, &xi) in g.data().iter().zip(&iv) {
                                acc += gi * xi;
                            }
                            gw.data_mut()[k] += acc;
                        }
                        {
                            let gi_slot =
                                Self::grad_slot(&mut grads, item, self.value(item).shape());
                            for (d, &gi) in gi_slot.data_mut().iter_mut().zip(g.data()) {
                                *d += wv[k] * gi;
                            }
                        }
                    }
                }
                Op::SumScalars(terms) => {
                    for &t in terms {
                        let gt = Self::grad_slot(&mut grads, t, self.value(t).shape());
                        gt.data_mut()[0] += g.data()[0];
                    }
                }
            }
        }
        Ok(())
    }

    fn grad_slot<'g>(
        grads: &'g mut [Option<Tensor>],
        id: NodeId,
        shape: &[usize],
    ) -> &'g mut Tensor {
        grads[id.0].get_or_insert_with(|| Tensor::zeros(shape))
    }

    fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, shape: &[usize], src: &[Real]) {
        let slot = Self::grad_slot(grads, id, shape);
        for (d, &s) in slot.data_mut().iter_mut().zip(src) {
            *d += s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn vec_node(tape: &mut Tape, data: &[Real]) -> NodeId {
        tape.constant(Tensor::vector(data.to_vec()))
    }

    #[test]
    fn affine_identity_and_zero_input() {
        let mut tape = Tape::new();
        let w = tape.constant(Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let x = vec_node(&mut tape, &[0.3, -0.5]);
        let b = vec_node(&mut tape, &[0.0, 0.0]);
        let y = tape.affine(w, x, Some(b)).unwrap();
        assert_eq!(tape.value(y).data(), &[0.3, -0.5]);

        let w2 =
            tape.constant(Tensor::from_vec(&[2, 3], vec![4.0, -1.0, 2.5, 0.1, 7.0, -3.0]).unwrap());
        let x0 = vec_node(&mut tape, &[0.0, 0.0, 0.0]);
        let b2 = vec_node(&mut tape, &[1.0, 2.0]);
        let y2 = tape.affine(w2, x0, Some(b2)).unwrap();
        assert_eq!(tape.value(y2).data(), &[1.0, 2.0]);
    }

    #[test]
    fn affine_hand_evaluated() {
        let mut tape = Tape::new();
        let w = tape.constant(Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let x = vec_node(&mut tape, &[1.0, 1.0]);
        let b = vec_node(&mut tape, &[0.0, 0.0]);
        let y = tape.affine(w, x, Some(b)).unwrap();
        assert_eq!(tape.value(y).data(), &[3.0, 7.0]);
    }

    #[test]
    fn affine_shape_mismatch_names_both_shapes() {
        let mut tape = Tape::new();
        let w = tape.constant(Tensor::zeros(&[2, 3]));
        let x = vec_node(&mut tape, &[1.0, 1.0]);
        match tape.affine(w, x, None) {
            Err(CoreError::ShapeMismatch { left, right, .. }) => {
                assert_eq!(left, vec![2, 3]);
                assert_eq!(right, vec![2]);
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn softmax_equal_logits_uniform() {
        let mut tape = Tape::new();
        for c in [-7.5, 0.0, 123.0] {
            let x = vec_node(&mut tape, &[c, c, c]);
            let y = tape.softmax(x).unwrap();
            for &p in tape.value(y).data() {
                assert!((p - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn softmax_analytic_quarters() {
        let mut tape = Tape::new();
        let x = vec_node(&mut tape, &[0.0, (3.0 as Real).ln()]);
        let y = tape.softmax(x).unwrap();
        let p = tape.value(y).data();
        assert!((p[0] - 0.25).abs() < 1e-15);
        assert!((p[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn softmax_matches_extended_precision_oracle() {
        // Reference values computed with 60-digit arithmetic.
        let mut tape = Tape::new();
        let x = vec_node(&mut tape, &[1.2, -0.4, 0.0]);
        let y = tape.softmax(x).unwrap();
        let expected = [
            0.6652958335136344788448,
            0.1343209122227547723369,
            0.2003832542636107488184,
        ];
        for (&p, &e) in tape.value(y).data().iter().zip(&expected) {
            assert!((p - e).abs() < 1e-15, "{p} vs {e}");
        }
    }

    #[test]
    fn softmax_sums_to_one_and_shift_invariant() {
        let mut tape = Tape::new();
        let logits = [1.25, -0.5, 0.75, 2.0];
        let x = vec_node(&mut tape, &logits);
        let y = tape.softmax(x).unwrap();
        let sum: Real = tape.value(y).data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);

        // An exactly representable shift leaves the stabilized logits
        // bit-identical, so the outputs are too.
        let shifted: Vec<Real> = logits.iter().map(|&v| v + 2.0).collect();
        let xs = vec_node(&mut tape, &shifted);
        let ys = tape.softmax(xs).unwrap();
        assert_eq!(tape.value(y).data(), tape.value(ys).data());
    }

    #[test]
    fn softmax_empty_is_error() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![]));
        assert!(tape.softmax(x).is_err());
    }

    #[test]
    fn shared_parameter_gradient_sums_over_use_sites() {
        // f(w) = dot(w, a) + dot(w, b) through one shared slot equals the
        // sum of gradients of two independent copies at the same value.
        let mut store = ParameterStore::new();
        let w = store.add("w", Tensor::vector(vec![0.5, -1.5])).unwrap();
        let mut tape = Tape::new();
        let wn1 = tape.param(&store, w);
        let wn2 = tape.param(&store, w);
        let a = vec_node(&mut tape, &[2.0, 3.0]);
        let b = vec_node(&mut tape, &[-1.0, 4.0]);
        let d1 = tape.dot(wn1, a).unwrap();
        let d2 = tape.dot(wn2, b).unwrap();
        let loss = tape.sum_scalars(&[d1, d2]).unwrap();
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.grad(w).data(), &[1.0, 7.0]);

        let mut store2 = ParameterStore::new();
        let u = store2.add("u", Tensor::vector(vec![0.5, -1.5])).unwrap();
        let v = store2.add("v", Tensor::vector(vec![0.5, -1.5])).unwrap();
        let mut tape2 = Tape::new();
        let un = tape2.param(&store2, u);
        let vn = tape2.param(&store2, v);
        let a2 = vec_node(&mut tape2, &[2.0, 3.0]);
        let b2 = vec_node(&mut tape2, &[-1.0, 4.0]);
        let d1 = tape2.dot(un, a2).unwrap();
        let d2 = tape2.dot(vn, b2).unwrap();
        let loss2 = tape2.sum_scalars(&[d1, d2]).unwrap();
        tape2.backward(loss2, &mut store2).unwrap();
        let summed: Vec<Real> = store2
            .grad(u)
            .data()
            .iter()
            .zip(store2.grad(v).data())
            .map(|(x, y)| x + y)
            .collect();
        assert_eq!(store.grad(w).data(), summed.as_slice());
    }

    #[test]
    fn pick_of_log_softmax_backward_matches_closed_form() {
        // loss = -log softmax(x)[1]; dloss/dx = softmax(x) - onehot(1)
        let mut store = ParameterStore::new();
        let x = store
            .add("x", Tensor::vector(vec![0.2, -0.3, 1.1]))
            .unwrap();
        let mut tape = Tape::new();
        let xn = tape.param(&store, x);
        let ls = tape.log_softmax(xn).unwrap();
        let p = tape.pick(ls, 1).unwrap();
        let loss = tape.neg(p);
        tape.backward(loss, &mut store).unwrap();
        let sm = {
            let mut t = Tape::new();
            let xn = t.constant(store.value(x).clone());
            let y = t.softmax(xn).unwrap();
            t.value(y).data().to_vec()
        };
        let g = store.grad(x).data();
        for k in 0..3 {
            let expected = sm[k] - if k == 1 { 1.0 } else { 0.0 };
            assert!((g[k] - expected).abs() < 1e-14);
        }
    }
}
