//! Reverse-mode differentiation over a small fixed node vocabulary.
//!
//! A `Graph` is built once (nodes are appended in topological order by
//! construction) and then run many times. Parameters live in a single
//! registry; two nodes referencing the same `ParamId` share weights,
//! which is how the Siamese branches are expressed.
//!
//! Every activation is batched: shape `[B, ...]`.

use crate::container;
use crate::error::{Error, Result};
use crate::nn::ops::{self, ConvGeom};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Named parameter tensors, indexed by `ParamId`.
#[derive(Clone, Debug)]
pub struct Params<T> {
    tensors: Vec<Tensor<T>>,
    names: Vec<String>,
}

impl<T: Scalar> Params<T> {
    pub(crate) fn new() -> Self {
        Params {
            tensors: Vec::new(),
            names: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> ParamId {
        self.tensors.push(tensor);
        self.names.push(name.into());
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    /// Total trainable value count.
    pub fn total_values(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }
}

/// Floor keeping sigmoid and softmax outputs strictly inside (0, 1).
/// A probability that rounds to exactly 0 or 1 in floating point
/// zeroes the p*(1-p) factor in the backward pass, and a saturated
/// head can then never recover no matter the learning rate.
const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub enum Op {
    Input {
        slot: usize,
    },
    Conv2d {
        kernel: ParamId,
        bias: ParamId,
        stride: (usize, usize),
        padding: (usize, usize),
    },
    Dense {
        weight: ParamId,
        bias: ParamId,
    },
    Relu,
    Sigmoid,
    Softmax,
    Dropout {
        p: f64,
    },
    Flatten,
    Concat,
    L2Distance,
    MaxPool2d {
        size: (usize, usize),
    },
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    inputs: Vec<NodeId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug)]
pub struct Graph<T> {
    nodes: Vec<Node>,
    pub params: Params<T>,
    n_inputs: usize,
}

/// Cached activations of one forward pass.
pub struct Forward<T> {
    pub values: Vec<Tensor<T>>,
    masks: Vec<Option<Vec<T>>>,
    argmax: Vec<Option<Vec<usize>>>,
}

impl<T: Scalar> Forward<T> {
    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.values[id]
    }
}

/// Gradients aligned with the parameter registry plus, per input slot,
/// the gradient flowing back to the provided input.
pub struct Gradients<T> {
    pub params: Vec<Tensor<T>>,
    pub inputs: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn param(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0]
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|t| t.all_finite())
            && self.inputs.iter().flatten().all(|t| t.all_finite())
    }
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            params: Params::new(),
            n_inputs: 0,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id].op
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>) -> Result<NodeId> {
        for &i in &inputs {
            if i >= self.nodes.len() {
                return Err(Error::shape(format!("node input {i} does not exist yet")));
            }
        }
        self.nodes.push(Node { op, inputs });
        Ok(self.nodes.len() - 1)
    }

    pub fn input(&mut self) -> NodeId {
        let slot = self.n_inputs;
        self.n_inputs += 1;
        self.nodes.push(Node {
            op: Op::Input { slot },
            inputs: vec![],
        });
        self.nodes.len() - 1
    }

    /// Convolution with fresh Glorot-initialized parameters.
    #[allow(clippy::too_many_arguments)]
    pub fn conv2d(
        &mut self,
        x: NodeId,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
        rng: &mut ChaCha8Rng,
    ) -> Result<NodeId> {
        let (kh, kw) = kernel;
        let fan_in = c_in * kh * kw;
        let fan_out = c_out * kh * kw;
        let k = self.params.add(
            format!("{name}.kernel"),
            super::init::glorot_uniform(&[c_out, c_in, kh, kw], fan_in, fan_out, rng),
        );
        let b = self.params.add(format!("{name}.bias"), Tensor::zeros(&[c_out]));
        self.conv2d_shared(x, k, b, stride, padding)
    }

    /// Convolution reusing existing parameters (weight sharing).
    pub fn conv2d_shared(
        &mut self,
        x: NodeId,
        kernel: ParamId,
        bias: ParamId,
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Result<NodeId> {
        if self.params.get(kernel).shape().len() != 4 {
            return Err(Error::shape("conv kernel must be [c_out, c_in, kh, kw]"));
        }
        self.push(
            Op::Conv2d {
                kernel,
                bias,
                stride,
                padding,
            },
            vec![x],
        )
    }

    pub fn dense(
        &mut self,
        x: NodeId,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<NodeId> {
        let w = self.params.add(
            format!("{name}.weight"),
            super::init::glorot_uniform(&[out_dim, in_dim], in_dim, out_dim, rng),
        );
        let b = self.params.add(format!("{name}.bias"), Tensor::zeros(&[out_dim]));
        self.dense_shared(x, w, b)
    }

    pub fn dense_shared(&mut self, x: NodeId, weight: ParamId, bias: ParamId) -> Result<NodeId> {
        if self.params.get(weight).shape().len() != 2 {
            return Err(Error::shape("dense weight must be [out, in]"));
        }
        self.push(Op::Dense { weight, bias }, vec![x])
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Relu, vec![x])
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Sigmoid, vec![x])
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Softmax, vec![x])
    }

    pub fn dropout(&mut self, x: NodeId, p: f64) -> Result<NodeId> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::config(format!("dropout probability {p} outside [0, 1)")));
        }
        self.push(Op::Dropout { p }, vec![x])
    }

    pub fn flatten(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Flatten, vec![x])
    }

    pub fn concat(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        if xs.len() < 2 {
            return Err(Error::shape("concat needs at least two inputs"));
        }
        self.push(Op::Concat, xs.to_vec())
    }

    pub fn l2_distance(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::L2Distance, vec![a, b])
    }

    pub fn maxpool2d(&mut self, x: NodeId, size: (usize, usize)) -> Result<NodeId> {
        if size.0 == 0 || size.1 == 0 {
            return Err(Error::shape("zero pooling window"));
        }
        self.push(Op::MaxPool2d { size }, vec![x])
    }

    /// Nodes that `target` depends on (including itself).
    pub fn ancestors(&self, target: NodeId) -> Vec<bool> {
        let mut needed = vec![false; self.nodes.len()];
        let mut stack = vec![target];
        while let Some(n) = stack.pop() {
            if needed[n] {
                continue;
            }
            needed[n] = true;
            stack.extend(self.nodes[n].inputs.iter().copied());
        }
        needed
    }

    pub fn forward(
        &self,
        inputs: &[&Tensor<T>],
        mode: Mode,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Forward<T>> {
        let needed = vec![true; self.nodes.len()];
        self.forward_where(inputs, &needed, mode, rng)
    }

    /// Forward pass evaluating only the ancestors of some target, so a
    /// single Siamese branch can be scored without running the other.
    /// Unneeded input slots may be empty tensors.
    pub fn forward_where(
        &self,
        inputs: &[&Tensor<T>],
        needed: &[bool],
        mode: Mode,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Forward<T>> {
        if inputs.len() != self.n_inputs {
            return Err(Error::shape(format!(
                "{} inputs supplied, graph has {} input slots",
                inputs.len(),
                self.n_inputs
            )));
        }
        let mut values: Vec<Tensor<T>> = Vec::with_capacity(self.nodes.len());
        let mut masks: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        let mut argmax: Vec<Option<Vec<usize>>> = vec![None; self.nodes.len()];

        for (id, node) in self.nodes.iter().enumerate() {
            if !needed[id] {
                values.push(Tensor::zeros(&[0]));
                continue;
            }
            let value = match &node.op {
                Op::Input { slot } => {
                    let t = inputs[*slot];
                    if t.shape().is_empty() {
                        return Err(Error::shape(format!("input slot {slot} needs a batch axis")));
                    }
                    t.clone()
                }
                Op::Conv2d {
                    kernel,
                    bias,
                    stride,
                    padding,
                } => {
                    let x = &values[node.inputs[0]];
                    let ks = self.params.get(*kernel).shape().to_vec();
                    let shape = x.shape();
                    if shape.len() != 4 {
                        return Err(Error::shape(format!(
                            "conv2d expects [B, C, H, W], got {shape:?}"
                        )));
                    }
                    if shape[1] != ks[1] {
                        return Err(Error::shape(format!(
                            "conv2d input has {} channels, kernel expects {}",
                            shape[1], ks[1]
                        )));
                    }
                    let g = ConvGeom::new(ks[1], shape[2], shape[3], ks[0], ks[2], ks[3], *stride, *padding)?;
                    let batch = shape[0];
                    let mut out = Tensor::zeros(&[batch, g.c_out, g.h_out, g.w_out]);
                    let in_len = g.in_len();
                    let out_len = g.out_len();
                    let kdata = self.params.get(*kernel).data();
                    let bdata = self.params.get(*bias).data();
                    for s in 0..batch {
                        ops::conv2d_forward(
                            &x.data()[s * in_len..(s + 1) * in_len],
                            kdata,
                            bdata,
                            &g,
                            &mut out.data_mut()[s * out_len..(s + 1) * out_len],
                        );
                    }
                    out
                }
                Op::Dense { weight, bias } => {
                    let x = &values[node.inputs[0]];
                    let w = self.params.get(*weight);
                    let b = self.params.get(*bias);
                    let (out_dim, in_dim) = (w.shape()[0], w.shape()[1]);
                    if x.shape().len() != 2 || x.shape()[1] != in_dim {
                        return Err(Error::shape(format!(
                            "dense expects [B, {in_dim}], got {:?}",
                            x.shape()
                        )));
                    }
                    let batch = x.shape()[0];
                    let mut out = Tensor::zeros(&[batch, out_dim]);
                    for s in 0..batch {
                        let xs = &x.data()[s * in_dim..(s + 1) * in_dim];
                        let os = &mut out.data_mut()[s * out_dim..(s + 1) * out_dim];
                        for o in 0..out_dim {
                            let row = &w.data()[o * in_dim..(o + 1) * in_dim];
                            let mut acc = b.data()[o];
                            for (wv, xv) in row.iter().zip(xs) {
                                acc += *wv * *xv;
                            }
                            os[o] = acc;
                        }
                    }
                    out
                }
                Op::Relu => {
                    let x = &values[node.inputs[0]];
                    let mut out = x.clone();
                    out.data_mut()
                        .iter_mut()
                        .for_each(|v| *v = v.max(T::zero()));
                    out
                }
                Op::Sigmoid => {
                    let x = &values[node.inputs[0]];
                    let lo = T::from_f64_lossy(PROB_FLOOR);
                    let hi = T::one() - lo;
                    let mut out = x.clone();
                    out.data_mut().iter_mut().for_each(|v| {
                        let z = *v;
                        let p = if z >= T::zero() {
                            T::one() / (T::one() + (-z).exp())
                        } else {
                            let e = z.exp();
                            e / (T::one() + e)
                        };
                        // Explicit comparisons so a NaN passes through
                        // instead of being absorbed by max/min.
                        *v = if p < lo {
                            lo
                        } else if p > hi {
                            hi
                        } else {
                            p
                        };
                    });
                    out
                }
                Op::Softmax => {
                    let x = &values[node.inputs[0]];
                    if x.shape().len() != 2 {
                        return Err(Error::shape(format!(
                            "softmax expects [B, K], got {:?}",
                            x.shape()
                        )));
                    }
                    let (batch, k) = (x.shape()[0], x.shape()[1]);
                    let lo = T::from_f64_lossy(PROB_FLOOR);
                    let mut out = x.clone();
                    for s in 0..batch {
                        let row = &mut out.data_mut()[s * k..(s + 1) * k];
                        let max = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
                        let mut sum = T::zero();
                        for v in row.iter_mut() {
                            *v = (*v - max).exp();
                            sum += *v;
                        }
                        for v in row.iter_mut() {
                            *v /= sum;
                            if *v < lo {
                                *v = lo;
                            }
                        }
                    }
                    out
                }
                Op::Dropout { p } => {
                    let x = &values[node.inputs[0]];
                    match mode {
                        Mode::Eval => x.clone(),
                        Mode::Train => {
                            let r = rng.as_deref_mut().ok_or_else(|| {
                                Error::config("training-mode forward needs an rng for dropout")
                            })?;
                            let keep_scale = T::from_f64_lossy(1.0 / (1.0 - *p));
                            let mask: Vec<T> = (0..x.len())
                                .map(|_| {
                                    if r.gen::<f64>() < *p {
                                        T::zero()
                                    } else {
                                        keep_scale
                                    }
                                })
                                .collect();
                            let mut out = x.clone();
                            for (v, m) in out.data_mut().iter_mut().zip(&mask) {
                                *v *= *m;
                            }
                            masks[id] = Some(mask);
                            out
                        }
                    }
                }
                Op::Flatten => {
                    let x = &values[node.inputs[0]];
                    let batch = x.shape()[0];
                    let rest: usize = x.shape()[1..].iter().product();
                    x.reshape(&[batch, rest])?
                }
                Op::Concat => {
                    let parts: Vec<&Tensor<T>> = node.inputs.iter().map(|&i| &values[i]).collect();
                    let first = parts[0].shape();
                    if first.len() < 2 {
                        return Err(Error::shape("concat needs [B, C, ...] inputs"));
                    }
                    let batch = first[0];
                    let tail: &[usize] = &first[2..];
                    let mut c_total = 0;
                    for p in &parts {
                        let s = p.shape();
                        if s[0] != batch || &s[2..] != tail {
                            return Err(Error::shape(format!(
                                "concat mismatch: {:?} vs {:?}",
                                s, first
                            )));
                        }
                        c_total += s[1];
                    }
                    let tail_len: usize = tail.iter().product();
                    let mut shape = vec![batch, c_total];
                    shape.extend_from_slice(tail);
                    let mut out = Tensor::zeros(&shape);
                    let out_sample = c_total * tail_len;
                    let mut offset = 0;
                    for p in &parts {
                        let c = p.shape()[1];
                        let in_sample = c * tail_len;
                        for s in 0..batch {
                            let src = &p.data()[s * in_sample..(s + 1) * in_sample];
                            let dst_start = s * out_sample + offset * tail_len;
                            out.data_mut()[dst_start..dst_start + in_sample].copy_from_slice(src);
                        }
                        offset += c;
                    }
                    out
                }
                Op::L2Distance => {
                    let a = &values[node.inputs[0]];
                    let b = &values[node.inputs[1]];
                    if a.shape() != b.shape() || a.shape().len() != 2 {
                        return Err(Error::shape(format!(
                            "l2 distance expects matching [B, K], got {:?} and {:?}",
                            a.shape(),
                            b.shape()
                        )));
                    }
                    let (batch, k) = (a.shape()[0], a.shape()[1]);
                    let mut out = Tensor::zeros(&[batch]);
                    for s in 0..batch {
                        let mut acc = T::zero();
                        for i in 0..k {
                            let d = a.data()[s * k + i] - b.data()[s * k + i];
                            acc += d * d;
                        }
                        out.data_mut()[s] = acc.sqrt();
                    }
                    out
                }
                Op::MaxPool2d { size } => {
                    let x = &values[node.inputs[0]];
                    let shape = x.shape();
                    if shape.len() != 4 {
                        return Err(Error::shape(format!(
                            "maxpool expects [B, C, H, W], got {shape:?}"
                        )));
                    }
                    let (batch, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
                    let (ph, pw) = *size;
                    if h < ph || w < pw {
                        return Err(Error::shape(format!(
                            "pool window {ph}x{pw} larger than input {h}x{w}"
                        )));
                    }
                    let (ho, wo) = (h / ph, w / pw);
                    let mut out = Tensor::zeros(&[batch, c, ho, wo]);
                    let mut arg = vec![0usize; batch * c * ho * wo];
                    let in_len = c * h * w;
                    let out_len = c * ho * wo;
                    for s in 0..batch {
                        ops::maxpool_forward(
                            &x.data()[s * in_len..(s + 1) * in_len],
                            c,
                            h,
                            w,
                            ph,
                            pw,
                            &mut out.data_mut()[s * out_len..(s + 1) * out_len],
                            &mut arg[s * out_len..(s + 1) * out_len],
                        );
                    }
                    argmax[id] = Some(arg);
                    out
                }
            };
            values.push(value);
        }
        Ok(Forward {
            values,
            masks,
            argmax,
        })
    }

    /// Reverse pass. `seeds` carries (node, dLoss/dNode) pairs; the
    /// result holds parameter gradients and per-input-slot gradients.
    pub fn backward(&self, fwd: &Forward<T>, seeds: &[(NodeId, Tensor<T>)]) -> Result<Gradients<T>> {
        let mut node_grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        for (id, g) in seeds {
            if g.shape() != fwd.values[*id].shape() {
                return Err(Error::shape(format!(
                    "seed gradient shape {:?} does not match node value {:?}",
                    g.shape(),
                    fwd.values[*id].shape()
                )));
            }
            match &mut node_grads[*id] {
                Some(acc) => acc.add_assign(g),
                slot => *slot = Some(g.clone()),
            }
        }

        let mut grads = Gradients {
            params: self
                .params
                .tensors
                .iter()
                .map(|t| Tensor::zeros(t.shape()))
                .collect(),
            inputs: vec![None; self.n_inputs],
        };

        let accumulate = |store: &mut Vec<Option<Tensor<T>>>, id: NodeId, g: Tensor<T>| {
            match &mut store[id] {
                Some(acc) => acc.add_assign(&g),
                slot => *slot = Some(g),
            }
        };

        for id in (0..self.nodes.len()).rev() {
            let Some(gout) = node_grads[id].take() else {
                continue;
            };
            let node = &self.nodes[id];
            match &node.op {
                Op::Input { slot } => match &mut grads.inputs[*slot] {
                    Some(acc) => acc.add_assign(&gout),
                    s => *s = Some(gout),
                },
                Op::Conv2d {
                    kernel,
                    bias,
                    stride,
                    padding,
                } => {
                    let x = &fwd.values[node.inputs[0]];
                    let ks = self.params.get(*kernel).shape().to_vec();
                    let shape = x.shape();
                    let g = ConvGeom::new(ks[1], shape[2], shape[3], ks[0], ks[2], ks[3], *stride, *padding)?;
                    let batch = shape[0];
                    let mut dx = Tensor::zeros(shape);
                    let in_len = g.in_len();
                    let out_len = g.out_len();
                    let kdata = self.params.get(*kernel).data();
                    let (ki, bi) = (kernel.0, bias.0);
                    let (dk, db) = if ki < bi {
                        let (lo, hi) = grads.params.split_at_mut(bi);
                        (lo[ki].data_mut(), hi[0].data_mut())
                    } else {
                        let (lo, hi) = grads.params.split_at_mut(ki);
                        (hi[0].data_mut(), lo[bi].data_mut())
                    };
                    for s in 0..batch {
                        ops::conv2d_backward(
                            &x.data()[s * in_len..(s + 1) * in_len],
                            kdata,
                            &g,
                            &gout.data()[s * out_len..(s + 1) * out_len],
                            &mut dx.data_mut()[s * in_len..(s + 1) * in_len],
                            dk,
                            db,
                        );
                    }
                    accumulate(&mut node_grads, node.inputs[0], dx);
                }
                Op::Dense { weight, bias } => {
                    let x = &fwd.values[node.inputs[0]];
                    let w = self.params.get(*weight);
                    let (out_dim, in_dim) = (w.shape()[0], w.shape()[1]);
                    let batch = x.shape()[0];
                    let mut dx = Tensor::zeros(x.shape());
                    for s in 0..batch {
                        let xs = &x.data()[s * in_dim..(s + 1) * in_dim];
                        let gs = &gout.data()[s * out_dim..(s + 1) * out_dim];
                        let dxs = &mut dx.data_mut()[s * in_dim..(s + 1) * in_dim];
                        for o in 0..out_dim {
                            let gv = gs[o];
                            grads.params[bias.0].data_mut()[o] += gv;
                            let wrow = &w.data()[o * in_dim..(o + 1) * in_dim];
                            let dwrow = &mut grads.params[weight.0].data_mut()
                                [o * in_dim..(o + 1) * in_dim];
                            for i in 0..in_dim {
                                dwrow[i] += gv * xs[i];
                                dxs[i] += wrow[i] * gv;
                            }
                        }
                    }
                    accumulate(&mut node_grads, node.inputs[0], dx);
                }
                Op::Relu => {
                    let x = &fwd.values[node.inputs[0]];
                    let mut dx = gout;
                    for (g, v) in dx.data_mut().iter_mut().zip(x.data()) {
                        if *v <= T::zero() {
                            *g = T::zero();
                        }
                    }
                    accumulate(&mut node_grads, node.inputs[0], dx);
                }
                Op::Sigmoid => {
                    let y = &fwd.values[id];
                    let mut dx = gout;
                    for (g, &p) in dx.data_mut().iter_mut().zip(y.data()) {
                        *g *= p * (T::one() - p);
                    }
                    accumulate(&mut node_grads, node.inputs[0], dx);
                }
                Op::Softmax => {
                    let y = &fwd.values[id];
                    let (batch, k) = (y.shape()[0], y.shape()[1]);
                    let mut dx = Tensor::zeros(y.shape());
                    for s in 0..batch {
                        let ys = &y.data()[s * k..(s + 1) * k];
                        let gs = &gout.data()[s * k..(s + 1) * k];
                        let mut dot = T::zero();
                        for i in 0..k {
                            dot += ys[i] * gs[i];
                        }
                        let dxs = &mut dx.data_mut()[s * k..(s + 1) * k];
                        for i in 0..k {
                            dxs[i] = ys[i] * (gs[i] - dot);
                        }
                    }
                    accumulate(&mut node_grads, node.inputs[0], dx);
                }
                Op::Dropout { .. } => {
                    let mut dx = gout;
                    if let Some(mask) = &fwd.masks[id] {
                        for (g, m) in dx.data_mut().iter_mut().zip(mask) {
                            *g *= *m;
                        }
                    }
                    accumulate(&mut node_grads, node.inputs[0], dx);
                }
                Op::Flatten => {
                    let x_shape = fwd.values[node.inputs[0]].shape().to_vec();
                    accumulate(&mut node_grads, node.inputs[0], gout.reshape(&x_shape)?);
                }
                Op::Concat => {
                    let out_shape = fwd.values[id].shape().to_vec();
                    let batch = out_shape[0];
                    let tail_len: usize = out_shape[2..].iter().product();
                    let out_sample = out_shape[1] * tail_len;
                    let mut offset = 0;
                    for &inp in &node.inputs {
                        let shape = fwd.values[inp].shape().to_vec();
                        let c = shape[1];
                        let in_sample = c * tail_len;
                        let mut dx = Tensor::zeros(&shape);
                        for s in 0..batch {
                            let src_start = s * out_sample + offset * tail_len;
                            dx.data_mut()[s * in_sample..(s + 1) * in_sample]
                                .copy_from_slice(&gout.data()[src_start..src_start + in_sample]);
                        }
                        offset += c;
                        accumulate(&mut node_grads, inp, dx);
                    }
                }
                Op::L2Distance => {
                    let a = &fwd.values[node.inputs[0]];
                    let b = &fwd.values[node.inputs[1]];
                    let d = &fwd.values[id];
                    let (batch, k) = (a.shape()[0], a.shape()[1]);
                    let mut da = Tensor::zeros(a.shape());
                    let mut db = Tensor::zeros(b.shape());
                    for s in 0..batch {
                        let dist = d.data()[s];
                        if dist == T::zero() {
                            // Both one-sided derivatives vanish along
                            // the diagonal, so 0 is the right choice.
                            continue;
                        }
                        let scale = gout.data()[s] / dist;
                        for i in 0..k {
                            let diff = a.data()[s * k + i] - b.data()[s * k + i];
                            da.data_mut()[s * k + i] = scale * diff;
                            db.data_mut()[s * k + i] = -scale * diff;
                        }
                    }
                    accumulate(&mut node_grads, node.inputs[0], da);
                    accumulate(&mut node_grads, node.inputs[1], db);
                }
                Op::MaxPool2d { .. } => {
                    let x_shape = fwd.values[node.inputs[0]].shape().to_vec();
                    let arg = fwd.argmax[id]
                        .as_ref()
                        .ok_or_else(|| Error::numeric("maxpool backward without cached argmax"))?;
                    let sample_in: usize = x_shape[1..].iter().product();
                    let out_len = gout.len() / x_shape[0];
                    let mut dx = Tensor::zeros(&x_shape);
                    for s in 0..x_shape[0] {
                        for o in 0..out_len {
                            let idx = s * sample_in + arg[s * out_len + o];
                            dx.data_mut()[idx] += gout.data()[s * out_len + o];
                        }
                    }
                    accumulate(&mut node_grads, node.inputs[0], dx);
                }
            }
        }
        Ok(grads)
    }

    // -- checkpointing ---------------------------------------------------

    pub fn save_checkpoint(
        &self,
        path: &Path,
        architecture: &str,
        seed: u64,
        step: u64,
    ) -> Result<()> {
        let tensors: Vec<serde_json::Value> = self
            .params
            .ids()
            .map(|id| {
                serde_json::json!({
                    "name": self.params.name(id),
                    "shape": self.params.get(id).shape(),
                })
            })
            .collect();
        let meta = serde_json::json!({
            "kind": "checkpoint",
            "architecture": architecture,
            "seed": seed,
            "step": step,
            "tensors": tensors,
        });
        let blocks: Vec<Vec<u8>> = self
            .params
            .ids()
            .map(|id| container::f64s_to_bytes(&self.params.get(id).to_f64().into_data()))
            .collect();
        let refs: Vec<&[u8]> = blocks.iter().map(|b| b.as_slice()).collect();
        container::write_container(path, &meta, &refs)
    }

    /// Load parameters saved for the same architecture back into this
    /// graph. Returns (seed, step) recorded at save time.
    pub fn load_checkpoint(&mut self, path: &Path, architecture: &str) -> Result<(u64, u64)> {
        let (meta, blocks) = container::read_container(path)?;
        if meta["kind"] != "checkpoint" {
            return Err(Error::checkpoint(format!(
                "{} is not a checkpoint",
                path.display()
            )));
        }
        let found = meta["architecture"].as_str().unwrap_or_default();
        if found != architecture {
            return Err(Error::checkpoint(format!(
                "architecture mismatch: checkpoint has {found:?}, graph is {architecture:?}"
            )));
        }
        let tensors = meta["tensors"]
            .as_array()
            .ok_or_else(|| Error::checkpoint("missing tensor table"))?;
        if tensors.len() != self.params.len() || blocks.len() != self.params.len() {
            return Err(Error::checkpoint(format!(
                "checkpoint has {} tensors, graph has {}",
                tensors.len(),
                self.params.len()
            )));
        }
        for (i, id) in self.params.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let name = tensors[i]["name"].as_str().unwrap_or_default();
            if name != self.params.name(id) {
                return Err(Error::checkpoint(format!(
                    "tensor {i} is {name:?}, expected {:?}",
                    self.params.name(id)
                )));
            }
            let values = container::bytes_to_f64s(&blocks[i])?;
            if values.len() != self.params.get(id).len() {
                return Err(Error::checkpoint(format!(
                    "tensor {name:?} has {} values, expected {}",
                    values.len(),
                    self.params.get(id).len()
                )));
            }
            let shape = self.params.get(id).shape().to_vec();
            *self.params.get_mut(id) =
                Tensor::from_f64(&Tensor::from_vec(&shape, values)?);
        }
        let seed = meta["seed"].as_u64().unwrap_or(0);
        let step = meta["step"].as_u64().unwrap_or(0);
        Ok((seed, step))
    }
}
