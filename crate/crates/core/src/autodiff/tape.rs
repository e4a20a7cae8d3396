use alloc::vec;
use alloc::vec::Vec;

use super::ops::{self, Primitive};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Apply(Primitive, Vec<usize>),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Append-only record of a computation. Inputs of a node always have smaller
/// ids than the node itself, so reverse id order is a valid reverse
/// topological order.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by node.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or exact zeros when the loss does not depend on it.
    pub fn wrt(&self, tape: &Tape, v: Var) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(tape.value(v).shape()))
    }
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

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// An input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn apply(&mut self, kind: Primitive, inputs: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor> = inputs.iter().map(|v| &self.nodes[v.0].value).collect();
        let out = ops::forward(&kind, &values)?;
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let ids = inputs.iter().map(|v| v.0).collect();
        Ok(self.push(Op::Apply(kind, ids), out, requires_grad))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::MatMul, &[a, b])
    }
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Add, &[a, b])
    }
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Sub, &[a, b])
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Mul, &[a, b])
    }
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Div, &[a, b])
    }
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Minimum, &[a, b])
    }
    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.apply(Primitive::ScalarMul(s), &[a])
    }
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Relu, &[a])
    }
    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Tanh, &[a])
    }
    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Exp, &[a])
    }
    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Log, &[a])
    }
    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Square, &[a])
    }
    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Sqrt, &[a])
    }
    pub fn clamp(&mut self, a: Var, min: f64, max: f64) -> Result<Var> {
        self.apply(Primitive::Clamp { min, max }, &[a])
    }
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Sum { axis: None }, &[a])
    }
    pub fn sum_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.apply(Primitive::Sum { axis: Some(axis) }, &[a])
    }
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Mean { axis: None }, &[a])
    }
    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.apply(Primitive::Mean { axis: Some(axis) }, &[a])
    }
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        self.apply(Primitive::Concat { axis }, parts)
    }
    pub fn broadcast(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        if self.shape(a) == shape {
            return Ok(a);
        }
        self.apply(
            Primitive::Broadcast {
                shape: shape.to_vec(),
            },
            &[a],
        )
    }
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        self.apply(Primitive::Slice { axis, start, end }, &[a])
    }

    /// `a + c` for a constant scalar `c`.
    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let k = self.constant(Tensor::scalar(c));
        let shape = self.shape(a).to_vec();
        let k = self.broadcast(k, &shape)?;
        self.add(a, k)
    }

    /// `x · w + b` with `x: [n, in]`, `w: [in, out]`, `b: [1, out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = self.matmul(x, w)?;
        let shape = self.shape(y).to_vec();
        let b = self.broadcast(b, &shape)?;
        self.add(y, b)
    }

    /// Layer normalization over the last axis of a `[n, d]` input, followed by
    /// the affine map `gain ⊙ x̂ + bias` when parameters are given.
    pub fn layer_norm(&mut self, x: Var, affine: Option<(Var, Var)>, eps: f64) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let axis = shape.len() - 1;
        let mu = self.mean_axis(x, axis)?;
        let mu = self.broadcast(mu, &shape)?;
        let centered = self.sub(x, mu)?;
        let sq = self.square(centered)?;
        let var = self.mean_axis(sq, axis)?;
        let var = self.add_scalar(var, eps)?;
        let std = self.sqrt(var)?;
        let std = self.broadcast(std, &shape)?;
        let xhat = self.div(centered, std)?;
        match affine {
            None => Ok(xhat),
            Some((gain, bias)) => {
                let gain = self.broadcast(gain, &shape)?;
                let scaled = self.mul(xhat, gain)?;
                let bias = self.broadcast(bias, &shape)?;
                self.add(scaled, bias)
            }
        }
    }

    /// Reverse-mode sweep from a scalar `loss` (seed gradient 1).
    ///
    /// Only nodes that depend on some [`Tape::leaf`] are visited, each exactly
    /// once. Intermediate gradients are released as soon as they have been
    /// propagated; leaf gradients are kept in the result.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = &self.nodes[loss.0].value;
        if !lv.is_scalar() {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut acc: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        acc[loss.0] = Some(vec![1.0]);
        let mut out: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = acc[id].take() else { continue };
            match &node.op {
                Op::Leaf => {
                    out[id] = Some(Tensor::new(node.value.shape().to_vec(), g)?);
                }
                Op::Apply(kind, ids) => {
                    let inputs: Vec<&Tensor> = ids.iter().map(|&i| &self.nodes[i].value).collect();
                    let needs: Vec<bool> = ids.iter().map(|&i| self.nodes[i].requires_grad).collect();
                    let grads = ops::vjp(kind, &inputs, &node.value, &g, &needs);
                    for (&i, gi) in ids.iter().zip(grads) {
                        let Some(gi) = gi else { continue };
                        if !self.nodes[i].requires_grad {
                            continue;
                        }
                        match &mut acc[i] {
                            Some(existing) => existing.iter_mut().zip(&gi).for_each(|(e, v)| *e += v),
                            slot => *slot = Some(gi),
                        }
                    }
                }
            }
        }
        Ok(Gradients { grads: out })
    }
}
