use super::ops::{self, Activation, BinaryOp, ReduceOp};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Binary(BinaryOp, usize, usize),
    BinaryScalar(BinaryOp, usize, f64),
    Reduce(ReduceOp, usize),
    Activation(Activation, usize),
    Conv1d {
        input: usize,
        weight: usize,
        bias: Option<usize>,
        stride: usize,
        pad: usize,
    },
    ConvTranspose1d {
        input: usize,
        weight: usize,
        bias: Option<usize>,
        stride: usize,
        pad: usize,
    },
    Concat(usize, usize),
    Slice(usize, usize),
    InstanceNorm {
        input: usize,
        scale: usize,
        shift: usize,
        eps: f64,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only record of a forward computation.
///
/// Nodes only reference earlier nodes, so the recording order is already
/// a topological order and backward is a single reverse sweep.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    /// Records a leaf that receives a gradient.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Records a leaf that is treated as a constant by backward.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A constant copy of `v`'s current value; gradients stop here.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[usize]) -> bool {
        vars.iter().any(|&i| self.nodes[i].requires_grad)
    }

    pub fn elementwise(&mut self, op: BinaryOp, a: Var, b: Var) -> Result<Var> {
        let value = ops::elementwise(op, self.value(a), self.value(b))?;
        let rg = self.any_grad(&[a.0, b.0]);
        Ok(self.push(value, Op::Binary(op, a.0, b.0), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(BinaryOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(BinaryOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(BinaryOp::Mul, a, b)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(BinaryOp::Div, a, b)
    }

    /// Elementwise op against a constant scalar.
    pub fn scalar_op(&mut self, op: BinaryOp, a: Var, s: f64) -> Var {
        let value = ops::elementwise_scalar(op, self.value(a), s);
        let rg = self.any_grad(&[a.0]);
        self.push(value, Op::BinaryScalar(op, a.0, s), rg)
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        self.scalar_op(BinaryOp::Add, a, s)
    }

    pub fn mul_scalar(&mut self, a: Var, s: f64) -> Var {
        self.scalar_op(BinaryOp::Mul, a, s)
    }

    pub fn reduce(&mut self, op: ReduceOp, a: Var) -> Result<Var> {
        let value = ops::reduce(op, self.value(a))?;
        let rg = self.any_grad(&[a.0]);
        Ok(self.push(value, Op::Reduce(op, a.0), rg))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.reduce(ReduceOp::Sum, a)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.reduce(ReduceOp::Mean, a)
    }

    pub fn activation(&mut self, kind: Activation, a: Var) -> Var {
        let value = ops::activation(kind, self.value(a));
        let rg = self.any_grad(&[a.0]);
        self.push(value, Op::Activation(kind, a.0), rg)
    }

    pub fn conv1d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        let value = ops::conv1d(
            self.value(input),
            self.value(weight),
            bias.map(|b| self.value(b)),
            stride,
            pad,
        )?;
        let mut ids = vec![input.0, weight.0];
        ids.extend(bias.map(|b| b.0));
        let rg = self.any_grad(&ids);
        let op = Op::Conv1d {
            input: input.0,
            weight: weight.0,
            bias: bias.map(|b| b.0),
            stride,
            pad,
        };
        Ok(self.push(value, op, rg))
    }

    pub fn conv_transpose1d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        let value = ops::conv_transpose1d(
            self.value(input),
            self.value(weight),
            bias.map(|b| self.value(b)),
            stride,
            pad,
        )?;
        let mut ids = vec![input.0, weight.0];
        ids.extend(bias.map(|b| b.0));
        let rg = self.any_grad(&ids);
        let op = Op::ConvTranspose1d {
            input: input.0,
            weight: weight.0,
            bias: bias.map(|b| b.0),
            stride,
            pad,
        };
        Ok(self.push(value, op, rg))
    }

    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = ops::concat_channels(self.value(a), self.value(b))?;
        let rg = self.any_grad(&[a.0, b.0]);
        Ok(self.push(value, Op::Concat(a.0, b.0), rg))
    }

    pub fn slice_channels(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let value = ops::slice_channels(self.value(a), start, end)?;
        let rg = self.any_grad(&[a.0]);
        Ok(self.push(value, Op::Slice(a.0, start), rg))
    }

    pub fn instance_norm(&mut self, input: Var, scale: Var, shift: Var, eps: f64) -> Result<Var> {
        let value =
            ops::instance_norm(self.value(input), self.value(scale), self.value(shift), eps)?;
        let rg = self.any_grad(&[input.0, scale.0, shift.0]);
        let op = Op::InstanceNorm {
            input: input.0,
            scale: scale.0,
            shift: shift.0,
            eps,
        };
        Ok(self.push(value, op, rg))
    }

    /// Reverse sweep from a scalar `root`, seeding d(root)/d(root) = 1.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let root_value = self.value(root);
        if !root_value.is_scalar() {
            return Err(Error::NonScalarRoot(root_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![1.0]);

        for id in (0..=root.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.backprop_node(node, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let need = |i: usize| self.nodes[i].requires_grad;
        let val = |i: usize| &self.nodes[i].value;
        match node.op {
            Op::Leaf => {}
            Op::Binary(op, a, b) => {
                let (ga, gb) = ops::elementwise_backward(op, val(a), val(b), g);
                if need(a) {
                    accumulate(grads, a, ga);
                }
                if need(b) {
                    accumulate(grads, b, gb);
                }
            }
            Op::BinaryScalar(op, a, s) => {
                accumulate(grads, a, ops::elementwise_scalar_backward(op, val(a), s, g));
            }
            Op::Reduce(op, a) => {
                let n = val(a).len();
                let v = match op {
                    ReduceOp::Sum => g[0],
                    ReduceOp::Mean => g[0] / n as f64,
                };
                accumulate(grads, a, vec![v; n]);
            }
            Op::Activation(kind, a) => {
                accumulate(
                    grads,
                    a,
                    ops::activation_backward(kind, val(a), &node.value, g),
                );
            }
            Op::Conv1d {
                input,
                weight,
                bias,
                stride,
                pad,
            } => {
                let need_bias = bias.is_some_and(need);
                let cg = ops::conv1d_backward(
                    val(input),
                    val(weight),
                    g,
                    stride,
                    pad,
                    [need(input), need(weight), need_bias],
                );
                accumulate_conv(grads, cg, input, weight, bias);
            }
            Op::ConvTranspose1d {
                input,
                weight,
                bias,
                stride,
                pad,
            } => {
                let need_bias = bias.is_some_and(need);
                let cg = ops::conv_transpose1d_backward(
                    val(input),
                    val(weight),
                    g,
                    stride,
                    pad,
                    [need(input), need(weight), need_bias],
                );
                accumulate_conv(grads, cg, input, weight, bias);
            }
            Op::Concat(a, b) => {
                let split = val(a).len();
                if need(a) {
                    accumulate(grads, a, g[..split].to_vec());
                }
                if need(b) {
                    accumulate(grads, b, g[split..].to_vec());
                }
            }
            Op::Slice(a, start) => {
                let src = val(a);
                let l = src.shape()[1];
                let mut full = vec![0.0; src.len()];
                full[start * l..start * l + g.len()].copy_from_slice(g);
                accumulate(grads, a, full);
            }
            Op::InstanceNorm {
                input,
                scale,
                shift,
                eps,
            } => {
                let (gx, gs, gb) = ops::instance_norm_backward(val(input), val(scale), g, eps);
                if need(input) {
                    accumulate(grads, input, gx);
                }
                if need(scale) {
                    accumulate(grads, scale, gs);
                }
                if need(shift) {
                    accumulate(grads, shift, gb);
                }
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], id: usize, g: Vec<f64>) {
    match &mut grads[id] {
        Some(existing) => existing.iter_mut().zip(&g).for_each(|(e, v)| *e += v),
        slot @ None => *slot = Some(g),
    }
}

fn accumulate_conv(
    grads: &mut [Option<Vec<f64>>],
    cg: ops::ConvGrads,
    input: usize,
    weight: usize,
    bias: Option<usize>,
) {
    if let Some(gx) = cg.input {
        accumulate(grads, input, gx);
    }
    if let Some(gw) = cg.weight {
        accumulate(grads, weight, gw);
    }
    if let (Some(b), Some(gb)) = (bias, cg.bias) {
        accumulate(grads, b, gb);
    }
}

/// Gradient buffers produced by [`Tape::backward`], indexed by node.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the root with respect to `v`; `None` when `v` is not an
    /// ancestor of the root (its gradient is zero).
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Like [`Gradients::get`] but zero-filled for non-ancestors.
    pub fn get_or_zero(&self, tape: &Tape, v: Var) -> Vec<f64> {
        self.get(v)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; tape.value(v).len()])
    }
}
