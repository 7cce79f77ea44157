//! Wengert-list tape: every differentiable op appends one node holding its
//! output value; `backward` replays the list in reverse exactly once.

use crate::error::{Result, TensorError};
use crate::ops::{conv, elementwise, linalg, norm, reduce, shape};
use crate::real::Real;
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

pub(crate) enum Op<T: Real> {
    Leaf,
    Binary(elementwise::BinaryKind, Var, Var),
    Affine { x: Var, mul: f64 },
    Gelu(Var),
    MatMul(Var, Var),
    Reshape(Var),
    Permute { x: Var, perm: Vec<usize> },
    Concat { xs: Vec<Var>, axis: usize },
    Slice { x: Var, axis: usize, start: usize },
    IndexSelect { x: Var, axis: usize, indices: Vec<usize> },
    SumAll(Var),
    SumAxis { x: Var, axis: usize, scale: f64 },
    Softmax { x: Var, axis: usize },
    LogSoftmax { x: Var, axis: usize },
    Conv2d { x: Var, w: Var, b: Option<Var>, geom: conv::ConvGeom },
    LayerNorm(norm::NormSaved<T>),
    BatchNorm(norm::NormSaved<T>),
}

impl<T: Real> Op<T> {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => Vec::new(),
            Op::Binary(_, a, b) | Op::MatMul(a, b) => vec![*a, *b],
            Op::Affine { x, .. }
            | Op::Gelu(x)
            | Op::Reshape(x)
            | Op::Permute { x, .. }
            | Op::Slice { x, .. }
            | Op::IndexSelect { x, .. }
            | Op::SumAll(x)
            | Op::SumAxis { x, .. }
            | Op::Softmax { x, .. }
            | Op::LogSoftmax { x, .. } => vec![*x],
            Op::Concat { xs, .. } => xs.clone(),
            Op::Conv2d { x, w, b, .. } => {
                let mut v = vec![*x, *w];
                v.extend(b.iter().copied());
                v
            }
            Op::LayerNorm(s) | Op::BatchNorm(s) => vec![s.x, s.gamma, s.beta],
        }
    }
}

struct Node<T: Real> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Ordered record of executed operations. Inputs of every node precede it,
/// so the node list is already a topological order.
pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
    grad_enabled: bool,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grad_enabled: true,
        }
    }

    /// A tape that never records gradient requirements; used for inference.
    pub fn inference() -> Self {
        Self {
            nodes: Vec::new(),
            grad_enabled: false,
        }
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds an input tensor. Gradients are accumulated for it only when
    /// `requires_grad` is set.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: requires_grad && self.grad_enabled,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub(crate) fn push(&mut self, value: Tensor<T>, op: Op<T>, name: &'static str) -> Result<Var> {
        if !value.all_finite() {
            return Err(TensorError::NonFinite(name));
        }
        let requires_grad =
            self.grad_enabled && op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub(crate) fn check_var(&self, v: Var) -> Result<()> {
        if v.0 >= self.nodes.len() {
            return Err(TensorError::Index(format!("variable {} not on this tape", v.0)));
        }
        Ok(())
    }

    /// Reverse sweep from `root`, seeding its gradient with ones. Returns
    /// the accumulated gradients of every leaf that requires one.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>> {
        self.check_var(root)?;
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        if !self.nodes[root.0].requires_grad {
            return Ok(Gradients { grads });
        }
        grads[root.0] = Some(Tensor::ones(self.nodes[root.0].value.shape()));
        for i in (0..=root.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            if matches!(self.nodes[i].op, Op::Leaf) {
                grads[i] = Some(g);
                continue;
            }
            self.backprop(i, &g, &mut grads)?;
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        debug_assert_eq!(g.shape(), self.nodes[v.0].value.shape());
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn backprop(&self, i: usize, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<()> {
        let node = &self.nodes[i];
        let val = |v: Var| &self.nodes[v.0].value;
        let need = |v: Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf => {}
            Op::Binary(kind, a, b) => {
                let (ga, gb) =
                    elementwise::binary_backward(*kind, val(*a), val(*b), g, need(*a), need(*b));
                if let Some(ga) = ga {
                    self.accumulate(grads, *a, ga);
                }
                if let Some(gb) = gb {
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Affine { x, mul } => {
                let m = T::of(*mul);
                self.accumulate(grads, *x, g.map(|v| v * m));
            }
            Op::Gelu(x) => self.accumulate(grads, *x, elementwise::gelu_backward(val(*x), g)),
            Op::MatMul(a, b) => {
                let (ga, gb) = linalg::matmul_backward(val(*a), val(*b), g, need(*a), need(*b));
                if let Some(ga) = ga {
                    self.accumulate(grads, *a, ga);
                }
                if let Some(gb) = gb {
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Reshape(x) => {
                let gx = g.clone().reshaped(val(*x).shape().to_vec())?;
                self.accumulate(grads, *x, gx);
            }
            Op::Permute { x, perm } => {
                self.accumulate(grads, *x, shape::permute_backward(g, perm));
            }
            Op::Concat { xs, axis } => {
                let parts = shape::concat_backward(g, *axis, xs.iter().map(|v| val(*v).shape()));
                for (v, gp) in xs.iter().zip(parts) {
                    self.accumulate(grads, *v, gp);
                }
            }
            Op::Slice { x, axis, start } => {
                let gx = shape::slice_backward(g, val(*x).shape(), *axis, *start);
                self.accumulate(grads, *x, gx);
            }
            Op::IndexSelect { x, axis, indices } => {
                let gx = shape::index_select_backward(g, val(*x).shape(), *axis, indices);
                self.accumulate(grads, *x, gx);
            }
            Op::SumAll(x) => {
                let s = g.data()[0];
                self.accumulate(grads, *x, Tensor::full(val(*x).shape(), s));
            }
            Op::SumAxis { x, axis, scale } => {
                let gx = reduce::sum_axis_backward(g, val(*x).shape(), *axis, T::of(*scale));
                self.accumulate(grads, *x, gx);
            }
            Op::Softmax { x, axis } => {
                self.accumulate(grads, *x, reduce::softmax_backward(&node.value, g, *axis));
            }
            Op::LogSoftmax { x, axis } => {
                self.accumulate(grads, *x, reduce::log_softmax_backward(&node.value, g, *axis));
            }
            Op::Conv2d { x, w, b, geom } => {
                let out = conv::conv2d_backward(
                    val(*x),
                    val(*w),
                    g,
                    geom,
                    need(*x),
                    need(*w),
                    b.is_some_and(need),
                );
                if let Some(gx) = out.x {
                    self.accumulate(grads, *x, gx);
                }
                if let Some(gw) = out.w {
                    self.accumulate(grads, *w, gw);
                }
                if let (Some(b), Some(gb)) = (b, out.b) {
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::LayerNorm(saved) => {
                let (gx, gg, gb) = norm::layer_norm_backward(saved, val(saved.gamma), g);
                self.accumulate(grads, saved.x, gx);
                self.accumulate(grads, saved.gamma, gg);
                self.accumulate(grads, saved.beta, gb);
            }
            Op::BatchNorm(saved) => {
                let (gx, gg, gb) = norm::batch_norm_backward(saved, val(saved.gamma), g);
                self.accumulate(grads, saved.x, gx);
                self.accumulate(grads, saved.gamma, gg);
                self.accumulate(grads, saved.beta, gb);
            }
        }
        Ok(())
    }
}

/// Leaf gradients produced by [`Tape::backward`].
pub struct Gradients<T: Real> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros shaped like `like` when nothing flowed to it.
    pub fn get_or_zeros(&self, v: Var, like: &[usize]) -> Tensor<T> {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(like))
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}
