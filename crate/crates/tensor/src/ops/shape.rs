use crate::error::{shape_err, Result, TensorError};
use crate::real::Real;
use crate::tape::{Op, Tape, Var};
use crate::tensor::{contiguous_strides, numel, Tensor};

/// Contiguous copy of `src` read through one stride per output dimension.
pub(crate) fn strided_copy<T: Copy>(src: &[T], out_shape: &[usize], strides: &[usize]) -> Vec<T> {
    let total = numel(out_shape);
    let mut out = Vec::with_capacity(total);
    if out_shape.is_empty() {
        out.push(src[0]);
        return out;
    }
    let rank = out_shape.len();
    let inner = out_shape[rank - 1];
    let inner_stride = strides[rank - 1];
    let mut idx = vec![0usize; rank - 1];
    let mut base = 0usize;
    for _ in 0..total / inner {
        if inner_stride == 1 {
            out.extend_from_slice(&src[base..base + inner]);
        } else {
            out.extend((0..inner).map(|j| src[base + j * inner_stride]));
        }
        for d in (0..rank - 1).rev() {
            idx[d] += 1;
            base += strides[d];
            if idx[d] < out_shape[d] {
                break;
            }
            base -= strides[d] * out_shape[d];
            idx[d] = 0;
        }
    }
    out
}

/// Inverse of [`strided_copy`]: adds each element of `src` (laid out in
/// `src_shape`) into `dst` at its strided offset.
pub(crate) fn strided_scatter_add<T: Real>(dst: &mut [T], src: &[T], src_shape: &[usize], strides: &[usize]) {
    if src_shape.is_empty() {
        dst[0] += src[0];
        return;
    }
    let rank = src_shape.len();
    let inner = src_shape[rank - 1];
    let inner_stride = strides[rank - 1];
    let mut idx = vec![0usize; rank - 1];
    let mut base = 0usize;
    for chunk in src.chunks_exact(inner) {
        for (j, &v) in chunk.iter().enumerate() {
            dst[base + j * inner_stride] += v;
        }
        for d in (0..rank - 1).rev() {
            idx[d] += 1;
            base += strides[d];
            if idx[d] < src_shape[d] {
                break;
            }
            base -= strides[d] * src_shape[d];
            idx[d] = 0;
        }
    }
}

/// `(outer, extent, inner)` split of a shape around `axis`.
pub(crate) fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (
        numel(&shape[..axis]),
        shape[axis],
        numel(&shape[axis + 1..]),
    )
}

pub(crate) fn check_axis(shape: &[usize], axis: usize) -> Result<()> {
    if axis >= shape.len() {
        return Err(TensorError::Argument(format!(
            "axis {axis} invalid for shape {shape:?}"
        )));
    }
    Ok(())
}

pub(crate) fn permute_tensor<T: Real>(x: &Tensor<T>, perm: &[usize]) -> Tensor<T> {
    let strides = contiguous_strides(x.shape());
    let out_shape: Vec<usize> = perm.iter().map(|&p| x.shape()[p]).collect();
    let out_strides: Vec<usize> = perm.iter().map(|&p| strides[p]).collect();
    Tensor::from_parts(out_shape.clone(), strided_copy(x.data(), &out_shape, &out_strides))
}

pub(crate) fn permute_backward<T: Real>(g: &Tensor<T>, perm: &[usize]) -> Tensor<T> {
    let mut inverse = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inverse[p] = i;
    }
    permute_tensor(g, &inverse)
}

pub(crate) fn concat_backward<'a, T: Real>(
    g: &Tensor<T>,
    axis: usize,
    shapes: impl Iterator<Item = &'a [usize]>,
) -> Vec<Tensor<T>> {
    let (outer, total, inner) = split_axis(g.shape(), axis);
    let mut offset = 0;
    let mut parts = Vec::new();
    for shape in shapes {
        let len = shape[axis];
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let start = (o * total + offset) * inner;
            data.extend_from_slice(&g.data()[start..start + len * inner]);
        }
        parts.push(Tensor::from_parts(shape.to_vec(), data));
        offset += len;
    }
    parts
}

pub(crate) fn slice_backward<T: Real>(
    g: &Tensor<T>,
    in_shape: &[usize],
    axis: usize,
    start: usize,
) -> Tensor<T> {
    let (outer, total, inner) = split_axis(in_shape, axis);
    let len = g.shape()[axis];
    let mut out = Tensor::zeros(in_shape);
    let dst = out.data_mut();
    for o in 0..outer {
        let from = o * len * inner;
        let to = (o * total + start) * inner;
        dst[to..to + len * inner].copy_from_slice(&g.data()[from..from + len * inner]);
    }
    out
}

pub(crate) fn index_select_backward<T: Real>(
    g: &Tensor<T>,
    in_shape: &[usize],
    axis: usize,
    indices: &[usize],
) -> Tensor<T> {
    let (outer, total, inner) = split_axis(in_shape, axis);
    let mut out = Tensor::zeros(in_shape);
    let dst = out.data_mut();
    let gd = g.data();
    for o in 0..outer {
        for (t, &src) in indices.iter().enumerate() {
            let from = (o * indices.len() + t) * inner;
            let to = (o * total + src) * inner;
            for j in 0..inner {
                dst[to + j] += gd[from + j];
            }
        }
    }
    out
}

impl<T: Real> Tape<T> {
    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        self.check_var(x)?;
        let value = self.value(x).clone().reshaped(shape.to_vec())?;
        self.push(value, Op::Reshape(x), "reshape")
    }

    /// Reorders axes: output axis `i` is input axis `perm[i]`.
    pub fn permute(&mut self, x: Var, perm: &[usize]) -> Result<Var> {
        self.check_var(x)?;
        let rank = self.value(x).rank();
        let mut seen = vec![false; rank];
        if perm.len() != rank || perm.iter().any(|&p| p >= rank || std::mem::replace(&mut seen[p], true)) {
            return Err(TensorError::Argument(format!(
                "{perm:?} is not a permutation of {rank} axes"
            )));
        }
        let value = permute_tensor(self.value(x), perm);
        self.push(value, Op::Permute { x, perm: perm.to_vec() }, "permute")
    }

    /// Swaps the last two axes.
    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let rank = self.value(x).rank();
        if rank < 2 {
            return shape_err("transpose needs rank >= 2");
        }
        let mut perm: Vec<usize> = (0..rank).collect();
        perm.swap(rank - 2, rank - 1);
        self.permute(x, &perm)
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let Some(&first) = xs.first() else {
            return Err(TensorError::Argument("concat of zero tensors".into()));
        };
        for &v in xs {
            self.check_var(v)?;
        }
        let base = self.value(first).shape().to_vec();
        check_axis(&base, axis)?;
        let mut total = 0;
        for &v in xs {
            let s = self.value(v).shape();
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                return shape_err(format!("concat along {axis}: {base:?} vs {s:?}"));
            }
            total += s[axis];
        }
        let mut out_shape = base.clone();
        out_shape[axis] = total;
        let (outer, _, inner) = split_axis(&base, axis);
        let mut data = Vec::with_capacity(numel(&out_shape));
        for o in 0..outer {
            for &v in xs {
                let t = self.value(v);
                let len = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * len..(o + 1) * len]);
            }
        }
        let value = Tensor::from_parts(out_shape, data);
        self.push(value, Op::Concat { xs: xs.to_vec(), axis }, "concat")
    }

    /// Elements `start..end` along `axis`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        self.check_var(x)?;
        let shape = self.value(x).shape().to_vec();
        check_axis(&shape, axis)?;
        if start >= end || end > shape[axis] {
            return Err(TensorError::Index(format!(
                "slice {start}..{end} on axis {axis} of {shape:?}"
            )));
        }
        let (outer, total, inner) = split_axis(&shape, axis);
        let len = end - start;
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let from = (o * total + start) * inner;
            data.extend_from_slice(&src[from..from + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        let value = Tensor::from_parts(out_shape, data);
        self.push(value, Op::Slice { x, axis, start }, "slice")
    }

    /// Picks entries along `axis` in `indices` order; repeated indices copy
    /// the same slab and accumulate their gradients.
    pub fn index_select(&mut self, x: Var, axis: usize, indices: &[usize]) -> Result<Var> {
        self.check_var(x)?;
        let shape = self.value(x).shape().to_vec();
        check_axis(&shape, axis)?;
        if indices.is_empty() {
            return Err(TensorError::Argument("index_select with no indices".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= shape[axis]) {
            return Err(TensorError::Index(format!(
                "index {bad} out of range for extent {} on axis {axis}",
                shape[axis]
            )));
        }
        let (outer, total, inner) = split_axis(&shape, axis);
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(outer * indices.len() * inner);
        for o in 0..outer {
            for &i in indices {
                let from = (o * total + i) * inner;
                data.extend_from_slice(&src[from..from + inner]);
            }
        }
        let mut out_shape = shape;
        out_shape[axis] = indices.len();
        let value = Tensor::from_parts(out_shape, data);
        self.push(
            value,
            Op::IndexSelect { x, axis, indices: indices.to_vec() },
            "index_select",
        )
    }

    /// Rows of a rank-2 tensor in `indices` order.
    pub fn gather_rows(&mut self, x: Var, indices: &[usize]) -> Result<Var> {
        if self.value(x).rank() != 2 {
            return shape_err(format!("gather_rows needs [n, d], got {:?}", self.shape(x)));
        }
        self.index_select(x, 0, indices)
    }
}
