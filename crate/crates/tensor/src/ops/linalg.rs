use crate::error::{shape_err, Result};
use crate::ops::elementwise::{broadcast_shape, broadcast_strides};
use crate::real::Real;
use crate::tape::{Op, Tape, Var};
use crate::tensor::{numel, Tensor};

/// Batch layout of a matmul: one `(a_offset, b_offset)` pair per output
/// matrix, plus the matrix extents.
struct Plan {
    m: usize,
    p: usize,
    n: usize,
    out_shape: Vec<usize>,
    pairs: Vec<(usize, usize)>,
}

fn plan(a: &[usize], b: &[usize]) -> Result<Plan> {
    if a.len() < 2 || b.len() < 2 {
        return shape_err(format!("matmul needs rank >= 2, got {a:?} x {b:?}"));
    }
    let (m, p) = (a[a.len() - 2], a[a.len() - 1]);
    let (p2, n) = (b[b.len() - 2], b[b.len() - 1]);
    if p != p2 {
        return shape_err(format!("matmul inner extents differ: {a:?} x {b:?}"));
    }
    let a_batch = &a[..a.len() - 2];
    let b_batch = &b[..b.len() - 2];
    if b_batch.is_empty() {
        // Fold the lhs batch into its rows: one large product.
        let rows = numel(a_batch) * m;
        let mut out_shape = a_batch.to_vec();
        out_shape.extend([m, n]);
        return Ok(Plan { m: rows, p, n, out_shape, pairs: vec![(0, 0)] });
    }
    let batch = broadcast_shape(a_batch, b_batch)?;
    let sa = broadcast_strides(a_batch, &batch);
    let sb = broadcast_strides(b_batch, &batch);
    let count = numel(&batch);
    let mut pairs = Vec::with_capacity(count);
    let mut idx = vec![0usize; batch.len()];
    let (mut oa, mut ob) = (0usize, 0usize);
    for _ in 0..count {
        pairs.push((oa * m * p, ob * p * n));
        for d in (0..batch.len()).rev() {
            idx[d] += 1;
            oa += sa[d];
            ob += sb[d];
            if idx[d] < batch[d] {
                break;
            }
            oa -= sa[d] * batch[d];
            ob -= sb[d] * batch[d];
            idx[d] = 0;
        }
    }
    let mut out_shape = batch;
    out_shape.extend([m, n]);
    Ok(Plan { m, p, n, out_shape, pairs })
}

pub(crate) fn matmul_forward<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let plan = plan(a.shape(), b.shape())?;
    let Plan { m, p, n, .. } = plan;
    let mut out = vec![T::zero(); numel(&plan.out_shape)];
    for (i, &(oa, ob)) in plan.pairs.iter().enumerate() {
        T::gemm(
            m,
            p,
            n,
            &a.data()[oa..],
            (p as isize, 1),
            &b.data()[ob..],
            (n as isize, 1),
            T::zero(),
            &mut out[i * m * n..],
            (n as isize, 1),
        );
    }
    Ok(Tensor::from_parts(plan.out_shape, out))
}

pub(crate) fn matmul_backward<T: Real>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    g: &Tensor<T>,
    need_a: bool,
    need_b: bool,
) -> (Option<Tensor<T>>, Option<Tensor<T>>) {
    let plan = plan(a.shape(), b.shape()).expect("shapes validated in forward");
    let Plan { m, p, n, .. } = plan;
    let mut ga = need_a.then(|| Tensor::zeros(a.shape()));
    let mut gb = need_b.then(|| Tensor::zeros(b.shape()));
    for (i, &(oa, ob)) in plan.pairs.iter().enumerate() {
        let gblock = &g.data()[i * m * n..];
        if let Some(ga) = ga.as_mut() {
            // dA = G · Bᵀ
            T::gemm(
                m,
                n,
                p,
                gblock,
                (n as isize, 1),
                &b.data()[ob..],
                (1, n as isize),
                T::one(),
                &mut ga.data_mut()[oa..],
                (p as isize, 1),
            );
        }
        if let Some(gb) = gb.as_mut() {
            // dB = Aᵀ · G
            T::gemm(
                p,
                m,
                n,
                &a.data()[oa..],
                (1, p as isize),
                gblock,
                (n as isize, 1),
                T::one(),
                &mut gb.data_mut()[ob..],
                (n as isize, 1),
            );
        }
    }
    (ga, gb)
}

impl<T: Real> Tape<T> {
    /// Batched matrix product `[.., m, p] × [.., p, n]`, broadcasting the
    /// leading batch axes.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_var(a)?;
        self.check_var(b)?;
        let value = matmul_forward(self.value(a), self.value(b))?;
        self.push(value, Op::MatMul(a, b), "matmul")
    }
}
