use crate::error::{shape_err, Result};
use crate::ops::shape::{strided_copy, strided_scatter_add};
use crate::real::Real;
use crate::tape::{Op, Tape, Var};
use crate::tensor::{contiguous_strides, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum BinaryKind {
    Add,
    Sub,
    Mul,
    Div,
}

/// Numpy-style broadcast of two shapes (trailing alignment).
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for d in 0..rank {
        let ea = if d + a.len() >= rank { a[d + a.len() - rank] } else { 1 };
        let eb = if d + b.len() >= rank { b[d + b.len() - rank] } else { 1 };
        out[d] = match (ea, eb) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return shape_err(format!("cannot broadcast {a:?} with {b:?}")),
        };
    }
    Ok(out)
}

/// Strides of `shape` aligned to `out`, zero along broadcast axes.
pub(crate) fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let own = contiguous_strides(shape);
    let lead = out.len() - shape.len();
    (0..out.len())
        .map(|d| {
            if d < lead || shape[d - lead] == 1 {
                0
            } else {
                own[d - lead]
            }
        })
        .collect()
}

fn expand<T: Real>(t: &Tensor<T>, out: &[usize]) -> Vec<T> {
    if t.shape() == out {
        t.data().to_vec()
    } else {
        strided_copy(t.data(), out, &broadcast_strides(t.shape(), out))
    }
}

fn reduce_to<T: Real>(g: Vec<T>, out: &[usize], target: &[usize]) -> Tensor<T> {
    if out == target {
        return Tensor::from_parts(target.to_vec(), g);
    }
    let mut acc = Tensor::zeros(target);
    strided_scatter_add(acc.data_mut(), &g, out, &broadcast_strides(target, out));
    acc
}

fn apply<T: Real>(kind: BinaryKind, x: T, y: T) -> T {
    match kind {
        BinaryKind::Add => x + y,
        BinaryKind::Sub => x - y,
        BinaryKind::Mul => x * y,
        BinaryKind::Div => x / y,
    }
}

pub(crate) fn binary_forward<T: Real>(kind: BinaryKind, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape() == b.shape() {
        let data = a.data().iter().zip(b.data()).map(|(&x, &y)| apply(kind, x, y)).collect();
        return Ok(Tensor::from_parts(a.shape().to_vec(), data));
    }
    let out = broadcast_shape(a.shape(), b.shape())?;
    let ea = expand(a, &out);
    let eb = expand(b, &out);
    let data = ea.iter().zip(&eb).map(|(&x, &y)| apply(kind, x, y)).collect();
    Ok(Tensor::from_parts(out, data))
}

pub(crate) fn binary_backward<T: Real>(
    kind: BinaryKind,
    a: &Tensor<T>,
    b: &Tensor<T>,
    g: &Tensor<T>,
    need_a: bool,
    need_b: bool,
) -> (Option<Tensor<T>>, Option<Tensor<T>>) {
    let out = g.shape();
    let gd = g.data();
    let ga = need_a.then(|| {
        let local: Vec<T> = match kind {
            BinaryKind::Add | BinaryKind::Sub => gd.to_vec(),
            BinaryKind::Mul => gd.iter().zip(expand(b, out)).map(|(&g, y)| g * y).collect(),
            BinaryKind::Div => gd.iter().zip(expand(b, out)).map(|(&g, y)| g / y).collect(),
        };
        reduce_to(local, out, a.shape())
    });
    let gb = need_b.then(|| {
        let local: Vec<T> = match kind {
            BinaryKind::Add => gd.to_vec(),
            BinaryKind::Sub => gd.iter().map(|&g| -g).collect(),
            BinaryKind::Mul => gd.iter().zip(expand(a, out)).map(|(&g, x)| g * x).collect(),
            BinaryKind::Div => {
                let ea = expand(a, out);
                let eb = expand(b, out);
                gd.iter()
                    .zip(ea.iter().zip(&eb))
                    .map(|(&g, (&x, &y))| -g * x / (y * y))
                    .collect()
            }
        };
        reduce_to(local, out, b.shape())
    });
    (ga, gb)
}

const INV_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Exact GELU, `x·Φ(x)`.
pub fn gelu_scalar<T: Real>(x: T) -> T {
    let half = T::of(0.5);
    x * half * (T::one() + (x * T::of(INV_SQRT_2)).erf())
}

pub(crate) fn gelu_backward<T: Real>(x: &Tensor<T>, g: &Tensor<T>) -> Tensor<T> {
    let half = T::of(0.5);
    let data = x
        .data()
        .iter()
        .zip(g.data())
        .map(|(&x, &g)| {
            let cdf = half * (T::one() + (x * T::of(INV_SQRT_2)).erf());
            let pdf = T::of(INV_SQRT_2PI) * (-half * x * x).exp();
            g * (cdf + x * pdf)
        })
        .collect();
    Tensor::from_parts(x.shape().to_vec(), data)
}

impl<T: Real> Tape<T> {
    fn binary(&mut self, kind: BinaryKind, a: Var, b: Var, name: &'static str) -> Result<Var> {
        self.check_var(a)?;
        self.check_var(b)?;
        let value = binary_forward(kind, self.value(a), self.value(b))?;
        self.push(value, Op::Binary(kind, a, b), name)
    }

    /// Elementwise sum with broadcasting.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Add, a, b, "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Sub, a, b, "sub")
    }

    /// Elementwise product with broadcasting.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Mul, a, b, "mul")
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Div, a, b, "div")
    }

    /// `mul·x + add` with constant coefficients.
    pub fn affine(&mut self, x: Var, mul: f64, add: f64) -> Result<Var> {
        self.check_var(x)?;
        let (m, c) = (T::of(mul), T::of(add));
        let value = self.value(x).map(|v| v * m + c);
        self.push(value, Op::Affine { x, mul }, "affine")
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var> {
        self.affine(x, factor, 0.0)
    }

    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        self.check_var(x)?;
        let value = self.value(x).map(gelu_scalar);
        self.push(value, Op::Gelu(x), "gelu")
    }
}
