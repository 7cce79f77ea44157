use crate::error::Result;
use crate::ops::shape::{check_axis, split_axis};
use crate::real::Real;
use crate::tape::{Op, Tape, Var};
use crate::tensor::Tensor;

fn axis_sum<T: Real>(x: &Tensor<T>, axis: usize, scale: T) -> Vec<T> {
    let (outer, len, inner) = split_axis(x.shape(), axis);
    let src = x.data();
    let mut out = vec![T::zero(); outer * inner];
    for o in 0..outer {
        let acc = &mut out[o * inner..(o + 1) * inner];
        for l in 0..len {
            let row = &src[(o * len + l) * inner..(o * len + l + 1) * inner];
            for (a, &v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        for a in acc.iter_mut() {
            *a *= scale;
        }
    }
    out
}

pub(crate) fn sum_axis_backward<T: Real>(g: &Tensor<T>, in_shape: &[usize], axis: usize, scale: T) -> Tensor<T> {
    let (outer, len, inner) = split_axis(in_shape, axis);
    let gd = g.data();
    let mut data = Vec::with_capacity(outer * len * inner);
    for o in 0..outer {
        let row = &gd[o * inner..(o + 1) * inner];
        for _ in 0..len {
            data.extend(row.iter().map(|&v| v * scale));
        }
    }
    Tensor::from_parts(in_shape.to_vec(), data)
}

/// Applies `f` to every lane (1-D fibre) along `axis`, passing the lane's
/// flat offsets.
fn for_each_lane(shape: &[usize], axis: usize, mut f: impl FnMut(&[usize])) {
    let (outer, len, inner) = split_axis(shape, axis);
    let mut offsets = vec![0; len];
    for o in 0..outer {
        for j in 0..inner {
            for (l, off) in offsets.iter_mut().enumerate() {
                *off = (o * len + l) * inner + j;
            }
            f(&offsets);
        }
    }
}

pub(crate) fn softmax_tensor<T: Real>(x: &Tensor<T>, axis: usize) -> Tensor<T> {
    let src = x.data();
    let mut out = vec![T::zero(); src.len()];
    for_each_lane(x.shape(), axis, |lane| {
        let max = lane.iter().map(|&i| src[i]).fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for &i in lane {
            let e = (src[i] - max).exp();
            out[i] = e;
            total += e;
        }
        for &i in lane {
            out[i] /= total;
        }
    });
    Tensor::from_parts(x.shape().to_vec(), out)
}

pub(crate) fn softmax_backward<T: Real>(y: &Tensor<T>, g: &Tensor<T>, axis: usize) -> Tensor<T> {
    let (yd, gd) = (y.data(), g.data());
    let mut out = vec![T::zero(); yd.len()];
    for_each_lane(y.shape(), axis, |lane| {
        let dot = lane.iter().fold(T::zero(), |acc, &i| acc + gd[i] * yd[i]);
        for &i in lane {
            out[i] = yd[i] * (gd[i] - dot);
        }
    });
    Tensor::from_parts(y.shape().to_vec(), out)
}

fn log_softmax_tensor<T: Real>(x: &Tensor<T>, axis: usize) -> Tensor<T> {
    let src = x.data();
    let mut out = vec![T::zero(); src.len()];
    for_each_lane(x.shape(), axis, |lane| {
        let max = lane.iter().map(|&i| src[i]).fold(T::neg_infinity(), T::max);
        let total = lane.iter().fold(T::zero(), |acc, &i| acc + (src[i] - max).exp());
        let lse = max + total.ln();
        for &i in lane {
            out[i] = src[i] - lse;
        }
    });
    Tensor::from_parts(x.shape().to_vec(), out)
}

pub(crate) fn log_softmax_backward<T: Real>(y: &Tensor<T>, g: &Tensor<T>, axis: usize) -> Tensor<T> {
    let (yd, gd) = (y.data(), g.data());
    let mut out = vec![T::zero(); yd.len()];
    for_each_lane(y.shape(), axis, |lane| {
        let total = lane.iter().fold(T::zero(), |acc, &i| acc + gd[i]);
        for &i in lane {
            out[i] = gd[i] - yd[i].exp() * total;
        }
    });
    Tensor::from_parts(y.shape().to_vec(), out)
}

impl<T: Real> Tape<T> {
    /// Sum of every element, as a rank-0 tensor.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.check_var(x)?;
        let value = Tensor::scalar(self.value(x).sum());
        self.push(value, Op::SumAll(x), "sum")
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).numel() as f64;
        let s = self.sum(x)?;
        self.scale(s, 1.0 / n)
    }

    fn reduce_axis(&mut self, x: Var, axis: usize, keepdim: bool, mean: bool) -> Result<Var> {
        self.check_var(x)?;
        let shape = self.value(x).shape().to_vec();
        check_axis(&shape, axis)?;
        let scale = if mean { 1.0 / shape[axis] as f64 } else { 1.0 };
        let data = axis_sum(self.value(x), axis, T::of(scale));
        let mut out_shape = shape;
        if keepdim {
            out_shape[axis] = 1;
        } else {
            out_shape.remove(axis);
        }
        let value = Tensor::from_parts(out_shape, data);
        self.push(value, Op::SumAxis { x, axis, scale }, if mean { "mean_axis" } else { "sum_axis" })
    }

    pub fn sum_axis(&mut self, x: Var, axis: usize, keepdim: bool) -> Result<Var> {
        self.reduce_axis(x, axis, keepdim, false)
    }

    pub fn mean_axis(&mut self, x: Var, axis: usize, keepdim: bool) -> Result<Var> {
        self.reduce_axis(x, axis, keepdim, true)
    }

    /// Max-shifted softmax along `axis`.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        self.check_var(x)?;
        check_axis(self.value(x).shape(), axis)?;
        let value = softmax_tensor(self.value(x), axis);
        self.push(value, Op::Softmax { x, axis }, "softmax")
    }

    pub fn log_softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        self.check_var(x)?;
        check_axis(self.value(x).shape(), axis)?;
        let value = log_softmax_tensor(self.value(x), axis);
        self.push(value, Op::LogSoftmax { x, axis }, "log_softmax")
    }
}

/// Softmax of a plain tensor, outside any tape.
pub fn softmax<T: Real>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    check_axis(x.shape(), axis)?;
    Ok(softmax_tensor(x, axis))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_reference_values() {
        let x = Tensor::<f64>::from_f64(vec![3], &[0.0, 0.0, 0.0]).unwrap();
        for v in softmax(&x, 0).unwrap().data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let x = Tensor::<f64>::from_f64(vec![2], &[1000.0, 0.0]).unwrap();
        assert_eq!(softmax(&x, 0).unwrap().to_f64_vec(), vec![1.0, 0.0]);
        // e^x / Σe^x for [1, 2, 3]
        let x = Tensor::<f64>::from_f64(vec![3], &[1.0, 2.0, 3.0]).unwrap();
        let y = softmax(&x, 0).unwrap().to_f64_vec();
        for (got, want) in y.iter().zip([0.090_030_573, 0.244_728_471, 0.665_240_956]) {
            assert!((got - want).abs() < 1e-8);
        }
    }

    #[test]
    fn softmax_over_middle_axis() {
        let x = Tensor::<f64>::from_fn(&[2, 3, 2], |i| (i as f64 * 0.7).sin());
        let y = softmax(&x, 1).unwrap();
        for o in 0..2 {
            for j in 0..2 {
                let s: f64 = (0..3).map(|l| y.at(&[o, l, j]).unwrap()).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mean_axis_shapes() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::from_fn(&[2, 3, 4], |i| i as f64));
        let m = tape.mean_axis(x, 1, false).unwrap();
        assert_eq!(tape.shape(m), &[2, 4]);
        assert_eq!(tape.value(m).at(&[0, 0]).unwrap(), 4.0);
        let k = tape.sum_axis(x, 2, true).unwrap();
        assert_eq!(tape.shape(k), &[2, 3, 1]);
    }
}
