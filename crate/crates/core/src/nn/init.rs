use brau_tensor::{Real, Tensor};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Standard deviation for linear and attention weights.
pub const LINEAR_STD: f64 = 0.02;

/// Normal samples clipped to ±2σ by rejection.
pub fn trunc_normal<T: Real>(shape: &[usize], std: f64, rng: &mut impl Rng) -> Tensor<T> {
    let dist = Normal::new(0.0, 1.0).expect("unit normal");
    Tensor::from_fn(shape, |_| loop {
        let z: f64 = dist.sample(rng);
        if z.abs() <= 2.0 {
            break T::of(z * std);
        }
    })
}

/// Normal with variance `2 / fan_out`, `fan_out = out_ch / groups · kh · kw`.
pub fn conv_normal<T: Real>(shape: &[usize; 4], groups: usize, rng: &mut impl Rng) -> Tensor<T> {
    let fan_out = shape[0] / groups * shape[2] * shape[3];
    let dist = Normal::new(0.0, (2.0 / fan_out as f64).sqrt()).expect("finite std");
    Tensor::from_fn(shape, |_| T::of(dist.sample(rng)))
}
