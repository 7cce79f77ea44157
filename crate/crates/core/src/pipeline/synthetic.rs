use std::path::Path;

use brau_metrics::{SegMask, FH_LABEL, PS_LABEL};
use brau_tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::data::{write_image, Sample};
use crate::error::{io_err, Result};

/// A textured background with an elliptical head and a bar-shaped
/// symphysis, both brighter than the background.
pub fn synthetic_case(size: usize, seed: u64) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = size as f64;
    let (fx, fy) = (rng.random_range(0.2..0.5), rng.random_range(0.2..0.5));
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (ecx, ecy) = (rng.random_range(0.6..0.7) * s, rng.random_range(0.45..0.6) * s);
    let (ea, eb) = (rng.random_range(0.17..0.22) * s, rng.random_range(0.13..0.17) * s);
    let etheta: f64 = rng.random_range(-0.5..0.5);
    let (bcx, bcy) = (rng.random_range(0.2..0.25) * s, rng.random_range(0.25..0.35) * s);
    let btheta: f64 = rng.random_range(0.35..0.7);
    let (half_len, half_thick) = (0.15 * s, 0.05 * s);
    let noise: Vec<f64> = (0..size * size).map(|_| rng.random_range(-0.05..0.05)).collect();

    let (ec, es) = (etheta.cos(), etheta.sin());
    let (bc, bs) = (btheta.cos(), btheta.sin());
    let label = |x: usize, y: usize| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let (dx, dy) = (px - bcx, py - bcy);
        let (u, v) = (dx * bc + dy * bs, -dx * bs + dy * bc);
        if u.abs() <= half_len && v.abs() <= half_thick {
            return PS_LABEL;
        }
        let (dx, dy) = (px - ecx, py - ecy);
        let (u, v) = (dx * ec + dy * es, -dx * es + dy * ec);
        if (u / ea).powi(2) + (v / eb).powi(2) <= 1.0 {
            return FH_LABEL;
        }
        0
    };
    let mask = SegMask::from_fn(size, size, label).expect("valid labels");
    let image = Tensor::from_fn(&[1, size, size], |i| {
        let (x, y) = (i % size, i / size);
        let base = match mask.get(x, y) {
            PS_LABEL => 0.9,
            FH_LABEL => 0.65,
            _ => 0.3 + 0.1 * (x as f64 * fx + phase).sin() * (y as f64 * fy).cos(),
        };
        (base + noise[i]) as f32
    });
    Sample { name: format!("case_{seed:04}"), image, mask }
}

/// `count` synthetic cases with seeds `seed..seed + count`.
pub fn synthetic_set(count: usize, size: usize, seed: u64) -> Vec<Sample> {
    (0..count as u64).map(|i| synthetic_case(size, seed + i)).collect()
}

/// Writes samples in the `images/`, `masks/` directory layout.
pub fn write_dataset(root: impl AsRef<Path>, samples: &[Sample]) -> Result<()> {
    let root = root.as_ref();
    for sub in ["images", "masks"] {
        let dir = root.join(sub);
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }
    for s in samples {
        write_image(root.join("images").join(format!("{}.png", s.name)), &s.image)?;
        s.mask.write_png(root.join("masks").join(format!("{}.png", s.name)))?;
    }
    Ok(())
}
