use brau_metrics::SegMask;
use brau_tensor::Tensor;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Probability of a horizontal flip.
    pub flip_prob: f64,
    /// Rotation angle is uniform in `[-rotation_degrees, rotation_degrees]`.
    pub rotation_degrees: f64,
}

impl AugmentConfig {
    pub fn disabled() -> Self {
        Self { flip_prob: 0.0, rotation_degrees: 0.0 }
    }
}

pub fn flip_horizontal(image: &Tensor<f32>, mask: &SegMask) -> (Tensor<f32>, SegMask) {
    let w = mask.width();
    let img = Tensor::from_fn(image.shape(), |i| {
        let x = i % w;
        image.data()[i - x + (w - 1 - x)]
    });
    let m = SegMask::with_spacing(
        w,
        mask.height(),
        (0..w * mask.height()).map(|i| mask.labels()[i - i % w + (w - 1 - i % w)]).collect(),
        mask.pixel_spacing(),
    )
    .expect("same extents");
    (img, m)
}

/// Rotates about the image centre: bilinear for the image, nearest
/// neighbour for the mask. Pixels sampled from outside become 0.
pub fn rotate(image: &Tensor<f32>, mask: &SegMask, degrees: f64) -> (Tensor<f32>, SegMask) {
    let (w, h) = (mask.width(), mask.height());
    let channels = image.shape()[0];
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (c, s) = (degrees.to_radians().cos(), degrees.to_radians().sin());
    let source = |x: usize, y: usize| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        (c * dx + s * dy + cx, -s * dx + c * dy + cy)
    };
    let mut img = vec![0f32; image.numel()];
    let mut labels = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = source(x, y);
            let (nx, ny) = (sx.round(), sy.round());
            if nx >= 0.0 && ny >= 0.0 && (nx as usize) < w && (ny as usize) < h {
                labels[y * w + x] = mask.get(nx as usize, ny as usize);
            }
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            for ch in 0..channels {
                let plane = &image.data()[ch * w * h..(ch + 1) * w * h];
                let at = |xi: f64, yi: f64| {
                    if xi < 0.0 || yi < 0.0 || xi as usize >= w || yi as usize >= h {
                        0.0
                    } else {
                        plane[yi as usize * w + xi as usize] as f64
                    }
                };
                let v = (1.0 - fx) * (1.0 - fy) * at(x0, y0)
                    + fx * (1.0 - fy) * at(x0 + 1.0, y0)
                    + (1.0 - fx) * fy * at(x0, y0 + 1.0)
                    + fx * fy * at(x0 + 1.0, y0 + 1.0);
                img[ch * w * h + y * w + x] = v as f32;
            }
        }
    }
    let img = Tensor::new(image.shape().to_vec(), img).expect("same shape");
    let m = SegMask::with_spacing(w, h, labels, mask.pixel_spacing()).expect("same extents");
    (img, m)
}

/// Applies the same random flip/rotation to an image and its mask. The
/// random draws are made even when a transform is disabled, so the stream
/// position does not depend on the configuration.
pub fn augment(image: &Tensor<f32>, mask: &SegMask, cfg: &AugmentConfig, rng: &mut impl Rng) -> (Tensor<f32>, SegMask) {
    let flip_draw: f64 = rng.random();
    let angle_draw: f64 = rng.random_range(-1.0..=1.0);
    let (mut img, mut m) = (image.clone(), mask.clone());
    if flip_draw < cfg.flip_prob {
        (img, m) = flip_horizontal(&img, &m);
    }
    if cfg.rotation_degrees > 0.0 {
        (img, m) = rotate(&img, &m, angle_draw * cfg.rotation_degrees);
    }
    (img, m)
}
