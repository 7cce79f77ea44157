use brau_metrics::SegMask;
use brau_tensor::{Real, Tensor};

use super::data::stack_images;
use crate::error::{config_err, Result};
use crate::model::BrauNet;

/// Per-pixel argmax of `[B, K, H, W]` logits; ties go to the lowest class.
pub fn argmax_masks<T: Real>(logits: &Tensor<T>) -> Result<Vec<SegMask>> {
    let &[b, k, h, w] = logits.shape() else {
        return config_err(format!("logits must be [B,K,H,W], got {:?}", logits.shape()));
    };
    if k > 256 {
        return config_err(format!("{k} classes do not fit 8-bit labels"));
    }
    let plane = h * w;
    let d = logits.data();
    (0..b)
        .map(|bi| {
            let labels = (0..plane)
                .map(|p| {
                    let mut best = 0;
                    for c in 1..k {
                        if d[(bi * k + c) * plane + p] > d[(bi * k + best) * plane + p] {
                            best = c;
                        }
                    }
                    best as u8
                })
                .collect();
            Ok(SegMask::new(w, h, labels)?)
        })
        .collect()
}

/// Segments `[C,H,W]` images (raw intensities; normalized here) in
/// evaluation mode, `batch` images per forward pass.
pub fn predict_batch(model: &BrauNet<f32>, images: &[&Tensor<f32>], batch: usize) -> Result<Vec<SegMask>> {
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(batch.max(1)) {
        let x = stack_images(chunk)?;
        out.extend(argmax_masks(&model.infer(&x)?)?);
    }
    Ok(out)
}

pub fn predict(model: &BrauNet<f32>, image: &Tensor<f32>) -> Result<SegMask> {
    Ok(predict_batch(model, &[image], 1)?.remove(0))
}
