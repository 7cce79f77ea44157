use brau_metrics::SegMask;
use brau_tensor::{Real, Tape, Tensor, Var};

use crate::error::{config_err, CoreError, Result};

/// Smoothing term of the soft-Dice ratio.
pub const DICE_SMOOTH: f64 = 1.0;

/// One-hot encoding of a mask batch as `[B, classes, H, W]`.
pub fn one_hot<T: Real>(targets: &[SegMask], classes: usize) -> Result<Tensor<T>> {
    let Some(first) = targets.first() else {
        return config_err("empty target batch");
    };
    let (w, h) = (first.width(), first.height());
    let plane = w * h;
    let mut data = vec![T::zero(); targets.len() * classes * plane];
    for (b, m) in targets.iter().enumerate() {
        if m.width() != w || m.height() != h {
            return config_err(format!("target {b} is {}x{}, expected {w}x{h}", m.width(), m.height()));
        }
        for (p, &l) in m.labels().iter().enumerate() {
            if l as usize >= classes {
                return Err(CoreError::Data(format!("label {l} out of range for {classes} classes")));
            }
            data[(b * classes + l as usize) * plane + p] = T::one();
        }
    }
    Ok(Tensor::new(vec![targets.len(), classes, h, w], data)?)
}

fn check_logits<T: Real>(tape: &Tape<T>, logits: Var, onehot: &Tensor<T>) -> Result<()> {
    if tape.shape(logits) != onehot.shape() {
        return config_err(format!(
            "logits {:?} do not match targets {:?}",
            tape.shape(logits),
            onehot.shape()
        ));
    }
    Ok(())
}

/// Mean per-pixel cross-entropy of `[B,K,H,W]` logits.
pub fn cross_entropy<T: Real>(tape: &mut Tape<T>, logits: Var, onehot: &Tensor<T>) -> Result<Var> {
    check_logits(tape, logits, onehot)?;
    let s = onehot.shape();
    let pixels = (s[0] * s[2] * s[3]) as f64;
    let logp = tape.log_softmax(logits, 1)?;
    let y = tape.constant(onehot.clone());
    let picked = tape.mul(logp, y)?;
    let total = tape.sum(picked)?;
    Ok(tape.scale(total, -1.0 / pixels)?)
}

/// Mean soft-Dice over foreground classes `1..K`, pooled over the batch.
pub fn soft_dice<T: Real>(tape: &mut Tape<T>, logits: Var, onehot: &Tensor<T>) -> Result<Var> {
    check_logits(tape, logits, onehot)?;
    let classes = onehot.shape()[1];
    let probs = tape.softmax(logits, 1)?;
    let y = tape.constant(onehot.clone());
    let inter = tape.mul(probs, y)?;
    let per_class = |tape: &mut Tape<T>, v: Var| -> Result<Var> {
        let v = tape.sum_axis(v, 3, false)?;
        let v = tape.sum_axis(v, 2, false)?;
        Ok(tape.sum_axis(v, 0, false)?)
    };
    let inter = per_class(tape, inter)?;
    let psum = per_class(tape, probs)?;
    let ysum = per_class(tape, y)?;
    let num = tape.affine(inter, 2.0, DICE_SMOOTH)?;
    let den = tape.add(psum, ysum)?;
    let den = tape.affine(den, 1.0, DICE_SMOOTH)?;
    let dice = tape.div(num, den)?;
    let fg = tape.slice(dice, 0, 1, classes)?;
    Ok(tape.mean(fg)?)
}

/// `w_ce · CE + w_dice · (1 − soft Dice)`.
pub fn seg_loss<T: Real>(
    tape: &mut Tape<T>,
    logits: Var,
    targets: &[SegMask],
    w_ce: f64,
    w_dice: f64,
) -> Result<Var> {
    let classes = tape.shape(logits).get(1).copied().unwrap_or(0);
    if classes < 2 {
        return config_err("segmentation loss needs at least two classes");
    }
    let onehot = one_hot::<T>(targets, classes)?;
    let ce = cross_entropy(tape, logits, &onehot)?;
    let dice = soft_dice(tape, logits, &onehot)?;
    let ce = tape.scale(ce, w_ce)?;
    let dice = tape.affine(dice, -w_dice, w_dice)?;
    Ok(tape.add(ce, dice)?)
}
