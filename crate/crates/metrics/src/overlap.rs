use crate::error::Result;
use crate::mask::{SegMask, Structure};

/// Dice similarity `2|A∩B| / (|A|+|B|)`; two empty regions score 1.
pub fn dsc(pred: &SegMask, gt: &SegMask, s: Structure) -> Result<f64> {
    pred.check_same_shape(gt)?;
    let (mut inter, mut a, mut b) = (0usize, 0usize, 0usize);
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        let (ip, ig) = (s.contains(p), s.contains(g));
        a += ip as usize;
        b += ig as usize;
        inter += (ip && ig) as usize;
    }
    if a + b == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (a + b) as f64)
}
