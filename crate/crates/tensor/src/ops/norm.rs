use crate::error::{shape_err, Result, TensorError};
use crate::real::Real;
use crate::tape::{Op, Tape, Var};
use crate::tensor::Tensor;

/// Forward state kept for the backward pass of layer/batch normalization.
pub(crate) struct NormSaved<T: Real> {
    pub x: Var,
    pub gamma: Var,
    pub beta: Var,
    /// Normalized input, same layout as `x`.
    xhat: Vec<T>,
    /// One reciprocal standard deviation per normalized group.
    rstd: Vec<T>,
    /// Whether the statistics depend on `x` (layernorm, training batchnorm).
    batch_coupled: bool,
    shape: Vec<usize>,
}

/// Statistics source for batch normalization.
pub enum BatchNormMode<'a, T: Real> {
    /// Normalize with the batch's own mean and variance.
    Train,
    /// Normalize with fixed running statistics.
    Eval { mean: &'a [T], var: &'a [T] },
}

/// Output of a batch-norm call. In training mode it carries the batch mean
/// and the unbiased batch variance for running-statistic updates.
pub struct BatchNormOutput<T: Real> {
    pub out: Var,
    pub batch_stats: Option<(Vec<T>, Vec<T>)>,
}

fn check_affine<T: Real>(tape: &Tape<T>, gamma: Var, beta: Var, width: usize) -> Result<()> {
    tape.check_var(gamma)?;
    tape.check_var(beta)?;
    if tape.shape(gamma) != [width] || tape.shape(beta) != [width] {
        return shape_err(format!(
            "norm affine parameters {:?}/{:?} for width {width}",
            tape.shape(gamma),
            tape.shape(beta)
        ));
    }
    Ok(())
}

/// Index of the normalization group and of the affine channel for flat
/// element `i`.
fn group_of(shape: &[usize], layer: bool, i: usize) -> (usize, usize) {
    if layer {
        let c = shape[shape.len() - 1];
        (i / c, i % c)
    } else {
        let plane = shape[2] * shape[3];
        let ch = (i / plane) % shape[1];
        (ch, ch)
    }
}

fn backward<T: Real>(saved: &NormSaved<T>, gamma: &Tensor<T>, g: &Tensor<T>, layer: bool) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let gd = g.data();
    let gam = gamma.data();
    let width = gam.len();
    let groups = saved.rstd.len();
    let mut g_gamma = vec![T::zero(); width];
    let mut g_beta = vec![T::zero(); width];
    // Per-group sums of dxhat and dxhat·xhat.
    let mut s1 = vec![T::zero(); groups];
    let mut s2 = vec![T::zero(); groups];
    let mut count = vec![0usize; groups];
    for (i, &gv) in gd.iter().enumerate() {
        let (grp, ch) = group_of(&saved.shape, layer, i);
        let xh = saved.xhat[i];
        g_gamma[ch] += gv * xh;
        g_beta[ch] += gv;
        let dxh = gv * gam[ch];
        s1[grp] += dxh;
        s2[grp] += dxh * xh;
        count[grp] += 1;
    }
    let mut gx = vec![T::zero(); gd.len()];
    for (i, out) in gx.iter_mut().enumerate() {
        let (grp, ch) = group_of(&saved.shape, layer, i);
        let dxh = gd[i] * gam[ch];
        *out = if saved.batch_coupled {
            let n = T::of(count[grp] as f64);
            saved.rstd[grp] * (dxh - s1[grp] / n - saved.xhat[i] * s2[grp] / n)
        } else {
            saved.rstd[grp] * dxh
        };
    }
    (
        Tensor::from_parts(saved.shape.clone(), gx),
        Tensor::from_parts(vec![width], g_gamma),
        Tensor::from_parts(vec![width], g_beta),
    )
}

pub(crate) fn layer_norm_backward<T: Real>(saved: &NormSaved<T>, gamma: &Tensor<T>, g: &Tensor<T>) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    backward(saved, gamma, g, true)
}

pub(crate) fn batch_norm_backward<T: Real>(saved: &NormSaved<T>, gamma: &Tensor<T>, g: &Tensor<T>) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    backward(saved, gamma, g, false)
}

impl<T: Real> Tape<T> {
    /// Normalizes each vector along the last axis to zero mean and unit
    /// (biased) variance, then applies `gamma`/`beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        self.check_var(x)?;
        let shape = self.shape(x).to_vec();
        let Some(&width) = shape.last() else {
            return shape_err("layer_norm on a scalar");
        };
        check_affine(self, gamma, beta, width)?;
        let xd = self.value(x).data();
        let (gam, bet) = (self.value(gamma).data(), self.value(beta).data());
        let n = T::of(width as f64);
        let mut xhat = vec![T::zero(); xd.len()];
        let mut out = vec![T::zero(); xd.len()];
        let mut rstd = Vec::with_capacity(xd.len() / width);
        for (r, row) in xd.chunks_exact(width).enumerate() {
            let mean = row.iter().fold(T::zero(), |a, &v| a + v) / n;
            let var = row.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / n;
            let rs = T::one() / (var + T::of(eps)).sqrt();
            rstd.push(rs);
            for c in 0..width {
                let i = r * width + c;
                xhat[i] = (row[c] - mean) * rs;
                out[i] = xhat[i] * gam[c] + bet[c];
            }
        }
        let value = Tensor::from_parts(shape.clone(), out);
        let saved = NormSaved { x, gamma, beta, xhat, rstd, batch_coupled: true, shape };
        self.push(value, Op::LayerNorm(saved), "layer_norm")
    }

    /// Per-channel normalization of NCHW input.
    pub fn batch_norm2d(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        eps: f64,
        mode: BatchNormMode<'_, T>,
    ) -> Result<BatchNormOutput<T>> {
        self.check_var(x)?;
        let shape = self.shape(x).to_vec();
        if shape.len() != 4 {
            return shape_err(format!("batch_norm2d expects [B,C,H,W], got {shape:?}"));
        }
        let (batch, ch, plane) = (shape[0], shape[1], shape[2] * shape[3]);
        check_affine(self, gamma, beta, ch)?;
        let xd = self.value(x).data();
        let count = batch * plane;
        let lane = |c: usize| {
            (0..batch).flat_map(move |b| {
                let base = (b * ch + c) * plane;
                base..base + plane
            })
        };
        let (mean, var, batch_stats) = match mode {
            BatchNormMode::Train => {
                let n = T::of(count as f64);
                let mut mean = vec![T::zero(); ch];
                let mut var = vec![T::zero(); ch];
                let mut unbiased = vec![T::zero(); ch];
                for c in 0..ch {
                    let m = lane(c).fold(T::zero(), |a, i| a + xd[i]) / n;
                    let ss = lane(c).fold(T::zero(), |a, i| a + (xd[i] - m) * (xd[i] - m));
                    mean[c] = m;
                    var[c] = ss / n;
                    unbiased[c] = if count > 1 { ss / T::of((count - 1) as f64) } else { var[c] };
                }
                let stats = (mean.clone(), unbiased);
                (mean, var, Some(stats))
            }
            BatchNormMode::Eval { mean, var } => {
                if mean.len() != ch || var.len() != ch {
                    return Err(TensorError::Argument(format!(
                        "running statistics of width {}/{} for {ch} channels",
                        mean.len(),
                        var.len()
                    )));
                }
                (mean.to_vec(), var.to_vec(), None)
            }
        };
        let (gam, bet) = (self.value(gamma).data(), self.value(beta).data());
        let rstd: Vec<T> = var.iter().map(|&v| T::one() / (v + T::of(eps)).sqrt()).collect();
        let mut xhat = vec![T::zero(); xd.len()];
        let mut out = vec![T::zero(); xd.len()];
        for (i, (&v, (xh, o))) in xd.iter().zip(xhat.iter_mut().zip(out.iter_mut())).enumerate() {
            let c = (i / plane) % ch;
            *xh = (v - mean[c]) * rstd[c];
            *o = *xh * gam[c] + bet[c];
        }
        let value = Tensor::from_parts(shape.clone(), out);
        let saved = NormSaved {
            x,
            gamma,
            beta,
            xhat,
            rstd,
            batch_coupled: batch_stats.is_some(),
            shape,
        };
        let out = self.push(value, Op::BatchNorm(saved), "batch_norm2d")?;
        Ok(BatchNormOutput { out, batch_stats })
    }
}
