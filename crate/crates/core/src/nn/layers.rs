use brau_tensor::{BatchNormMode, ConvGeom, Real, Tensor, Var};
use rand::Rng;

use super::init::{conv_normal, trunc_normal, LINEAR_STD};
use super::params::{BatchStatUpdate, Ctx, ParamId, ParamStore};
use crate::error::{config_err, CoreError, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;
pub const BATCH_NORM_EPS: f64 = 1e-5;
pub const BATCH_NORM_MOMENTUM: f64 = 0.1;

/// `y = x·W + b` over the trailing axis, with `W: [in, out]`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return config_err(format!("{name}: linear extents must be positive"));
        }
        let weight = store.add(format!("{name}.weight"), trunc_normal(&[in_dim, out_dim], LINEAR_STD, rng), true)?;
        let bias = if bias {
            Some(store.add(format!("{name}.bias"), Tensor::zeros(&[out_dim]), true)?)
        } else {
            None
        };
        Ok(Self { weight, bias, in_dim, out_dim })
    }

    pub fn forward<T: Real>(&self, ctx: &mut Ctx<'_, '_, T>, x: Var) -> Result<Var> {
        let shape = ctx.tape.shape(x).to_vec();
        if shape.last() != Some(&self.in_dim) {
            return Err(CoreError::Config(format!(
                "linear expects trailing extent {}, got {shape:?}",
                self.in_dim
            )));
        }
        let w = ctx.param(self.weight);
        let y = if shape.len() == 1 {
            let row = ctx.tape.reshape(x, &[1, self.in_dim])?;
            let y = ctx.tape.matmul(row, w)?;
            ctx.tape.reshape(y, &[self.out_dim])?
        } else {
            ctx.tape.matmul(x, w)?
        };
        match self.bias {
            Some(b) => {
                let b = ctx.param(b);
                Ok(ctx.tape.add(y, b)?)
            }
            None => Ok(y),
        }
    }
}

/// Cross-correlation over NCHW input.
#[derive(Clone, Debug)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub geom: ConvGeom,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        geom: ConvGeom,
        bias: bool,
    ) -> Result<Self> {
        let g = geom.groups;
        if g == 0 || !in_ch.is_multiple_of(g) || !out_ch.is_multiple_of(g) || kernel == 0 || geom.stride == 0 {
            return config_err(format!(
                "{name}: invalid conv {in_ch}->{out_ch} k{kernel} groups {g} stride {}",
                geom.stride
            ));
        }
        let shape = [out_ch, in_ch / g, kernel, kernel];
        let weight = store.add(format!("{name}.weight"), conv_normal(&shape, g, rng), true)?;
        let bias = if bias {
            Some(store.add(format!("{name}.bias"), Tensor::zeros(&[out_ch]), true)?)
        } else {
            None
        };
        Ok(Self { weight, bias, in_ch, out_ch, kernel, geom })
    }

    /// Depth-wise `k×k` convolution with "same" padding.
    pub fn depthwise<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        ch: usize,
        kernel: usize,
    ) -> Result<Self> {
        if kernel.is_multiple_of(2) {
            return config_err(format!("{name}: depth-wise kernel must be odd, got {kernel}"));
        }
        Self::new(store, rng, name, ch, ch, kernel, ConvGeom::new(1, kernel / 2, ch), true)
    }

    pub fn is_depthwise(&self) -> bool {
        self.geom.groups == self.in_ch && self.in_ch == self.out_ch
    }

    pub fn forward<T: Real>(&self, ctx: &mut Ctx<'_, '_, T>, x: Var) -> Result<Var> {
        let shape = ctx.tape.shape(x);
        if shape.len() != 4 || shape[1] != self.in_ch {
            return Err(CoreError::Config(format!(
                "conv expects [B,{},H,W], got {shape:?}",
                self.in_ch
            )));
        }
        let w = ctx.param(self.weight);
        let b = self.bias.map(|b| ctx.param(b));
        Ok(ctx.tape.conv2d(x, w, b, self.geom)?)
    }

    /// Applies the convolution to channel-last `[B,H,W,C]` input.
    pub fn forward_channel_last<T: Real>(&self, ctx: &mut Ctx<'_, '_, T>, x: Var) -> Result<Var> {
        let nchw = ctx.tape.permute(x, &[0, 3, 1, 2])?;
        let y = self.forward(ctx, nchw)?;
        Ok(ctx.tape.permute(y, &[0, 2, 3, 1])?)
    }
}

/// Normalization over the trailing (channel) axis.
#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub scale: ParamId,
    pub shift: ParamId,
    pub width: usize,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new<T: Real>(store: &mut ParamStore<T>, name: &str, width: usize) -> Result<Self> {
        let scale = store.add(format!("{name}.weight"), Tensor::ones(&[width]), true)?;
        let shift = store.add(format!("{name}.bias"), Tensor::zeros(&[width]), true)?;
        Ok(Self { scale, shift, width, eps: LAYER_NORM_EPS })
    }

    pub fn forward<T: Real>(&self, ctx: &mut Ctx<'_, '_, T>, x: Var) -> Result<Var> {
        let g = ctx.param(self.scale);
        let b = ctx.param(self.shift);
        Ok(ctx.tape.layer_norm(x, g, b, self.eps)?)
    }
}

/// Per-channel normalization of NCHW maps with running statistics.
///
/// Before any training update the running statistics are mean 0 and
/// variance 1, so evaluation mode is then the affine map alone (up to ε).
#[derive(Clone, Debug)]
pub struct BatchNorm2d {
    pub scale: ParamId,
    pub shift: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub channels: usize,
    pub eps: f64,
    pub momentum: f64,
}

impl BatchNorm2d {
    pub fn new<T: Real>(store: &mut ParamStore<T>, name: &str, channels: usize) -> Result<Self> {
        let scale = store.add(format!("{name}.weight"), Tensor::ones(&[channels]), true)?;
        let shift = store.add(format!("{name}.bias"), Tensor::zeros(&[channels]), true)?;
        let running_mean = store.add(format!("{name}.running_mean"), Tensor::zeros(&[channels]), false)?;
        let running_var = store.add(format!("{name}.running_var"), Tensor::ones(&[channels]), false)?;
        Ok(Self {
            scale,
            shift,
            running_mean,
            running_var,
            channels,
            eps: BATCH_NORM_EPS,
            momentum: BATCH_NORM_MOMENTUM,
        })
    }

    /// Training mode uses batch statistics and queues a running-statistic
    /// update on `ctx`; evaluation mode reads the stored statistics.
    pub fn forward<T: Real>(&self, ctx: &mut Ctx<'_, '_, T>, x: Var) -> Result<Var> {
        let g = ctx.param(self.scale);
        let b = ctx.param(self.shift);
        if ctx.training() {
            let out = ctx.tape.batch_norm2d(x, g, b, self.eps, BatchNormMode::Train)?;
            if let Some((mean, var)) = out.batch_stats {
                ctx.record_stats(BatchStatUpdate {
                    mean_id: self.running_mean,
                    var_id: self.running_var,
                    mean,
                    var,
                    momentum: self.momentum,
                });
            }
            Ok(out.out)
        } else {
            let store = ctx.store();
            let mode = BatchNormMode::Eval {
                mean: store.get(self.running_mean).data(),
                var: store.get(self.running_var).data(),
            };
            Ok(ctx.tape.batch_norm2d(x, g, b, self.eps, mode)?.out)
        }
    }
}

/// `fc2(gelu(fc1(x)))` with hidden width `ratio · width`.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub fc1: Linear,
    pub fc2: Linear,
}

impl Mlp {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        width: usize,
        ratio: usize,
    ) -> Result<Self> {
        let hidden = width * ratio;
        Ok(Self {
            fc1: Linear::new(store, rng, &format!("{name}.fc1"), width, hidden, true)?,
            fc2: Linear::new(store, rng, &format!("{name}.fc2"), hidden, width, true)?,
        })
    }

    pub fn hidden(&self) -> usize {
        self.fc1.out_dim
    }

    pub fn forward<T: Real>(&self, ctx: &mut Ctx<'_, '_, T>, x: Var) -> Result<Var> {
        let h = self.fc1.forward(ctx, x)?;
        let h = ctx.tape.gelu(h)?;
        self.fc2.forward(ctx, h)
    }
}
