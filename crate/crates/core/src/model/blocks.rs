use brau_tensor::{ConvGeom, Real, Var};
use rand::Rng;

use crate::attention::{bra_forward, BraConfig, BraParams};
use crate::error::{config_err, Result};
use crate::nn::{BatchNorm2d, Conv2d, Ctx, LayerNorm, Linear, Mlp, ParamStore};

fn dims4<T: Real>(ctx: &Ctx<'_, '_, T>, x: Var) -> Result<[usize; 4]> {
    match *ctx.tape.shape(x) {
        [b, h, w, c] => Ok([b, h, w, c]),
        ref s => config_err(format!("expected [B,H,W,C], got {s:?}")),
    }
}

/// Residual unit: depth-wise 3×3 conv, then attention and MLP, each behind
/// a layer norm.
#[derive(Clone, Debug)]
pub struct BiformerBlock {
    pub dw: Conv2d,
    pub ln1: LayerNorm,
    pub attn: BraParams,
    pub ln2: LayerNorm,
    pub mlp: Mlp,
    pub cfg: BraConfig,
}

impl BiformerBlock {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        cfg: BraConfig,
        mlp_ratio: usize,
    ) -> Result<Self> {
        let c = cfg.channels;
        Ok(Self {
            dw: Conv2d::depthwise(store, rng, &format!("{name}.dw"), c, 3)?,
            ln1: LayerNorm::new(store, &format!("{name}.ln1"), c)?,
            attn: BraParams::new(store, rng, &format!("{name}.attn"), &cfg)?,
            ln2: LayerNorm::new(store, &format!("{name}.ln2"), c)?,
            mlp: Mlp::new(store, rng, &format!("{name}.mlp"), c, mlp_ratio)?,
            cfg,
        })
    }

    pub fn forward<T: Real>(&self, ctx: &mut Ctx<'_, '_, T>, z: Var) -> Result<Var> {
        let [_, _, _, c] = dims4(ctx, z)?;
        if c != self.cfg.channels {
            return config_err(format!("block width {} given {c} channels", self.cfg.channels));
        }
        let local = self.dw.forward_channel_last(ctx, z)?;
        let z = ctx.tape.add(z, local)?;
        let n = self.ln1.forward(ctx, z)?;
        let a = bra_forward(ctx, n, &self.attn, &self.cfg)?;
        let z = ctx.tape.add(z, a)?;
        let n = self.ln2.forward(ctx, z)?;
        let m = self.mlp.forward(ctx, n)?;
        Ok(ctx.tape.add(z, m)?)
    }
}

/// Two stride-2 3×3 convolutions: `conv → GELU → BN → conv → BN`, output
/// channel-last at a quarter of the input resolution.
#[derive(Clone, Debug)]
pub struct PatchEmbed {
    pub conv1: Conv2d,
    pub bn1: BatchNorm2d,
    pub conv2: Conv2d,
    pub bn2: BatchNorm2d,
}

impl PatchEmbed {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        in_ch: usize,
        width: usize,
    ) -> Result<Self> {
        let mid = width / 2;
        let geom = ConvGeom::new(2, 1, 1);
        Ok(Self {
            conv1: Conv2d::new(store, rng, &format!("{name}.conv1"), in_ch, mid, 3, geom, true)?,
            bn1: BatchNorm2d::new(store, &format!("{name}.bn1"), mid)?,
            conv2: Conv2d::new(store, rng, &format!("{name}.conv2"), mid, width, 3, geom, true)?,
            bn2: BatchNorm2d::new(store, &format!("{name}.bn2"), width)?,
        })
    }

    pub fn forward<T: Real>(&self, ctx: &mut Ctx<'_, '_, T>, img: Var) -> Result<Var> {
        let shape = ctx.tape.shape(img);
        if shape.len() != 4 || !shape[2].is_multiple_of(4) || !shape[3].is_multiple_of(4) {
            return config_err(format!("patch embedding needs [B,C,H,W] with H, W divisible by 4, got {shape:?}"));
        }
        let x = self.conv1.forward(ctx, img)?;
        let x = ctx.tape.gelu(x)?;
        let x = self.bn1.forward(ctx, x)?;
        let x = self.conv2.forward(ctx, x)?;
        let x = self.bn2.forward(ctx, x)?;
        Ok(ctx.tape.permute(x, &[0, 2, 3, 1])?)
    }
}

/// Splits each token's channel vector into an `f × f` tile of
/// `c / f²`-channel tokens: `[B,h,w,c] → [B,f·h,f·w,c/f²]`.
fn tokens_to_tiles<T: Real>(ctx: &mut Ctx<'_, '_, T>, x: Var, f: usize) -> Result<Var> {
    let [b, h, w, c] = dims4(ctx, x)?;
    let out = c / (f * f);
    let t = ctx.tape.reshape(x, &[b, h, w, f, f, out])?;
    let t = ctx.tape.permute(t, &[0, 1, 3, 2, 4, 5])?;
    Ok(ctx.tape.reshape(t, &[b, h * f, w * f, out])?)
}

/// 2×2 neighbourhood concatenation, layer norm, then `4c → 2c`.
#[derive(Clone, Debug)]
pub struct PatchMerge {
    pub norm: LayerNorm,
    pub reduce: Linear,
}

impl PatchMerge {
    pub fn new<T: Real>(store: &mut ParamStore<T>, rng: &mut impl Rng, name: &str, c: usize) -> Result<Self> {
        Ok(Self {
            norm: LayerNorm::new(store, &format!("{name}.norm"), 4 * c)?,
            reduce: Linear::new(store, rng, &format!("{name}.reduction"), 4 * c, 2 * c, false)?,
        })
    }

    pub fn forward<T: Real>(&self, ctx: &mut Ctx<'_, '_, T>, x: Var) -> Result<Var> {
        let [b, h, w, c] = dims4(ctx, x)?;
        if h % 2 != 0 || w % 2 != 0 {
            return config_err(format!("patch merging needs even extents, got {h}x{w}"));
        }
        let t = ctx.tape.reshape(x, &[b, h / 2, 2, w / 2, 2, c])?;
        let t = ctx.tape.permute(t, &[0, 1, 3, 2, 4, 5])?;
        let t = ctx.tape.reshape(t, &[b, h / 2, w / 2, 4 * c])?;
        let t = self.norm.forward(ctx, t)?;
        self.reduce.forward(ctx, t)
    }
}

/// `c → 2c`, rearranged into 2×2 tiles of `c/2` channels, then layer norm.
#[derive(Clone, Debug)]
pub struct PatchExpand {
    pub expand: Linear,
    pub norm: LayerNorm,
}

impl PatchExpand {
    pub fn new<T: Real>(store: &mut ParamStore<T>, rng: &mut impl Rng, name: &str, c: usize) -> Result<Self> {
        if !c.is_multiple_of(2) {
            return config_err(format!("patch expanding needs even channels, got {c}"));
        }
        Ok(Self {
            expand: Linear::new(store, rng, &format!("{name}.expand"), c, 2 * c, false)?,
            norm: LayerNorm::new(store, &format!("{name}.norm"), c / 2)?,
        })
    }

    pub fn forward<T: Real>(&self, ctx: &mut Ctx<'_, '_, T>, x: Var) -> Result<Var> {
        let t = self.expand.forward(ctx, x)?;
        let t = tokens_to_tiles(ctx, t, 2)?;
        self.norm.forward(ctx, t)
    }
}

/// `C → 16C`, rearranged into 4×4 tiles of `C` channels, then layer norm.
#[derive(Clone, Debug)]
pub struct FinalExpand {
    pub expand: Linear,
    pub norm: LayerNorm,
}

impl FinalExpand {
    pub fn new<T: Real>(store: &mut ParamStore<T>, rng: &mut impl Rng, name: &str, c: usize) -> Result<Self> {
        Ok(Self {
            expand: Linear::new(store, rng, &format!("{name}.expand"), c, 16 * c, false)?,
            norm: LayerNorm::new(store, &format!("{name}.norm"), c)?,
        })
    }

    pub fn forward<T: Real>(&self, ctx: &mut Ctx<'_, '_, T>, x: Var) -> Result<Var> {
        let t = self.expand.forward(ctx, x)?;
        let t = tokens_to_tiles(ctx, t, 4)?;
        self.norm.forward(ctx, t)
    }
}

/// Channel concatenation of decoder and encoder features, then `2c → c`.
#[derive(Clone, Debug)]
pub struct SkipFuse {
    pub proj: Linear,
}

impl SkipFuse {
    pub fn new<T: Real>(store: &mut ParamStore<T>, rng: &mut impl Rng, name: &str, c: usize) -> Result<Self> {
        Ok(Self {
            proj: Linear::new(store, rng, &format!("{name}.proj"), 2 * c, c, true)?,
        })
    }

    pub fn forward<T: Real>(&self, ctx: &mut Ctx<'_, '_, T>, decoder: Var, encoder: Var) -> Result<Var> {
        let (d, e) = (ctx.tape.shape(decoder), ctx.tape.shape(encoder));
        if d != e || d.len() != 4 {
            return config_err(format!("skip fusion of {d:?} with {e:?}"));
        }
        let t = ctx.tape.concat(&[decoder, encoder], 3)?;
        self.proj.forward(ctx, t)
    }
}
