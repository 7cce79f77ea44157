//! Bi-level routing attention: coarse region routing followed by token
//! attention over the routed regions, plus a depth-wise local-context term
//! on the value map.

use brau_tensor::{topk_indices, Real, Tape, Tensor, Var};
use rand::Rng;

use crate::error::{config_err, CoreError, Result};
use crate::nn::{Conv2d, Ctx, Linear, ParamStore};

/// Kernel size of the local-context convolution.
pub const LCE_KERNEL: usize = 5;

/// Number of routed regions per query region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopK {
    Count(usize),
    /// Route to every region.
    All,
}

impl TopK {
    /// Non-positive values select [`TopK::All`].
    pub fn from_signed(k: i64) -> Self {
        if k <= 0 {
            TopK::All
        } else {
            TopK::Count(k as usize)
        }
    }

    pub fn resolve(self, regions: usize) -> Result<usize> {
        match self {
            TopK::All => Ok(regions),
            TopK::Count(k) if (1..=regions).contains(&k) => Ok(k),
            TopK::Count(k) => config_err(format!("topk {k} outside 1..={regions}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BraConfig {
    /// Regions per side `S`.
    pub region_grid: usize,
    pub topk: TopK,
    pub heads: usize,
    pub channels: usize,
    pub lce_kernel: usize,
}

impl BraConfig {
    pub fn new(region_grid: usize, topk: TopK, heads: usize, channels: usize) -> Self {
        Self { region_grid, topk, heads, channels, lce_kernel: LCE_KERNEL }
    }

    pub fn regions(&self) -> usize {
        self.region_grid * self.region_grid
    }

    pub fn head_dim(&self) -> usize {
        self.channels / self.heads
    }

    /// Checks the configuration against an `h × w` feature map and returns
    /// the resolved `k`.
    pub fn validate(&self, h: usize, w: usize) -> Result<usize> {
        let s = self.region_grid;
        if s == 0 || !h.is_multiple_of(s) || !w.is_multiple_of(s) {
            return config_err(format!("feature map {h}x{w} not divisible by region grid {s}"));
        }
        if self.heads == 0 || !self.channels.is_multiple_of(self.heads) {
            return config_err(format!("{} heads do not divide {} channels", self.heads, self.channels));
        }
        self.topk.resolve(self.regions())
    }
}

/// Region adjacency and routed indices for a batch.
#[derive(Clone, Debug)]
pub struct RoutingResult<T: Real> {
    /// `[B, S², S²]`, `A[b,i,j] = ⟨Q^r_i, K^r_j⟩`.
    pub adjacency: Tensor<T>,
    /// `[B, S², k]` flattened; each row ascending.
    pub indices: Vec<usize>,
    pub k: usize,
}

impl<T: Real> RoutingResult<T> {
    pub fn regions(&self) -> usize {
        self.adjacency.shape()[1]
    }

    pub fn row(&self, b: usize, i: usize) -> &[usize] {
        let start = (b * self.regions() + i) * self.k;
        &self.indices[start..start + self.k]
    }
}

#[derive(Clone, Debug)]
pub struct BraParams {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub lce: Conv2d,
}

impl BraParams {
    pub fn new<T: Real>(store: &mut ParamStore<T>, rng: &mut impl Rng, name: &str, cfg: &BraConfig) -> Result<Self> {
        let c = cfg.channels;
        Ok(Self {
            wq: Linear::new(store, rng, &format!("{name}.wq"), c, c, true)?,
            wk: Linear::new(store, rng, &format!("{name}.wk"), c, c, true)?,
            wv: Linear::new(store, rng, &format!("{name}.wv"), c, c, true)?,
            wo: Linear::new(store, rng, &format!("{name}.wo"), c, c, true)?,
            lce: Conv2d::depthwise(store, rng, &format!("{name}.lce"), c, cfg.lce_kernel)?,
        })
    }
}

pub fn project_qkv<T: Real>(ctx: &mut Ctx<'_, '_, T>, x: Var, p: &BraParams) -> Result<(Var, Var, Var)> {
    let q = p.wq.forward(ctx, x)?;
    let k = p.wk.forward(ctx, x)?;
    let v = p.wv.forward(ctx, x)?;
    Ok((q, k, v))
}

fn spatial_dims<T: Real>(tape: &Tape<T>, t: Var) -> Result<[usize; 4]> {
    match *tape.shape(t) {
        [b, h, w, c] => Ok([b, h, w, c]),
        ref s => config_err(format!("expected [B,H,W,C], got {s:?}")),
    }
}

/// `[B,H,W,C] → [B, S², HW/S², C]`, regions and their tokens row-major.
pub fn partition_regions<T: Real>(tape: &mut Tape<T>, t: Var, s: usize) -> Result<Var> {
    let [b, h, w, c] = spatial_dims(tape, t)?;
    if s == 0 || h % s != 0 || w % s != 0 {
        return config_err(format!("feature map {h}x{w} not divisible by region grid {s}"));
    }
    let (rh, rw) = (h / s, w / s);
    let t = tape.reshape(t, &[b, s, rh, s, rw, c])?;
    let t = tape.permute(t, &[0, 1, 3, 2, 4, 5])?;
    Ok(tape.reshape(t, &[b, s * s, rh * rw, c])?)
}

/// Inverse of [`partition_regions`].
pub fn unpartition_regions<T: Real>(tape: &mut Tape<T>, t: Var, s: usize, h: usize, w: usize) -> Result<Var> {
    let shape = tape.shape(t).to_vec();
    if shape.len() != 4 || s == 0 || !h.is_multiple_of(s) || !w.is_multiple_of(s) || shape[1] != s * s || shape[2] * s * s != h * w {
        return config_err(format!("cannot restore {shape:?} to {h}x{w} with grid {s}"));
    }
    let (b, c) = (shape[0], shape[3]);
    let (rh, rw) = (h / s, w / s);
    let t = tape.reshape(t, &[b, s, s, rh, rw, c])?;
    let t = tape.permute(t, &[0, 1, 3, 2, 4, 5])?;
    Ok(tape.reshape(t, &[b, h, w, c])?)
}

/// Mean over each region's tokens: `[B, S², n, C] → [B, S², C]`.
pub fn region_pool<T: Real>(tape: &mut Tape<T>, regions: Var) -> Result<Var> {
    Ok(tape.mean_axis(regions, 2, false)?)
}

/// Region adjacency `A = Q^r K^rᵀ` and its per-row top-k indices. Routing
/// is a discrete selection and carries no gradient.
pub fn route_regions<T: Real>(qr: &Tensor<T>, kr: &Tensor<T>, topk: TopK) -> Result<RoutingResult<T>> {
    let (b, n, c) = match *qr.shape() {
        [b, n, c] => (b, n, c),
        ref s => return config_err(format!("pooled queries must be [B,S²,C], got {s:?}")),
    };
    if kr.shape() != qr.shape() {
        return config_err(format!("pooled keys {:?} vs queries {:?}", kr.shape(), qr.shape()));
    }
    let k = topk.resolve(n)?;
    let (q, kd) = (qr.data(), kr.data());
    let mut adj = vec![T::zero(); b * n * n];
    let mut indices = Vec::with_capacity(b * n * k);
    for bi in 0..b {
        for i in 0..n {
            let qrow = &q[(bi * n + i) * c..][..c];
            let arow = &mut adj[(bi * n + i) * n..][..n];
            for (j, a) in arow.iter_mut().enumerate() {
                let krow = &kd[(bi * n + j) * c..][..c];
                *a = qrow.iter().zip(krow).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
            }
            indices.extend(topk_indices(arow, k)?);
        }
    }
    Ok(RoutingResult { adjacency: Tensor::new(vec![b, n, n], adj)?, indices, k })
}

/// Stacks, for every query region, the tokens of its routed regions in
/// index order: `[B, S², n, C] → [B, S², k·n, C]`.
pub fn gather_kv<T: Real>(tape: &mut Tape<T>, regions: Var, routing: &RoutingResult<T>) -> Result<Var> {
    let shape = tape.shape(regions).to_vec();
    let [b, r, n, c] = shape[..] else {
        return config_err(format!("gather expects [B,S²,n,C], got {shape:?}"));
    };
    if routing.regions() != r || routing.indices.len() != b * r * routing.k {
        return config_err(format!(
            "routing for {} regions x {} does not match {shape:?}",
            routing.regions(),
            routing.k
        ));
    }
    let flat = tape.reshape(regions, &[b * r, n * c])?;
    let rows: Vec<usize> = routing
        .indices
        .iter()
        .enumerate()
        .map(|(i, &j)| (i / (r * routing.k)) * r + j)
        .collect();
    let g = tape.index_select(flat, 0, &rows)?;
    Ok(tape.reshape(g, &[b, r, routing.k * n, c])?)
}

/// Per-head scaled softmax attention of partitioned queries over gathered
/// keys/values, restored to `[B,H,W,C]`, plus the local-context term
/// computed on the spatial value map.
#[allow(clippy::too_many_arguments)]
pub fn token_attention<T: Real>(
    ctx: &mut Ctx<'_, '_, T>,
    q: Var,
    kg: Var,
    vg: Var,
    v: Var,
    heads: usize,
    grid: usize,
    lce: &Conv2d,
) -> Result<Var> {
    let [b, h, w, c] = spatial_dims(ctx.tape, v)?;
    if heads == 0 || c % heads != 0 {
        return config_err(format!("{heads} heads do not divide {c} channels"));
    }
    let d = c / heads;
    let qs = ctx.tape.shape(q).to_vec();
    let gs = ctx.tape.shape(kg).to_vec();
    if qs.len() != 4 || gs.len() != 4 || qs[..2] != gs[..2] || ctx.tape.shape(vg) != gs || qs[3] != c || gs[3] != c {
        return config_err(format!("misaligned attention inputs q {qs:?}, k/v {gs:?}"));
    }
    let (r, n, m) = (qs[1], qs[2], gs[2]);
    let tape = &mut *ctx.tape;
    let q = tape.reshape(q, &[b, r, n, heads, d])?;
    let q = tape.permute(q, &[0, 1, 3, 2, 4])?;
    let kt = tape.reshape(kg, &[b, r, m, heads, d])?;
    let kt = tape.permute(kt, &[0, 1, 3, 4, 2])?;
    let vv = tape.reshape(vg, &[b, r, m, heads, d])?;
    let vv = tape.permute(vv, &[0, 1, 3, 2, 4])?;
    let scores = tape.matmul(q, kt)?;
    let scores = tape.scale(scores, 1.0 / (d as f64).sqrt())?;
    let attn = tape.softmax(scores, 4)?;
    let o = tape.matmul(attn, vv)?;
    let o = tape.permute(o, &[0, 1, 3, 2, 4])?;
    let o = tape.reshape(o, &[b, r, n, c])?;
    let o = unpartition_regions(tape, o, grid, h, w)?;
    let local = lce.forward_channel_last(ctx, v)?;
    Ok(ctx.tape.add(o, local)?)
}

/// Full attention layer on `[B,H,W,C]`; also returns the routing used.
pub fn bra_forward_traced<T: Real>(
    ctx: &mut Ctx<'_, '_, T>,
    x: Var,
    p: &BraParams,
    cfg: &BraConfig,
) -> Result<(Var, RoutingResult<T>)> {
    let [_, h, w, c] = spatial_dims(ctx.tape, x)?;
    if c != cfg.channels {
        return Err(CoreError::Config(format!("attention width {} given {c} channels", cfg.channels)));
    }
    cfg.validate(h, w)?;
    let s = cfg.region_grid;
    let (q, k, v) = project_qkv(ctx, x, p)?;
    let tape = &mut *ctx.tape;
    let qp = partition_regions(tape, q, s)?;
    let kp = partition_regions(tape, k, s)?;
    let vp = partition_regions(tape, v, s)?;
    let qr = region_pool(tape, qp)?;
    let kr = region_pool(tape, kp)?;
    let routing = route_regions(tape.value(qr), tape.value(kr), cfg.topk)?;
    let kg = gather_kv(tape, kp, &routing)?;
    let vg = gather_kv(tape, vp, &routing)?;
    let o = token_attention(ctx, qp, kg, vg, v, cfg.heads, s, &p.lce)?;
    Ok((p.wo.forward(ctx, o)?, routing))
}

pub fn bra_forward<T: Real>(ctx: &mut Ctx<'_, '_, T>, x: Var, p: &BraParams, cfg: &BraConfig) -> Result<Var> {
    Ok(bra_forward_traced(ctx, x, p, cfg)?.0)
}
