use crate::error::{shape_err, Result, TensorError};
use crate::real::Real;
use crate::tape::{Op, Tape, Var};
use crate::tensor::Tensor;

/// Static geometry of a 2-D cross-correlation over NCHW input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl ConvGeom {
    pub fn new(stride: usize, padding: usize, groups: usize) -> Self {
        Self { stride, padding, groups }
    }
}

/// Resolved extents of one convolution call.
struct Dims {
    batch: usize,
    in_ch: usize,
    h: usize,
    w: usize,
    out_ch: usize,
    in_per_group: usize,
    out_per_group: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
}

fn dims(x: &[usize], w: &[usize], geom: &ConvGeom) -> Result<Dims> {
    if x.len() != 4 || w.len() != 4 {
        return shape_err(format!("conv2d expects [B,C,H,W] and [O,C/g,kh,kw], got {x:?} and {w:?}"));
    }
    if geom.stride == 0 || geom.groups == 0 {
        return Err(TensorError::Argument("conv2d stride and groups must be positive".into()));
    }
    let (batch, in_ch, h, wd) = (x[0], x[1], x[2], x[3]);
    let (out_ch, in_per_group, kh, kw) = (w[0], w[1], w[2], w[3]);
    let g = geom.groups;
    if in_ch % g != 0 || out_ch % g != 0 || in_ch / g != in_per_group {
        return shape_err(format!(
            "conv2d channels: input {in_ch}, weight {w:?}, groups {g}"
        ));
    }
    let (ph, pw) = (h + 2 * geom.padding, wd + 2 * geom.padding);
    if ph < kh || pw < kw {
        return shape_err(format!("conv2d kernel {kh}x{kw} larger than padded input {ph}x{pw}"));
    }
    Ok(Dims {
        batch,
        in_ch,
        h,
        w: wd,
        out_ch,
        in_per_group,
        out_per_group: out_ch / g,
        kh,
        kw,
        oh: (ph - kh) / geom.stride + 1,
        ow: (pw - kw) / geom.stride + 1,
    })
}

/// Output positions `o` in `0..out` whose input tap `o*stride + k - pad`
/// lands inside `0..extent`.
fn valid_range(k: usize, pad: usize, stride: usize, extent: usize, out: usize) -> (usize, usize) {
    let lo = if pad > k { (pad - k).div_ceil(stride) } else { 0 };
    let hi = if extent + pad > k {
        ((extent + pad - 1 - k) / stride + 1).min(out)
    } else {
        0
    };
    (lo.min(hi), hi)
}

/// Visits every (output, input, weight) triple of the correlation in a
/// fixed order. `f(out_idx, in_idx, w_idx)`.
fn for_each_tap(d: &Dims, geom: &ConvGeom, mut f: impl FnMut(usize, usize, usize)) {
    let s = geom.stride;
    let p = geom.padding;
    for b in 0..d.batch {
        for oc in 0..d.out_ch {
            let group = oc / d.out_per_group;
            for icl in 0..d.in_per_group {
                let ic = group * d.in_per_group + icl;
                let in_base = (b * d.in_ch + ic) * d.h * d.w;
                let out_base = (b * d.out_ch + oc) * d.oh * d.ow;
                for ky in 0..d.kh {
                    let (y0, y1) = valid_range(ky, p, s, d.h, d.oh);
                    for kx in 0..d.kw {
                        let (x0, x1) = valid_range(kx, p, s, d.w, d.ow);
                        let w_idx = ((oc * d.in_per_group + icl) * d.kh + ky) * d.kw + kx;
                        for oy in y0..y1 {
                            let iy = oy * s + ky - p;
                            let orow = out_base + oy * d.ow;
                            let irow = in_base + iy * d.w;
                            for ox in x0..x1 {
                                f(orow + ox, irow + ox * s + kx - p, w_idx);
                            }
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv2d_forward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: Option<&Tensor<T>>,
    geom: &ConvGeom,
) -> Result<Tensor<T>> {
    let d = dims(x.shape(), w.shape(), geom)?;
    if let Some(b) = b {
        if b.shape() != [d.out_ch] {
            return shape_err(format!("conv2d bias {:?} for {} channels", b.shape(), d.out_ch));
        }
    }
    let mut out = vec![T::zero(); d.batch * d.out_ch * d.oh * d.ow];
    let (xd, wd) = (x.data(), w.data());
    for_each_tap(&d, geom, |o, i, k| out[o] += wd[k] * xd[i]);
    if let Some(b) = b {
        let plane = d.oh * d.ow;
        for (c, chunk) in out.chunks_exact_mut(plane).enumerate() {
            let bias = b.data()[c % d.out_ch];
            for v in chunk {
                *v += bias;
            }
        }
    }
    Ok(Tensor::from_parts(vec![d.batch, d.out_ch, d.oh, d.ow], out))
}

pub(crate) struct ConvGrads<T: Real> {
    pub x: Option<Tensor<T>>,
    pub w: Option<Tensor<T>>,
    pub b: Option<Tensor<T>>,
}

pub(crate) fn conv2d_backward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    g: &Tensor<T>,
    geom: &ConvGeom,
    need_x: bool,
    need_w: bool,
    need_b: bool,
) -> ConvGrads<T> {
    let d = dims(x.shape(), w.shape(), geom).expect("validated in forward");
    let (xd, wd, gd) = (x.data(), w.data(), g.data());
    let gx = need_x.then(|| {
        let mut gx = Tensor::zeros(x.shape());
        let dst = gx.data_mut();
        for_each_tap(&d, geom, |o, i, k| dst[i] += wd[k] * gd[o]);
        gx
    });
    let gw = need_w.then(|| {
        let mut gw = Tensor::zeros(w.shape());
        let dst = gw.data_mut();
        for_each_tap(&d, geom, |o, i, k| dst[k] += gd[o] * xd[i]);
        gw
    });
    let gb = need_b.then(|| {
        let plane = d.oh * d.ow;
        let mut acc = vec![T::zero(); d.out_ch];
        for (c, chunk) in gd.chunks_exact(plane).enumerate() {
            acc[c % d.out_ch] += chunk.iter().fold(T::zero(), |s, &v| s + v);
        }
        Tensor::from_parts(vec![d.out_ch], acc)
    });
    ConvGrads { x: gx, w: gw, b: gb }
}

impl<T: Real> Tape<T> {
    /// 2-D cross-correlation of NCHW `x` with `[out, in/groups, kh, kw]`
    /// weights.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, geom: ConvGeom) -> Result<Var> {
        self.check_var(x)?;
        self.check_var(w)?;
        if let Some(b) = b {
            self.check_var(b)?;
        }
        let value = conv2d_forward(self.value(x), self.value(w), b.map(|b| self.value(b)), &geom)?;
        self.push(value, Op::Conv2d { x, w, b, geom }, "conv2d")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting_taps_with_padding() {
        let x = Tensor::<f64>::ones(&[1, 1, 3, 3]);
        let w = Tensor::<f64>::ones(&[1, 1, 3, 3]);
        let y = conv2d_forward(&x, &w, None, &ConvGeom::new(1, 1, 1)).unwrap();
        assert_eq!(y.at(&[0, 0, 1, 1]).unwrap(), 9.0);
        assert_eq!(y.at(&[0, 0, 0, 0]).unwrap(), 4.0);
        assert_eq!(y.at(&[0, 0, 0, 1]).unwrap(), 6.0);
    }

    #[test]
    fn stride_two_shape() {
        let x = Tensor::<f64>::ones(&[1, 1, 8, 8]);
        let w = Tensor::<f64>::ones(&[1, 1, 3, 3]);
        let y = conv2d_forward(&x, &w, None, &ConvGeom::new(2, 1, 1)).unwrap();
        assert_eq!(y.shape(), &[1, 1, 4, 4]);
    }

    #[test]
    fn depthwise_delta_kernel_is_identity() {
        let x = Tensor::<f64>::from_fn(&[2, 3, 5, 4], |i| (i as f64).cos());
        let w = Tensor::<f64>::from_fn(&[3, 1, 5, 5], |i| if i % 25 == 12 { 1.0 } else { 0.0 });
        let y = conv2d_forward(&x, &w, None, &ConvGeom::new(1, 2, 3)).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn rejects_bad_groups() {
        let x = Tensor::<f64>::ones(&[1, 4, 4, 4]);
        let w = Tensor::<f64>::ones(&[3, 2, 3, 3]);
        assert!(conv2d_forward(&x, &w, None, &ConvGeom::new(1, 1, 2)).is_err());
    }
}
