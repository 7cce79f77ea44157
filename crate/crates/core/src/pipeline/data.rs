use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use brau_metrics::SegMask;
use brau_tensor::Tensor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{config_err, io_err, CoreError, Result};

/// Matched `(image, mask)` file pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pair {
    pub name: String,
    pub image: PathBuf,
    pub mask: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
}

impl std::str::FromStr for Split {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            other => config_err(format!("unknown split {other:?} (expected train or val)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetIndex {
    pub train: Vec<Pair>,
    pub val: Vec<Pair>,
}

impl DatasetIndex {
    pub fn split(&self, split: Split) -> &[Pair] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
        }
    }
}

fn png_stems(dir: &Path) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string());
            }
        }
    }
    Ok(out)
}

/// Pairs `root/images/*.png` with `root/masks/*.png` by basename, shuffles
/// the sorted list with `seed` and assigns the first `round(ratio · n)`
/// pairs to training.
pub fn build_index(root: impl AsRef<Path>, split_ratio: f64, seed: u64) -> Result<DatasetIndex> {
    let root = root.as_ref();
    if !(0.0..=1.0).contains(&split_ratio) {
        return config_err(format!("split ratio {split_ratio} outside [0, 1]"));
    }
    let (img_dir, mask_dir) = (root.join("images"), root.join("masks"));
    let images = png_stems(&img_dir)?;
    let masks = png_stems(&mask_dir)?;
    let orphans: Vec<String> = images
        .symmetric_difference(&masks)
        .map(|n| {
            let side = if images.contains(n) { "mask" } else { "image" };
            format!("{n} (no {side})")
        })
        .collect();
    if !orphans.is_empty() {
        return Err(CoreError::Data(format!("unmatched files: {}", orphans.join(", "))));
    }
    let mut pairs: Vec<Pair> = images
        .into_iter()
        .map(|name| Pair {
            image: img_dir.join(format!("{name}.png")),
            mask: mask_dir.join(format!("{name}.png")),
            name,
        })
        .collect();
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (split_ratio * pairs.len() as f64).round() as usize;
    let val = pairs.split_off(n_train);
    Ok(DatasetIndex { train: pairs, val })
}

/// One image `[C,H,W]` with intensities in `[0,1]` and its label mask.
#[derive(Clone, Debug)]
pub struct Sample {
    pub name: String,
    pub image: Tensor<f32>,
    pub mask: SegMask,
}

/// Reads an 8-bit PNG as `[channels, H, W]` in `[0,1]`; one channel means
/// luminance, three means RGB.
pub fn read_image(path: impl AsRef<Path>, channels: usize) -> Result<Tensor<f32>> {
    let img = image::open(path.as_ref())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw: Vec<u8> = match channels {
        1 => img.to_luma8().into_raw(),
        3 => img.to_rgb8().into_raw(),
        c => return config_err(format!("{c}-channel images are not supported")),
    };
    let plane = w * h;
    Ok(Tensor::from_fn(&[channels, h, w], |i| {
        let (c, p) = (i / plane, i % plane);
        raw[p * channels + c] as f32 / 255.0
    }))
}

/// Writes a `[1,H,W]` or `[3,H,W]` tensor in `[0,1]` as an 8-bit PNG.
pub fn write_image(path: impl AsRef<Path>, image: &Tensor<f32>) -> Result<()> {
    let &[c, h, w] = image.shape() else {
        return config_err(format!("image tensor must be [C,H,W], got {:?}", image.shape()));
    };
    let plane = h * w;
    let px = |i: usize| (image.data()[i].clamp(0.0, 1.0) * 255.0).round() as u8;
    let (w32, h32) = (w as u32, h as u32);
    match c {
        1 => {
            let buf = image::GrayImage::from_fn(w32, h32, |x, y| image::Luma([px(y as usize * w + x as usize)]));
            buf.save(path.as_ref())?;
        }
        3 => {
            let buf = image::RgbImage::from_fn(w32, h32, |x, y| {
                let p = y as usize * w + x as usize;
                image::Rgb([px(p), px(plane + p), px(2 * plane + p)])
            });
            buf.save(path.as_ref())?;
        }
        _ => return config_err(format!("{c}-channel images are not supported")),
    }
    Ok(())
}

pub fn load_sample(pair: &Pair, channels: usize) -> Result<Sample> {
    let image = read_image(&pair.image, channels)?;
    let mask = SegMask::read_png(&pair.mask)?;
    if image.shape()[1] != mask.height() || image.shape()[2] != mask.width() {
        return Err(CoreError::Data(format!(
            "{}: image {}x{} but mask {}x{}",
            pair.name,
            image.shape()[2],
            image.shape()[1],
            mask.width(),
            mask.height()
        )));
    }
    Ok(Sample { name: pair.name.clone(), image, mask })
}

pub fn load_samples(pairs: &[Pair], channels: usize) -> Result<Vec<Sample>> {
    pairs.iter().map(|p| load_sample(p, channels)).collect()
}

/// Shifts and scales an image to zero mean and unit variance over all its
/// values; a constant image only loses its mean.
pub fn normalize_image(image: &Tensor<f32>) -> Tensor<f32> {
    let n = image.numel() as f64;
    let mean = image.data().iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = image.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    let scale = if var > 1e-12 { 1.0 / var.sqrt() } else { 1.0 };
    image.map(|v| ((v as f64 - mean) * scale) as f32)
}

/// Stacks normalized images into `[B, C, H, W]`.
pub fn stack_images(images: &[&Tensor<f32>]) -> Result<Tensor<f32>> {
    let Some(first) = images.first() else {
        return config_err("empty image batch");
    };
    let shape = first.shape().to_vec();
    let mut data = Vec::with_capacity(images.len() * first.numel());
    for img in images {
        if img.shape() != shape.as_slice() {
            return config_err(format!("image {:?} in a batch of {shape:?}", img.shape()));
        }
        data.extend_from_slice(normalize_image(img).data());
    }
    let mut full = vec![images.len()];
    full.extend(shape);
    Ok(Tensor::new(full, data)?)
}
