use std::fmt;
use std::path::Path;

use image::{GrayImage, ImageReader, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{MetricsError, Result};

pub const BACKGROUND: u8 = 0;
pub const PS_LABEL: u8 = 1;
pub const FH_LABEL: u8 = 2;

/// Region a metric is computed over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Structure {
    /// Pubic symphysis, label 1.
    Ps,
    /// Fetal head, label 2.
    Fh,
    /// Union of both foreground labels.
    All,
}

impl Structure {
    pub const EACH: [Structure; 3] = [Structure::Fh, Structure::Ps, Structure::All];

    pub fn contains(self, label: u8) -> bool {
        match self {
            Structure::Ps => label == PS_LABEL,
            Structure::Fh => label == FH_LABEL,
            Structure::All => label == PS_LABEL || label == FH_LABEL,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Structure::Ps => "ps",
            Structure::Fh => "fh",
            Structure::All => "all",
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Structure::Ps => "PS",
            Structure::Fh => "FH",
            Structure::All => "ALL",
        })
    }
}

/// 2-D label map over {0 background, 1 PS, 2 FH}, row-major, with the
/// physical size of one pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct SegMask {
    width: usize,
    height: usize,
    labels: Vec<u8>,
    pixel_spacing: f64,
}

impl SegMask {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        Self::with_spacing(width, height, labels, 1.0)
    }

    pub fn with_spacing(width: usize, height: usize, labels: Vec<u8>, pixel_spacing: f64) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return Err(MetricsError::Shape(format!(
                "{} labels for a {width}x{height} mask",
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > FH_LABEL) {
            return Err(MetricsError::Label(format!("label {bad} outside {{0, 1, 2}}")));
        }
        if !(pixel_spacing.is_finite() && pixel_spacing > 0.0) {
            return Err(MetricsError::Argument(format!("pixel spacing {pixel_spacing}")));
        }
        Ok(Self { width, height, labels, pixel_spacing })
    }

    /// Builds a mask by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        Self::new(width, height, labels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn pixel_spacing(&self) -> f64 {
        self.pixel_spacing
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn region(&self, s: Structure) -> Vec<bool> {
        self.labels.iter().map(|&l| s.contains(l)).collect()
    }

    pub fn count(&self, s: Structure) -> usize {
        self.labels.iter().filter(|&&l| s.contains(l)).count()
    }

    pub(crate) fn check_same_shape(&self, other: &SegMask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(MetricsError::Shape(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    /// Quarter turn counter-clockwise: pixel (x, y) moves to (y, W-1-x).
    pub fn rotate90(&self) -> SegMask {
        let (w, h) = (self.width, self.height);
        let mut labels = vec![0; w * h];
        for y in 0..h {
            for x in 0..w {
                let (nx, ny) = (y, w - 1 - x);
                labels[ny * h + nx] = self.get(x, y);
            }
        }
        SegMask { width: h, height: w, labels, pixel_spacing: self.pixel_spacing }
    }

    /// Reads an 8-bit single-channel PNG whose values are the labels.
    pub fn read_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = ImageReader::open(path)?.with_guessed_format()?.decode()?;
        let gray = match img {
            image::DynamicImage::ImageLuma8(g) => g,
            other => {
                return Err(MetricsError::Label(format!(
                    "{} is {:?}, expected 8-bit single channel",
                    path.display(),
                    other.color()
                )))
            }
        };
        let (w, h) = gray.dimensions();
        Self::new(w as usize, h as usize, gray.into_raw())
            .map_err(|e| MetricsError::Label(format!("{}: {e}", path.display())))
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let img = GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            Luma([self.get(x as usize, y as usize)])
        });
        img.save(path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_labels_and_spacing() {
        assert!(SegMask::new(2, 1, vec![0, 3]).is_err());
        assert!(SegMask::with_spacing(1, 1, vec![1], 0.0).is_err());
        assert!(SegMask::new(2, 2, vec![0; 3]).is_err());
    }

    #[test]
    fn four_rotations_restore_the_mask() {
        let m = SegMask::from_fn(5, 3, |x, y| ((x + 2 * y) % 3) as u8).unwrap();
        let r = m.rotate90();
        assert_eq!((r.width(), r.height()), (3, 5));
        assert_eq!(r.rotate90().rotate90().rotate90(), m);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let m = SegMask::from_fn(7, 4, |x, y| ((x * y) % 3) as u8).unwrap();
        m.write_png(&path).unwrap();
        assert_eq!(SegMask::read_png(&path).unwrap(), m);
    }
}
