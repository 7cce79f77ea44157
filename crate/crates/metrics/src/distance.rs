//! Boundary distances via an exact Euclidean distance transform.

use crate::error::{MetricsError, Result};
use crate::mask::{SegMask, Structure};

/// Foreground pixels with a 4-neighbour outside the region or the image.
pub fn boundary(region: &[bool], width: usize, height: usize) -> Vec<(usize, usize)> {
    let inside = |x: isize, y: isize| {
        x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height && region[y as usize * width + x as usize]
    };
    let mut out = Vec::new();
    for y in 0..height {
        for x in 0..width {
            if !region[y * width + x] {
                continue;
            }
            let (xi, yi) = (x as isize, y as isize);
            if !(inside(xi - 1, yi) && inside(xi + 1, yi) && inside(xi, yi - 1) && inside(xi, yi + 1)) {
                out.push((x, y));
            }
        }
    }
    out
}

const FAR: f64 = 1e15;

/// Lower envelope of the parabolas `(q - p)² + f(p)` over one line.
fn edt_1d(f: &[f64], v: &mut [usize], z: &mut [f64], out: &mut [f64]) {
    let n = f.len();
    let meet = |q: usize, p: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64)
    };
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s = meet(q, v[k]);
        // z[0] is -inf, so this stops at k = 0.
        while s <= z[k] {
            k -= 1;
            s = meet(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared Euclidean distance (in pixels²) from every pixel to the nearest
/// seed pixel.
pub fn squared_distance_map(seeds: &[(usize, usize)], width: usize, height: usize) -> Vec<f64> {
    let mut grid = vec![FAR; width * height];
    for &(x, y) in seeds {
        grid[y * width + x] = 0.0;
    }
    let n = width.max(height);
    let mut f = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    let mut out = vec![0.0; n];
    for x in 0..width {
        for y in 0..height {
            f[y] = grid[y * width + x];
        }
        edt_1d(&f[..height], &mut v, &mut z, &mut out[..height]);
        for y in 0..height {
            grid[y * width + x] = out[y];
        }
    }
    for y in 0..height {
        f[..width].copy_from_slice(&grid[y * width..(y + 1) * width]);
        edt_1d(&f[..width], &mut v, &mut z, &mut out[..width]);
        grid[y * width..(y + 1) * width].copy_from_slice(&out[..width]);
    }
    grid
}

/// Nearest-boundary distances in both directions, in pixels.
struct SurfaceDistances {
    pred_to_gt: Vec<f64>,
    gt_to_pred: Vec<f64>,
}

fn surface_distances(pred: &SegMask, gt: &SegMask, s: Structure) -> Result<SurfaceDistances> {
    pred.check_same_shape(gt)?;
    let (w, h) = (pred.width(), pred.height());
    let bp = boundary(&pred.region(s), w, h);
    let bg = boundary(&gt.region(s), w, h);
    if bp.is_empty() || bg.is_empty() {
        return Err(MetricsError::EmptyRegion { structure: s });
    }
    let lookup = |from: &[(usize, usize)], to: &[(usize, usize)]| {
        let map = squared_distance_map(to, w, h);
        from.iter().map(|&(x, y)| map[y * w + x].sqrt()).collect::<Vec<_>>()
    };
    Ok(SurfaceDistances { pred_to_gt: lookup(&bp, &bg), gt_to_pred: lookup(&bg, &bp) })
}

/// Symmetric (100th percentile) Hausdorff distance between the region
/// boundaries, in pixel-spacing units.
pub fn hausdorff(pred: &SegMask, gt: &SegMask, s: Structure) -> Result<f64> {
    let d = surface_distances(pred, gt, s)?;
    let max = d.pred_to_gt.iter().chain(&d.gt_to_pred).fold(0.0f64, |a, &b| a.max(b));
    Ok(max * pred.pixel_spacing())
}

/// Average symmetric surface distance: every boundary point of both masks
/// contributes its nearest distance to the other boundary, pooled into one
/// mean.
pub fn asd(pred: &SegMask, gt: &SegMask, s: Structure) -> Result<f64> {
    let d = surface_distances(pred, gt, s)?;
    let total: f64 = d.pred_to_gt.iter().chain(&d.gt_to_pred).sum();
    let count = d.pred_to_gt.len() + d.gt_to_pred.len();
    Ok(total / count as f64 * pred.pixel_spacing())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(size: usize, x0: usize, y0: usize, side: usize) -> SegMask {
        SegMask::from_fn(size, size, |x, y| {
            (x >= x0 && x < x0 + side && y >= y0 && y < y0 + side) as u8
        })
        .unwrap()
    }

    #[test]
    fn boundary_of_filled_square_is_its_ring() {
        let m = square(6, 1, 1, 4);
        assert_eq!(boundary(&m.region(Structure::Ps), 6, 6).len(), 12);
        // Touching the image edge counts as boundary.
        let full = SegMask::new(3, 3, vec![1; 9]).unwrap();
        assert_eq!(boundary(&full.region(Structure::Ps), 3, 3).len(), 8);
    }

    #[test]
    fn distance_map_matches_brute_force() {
        let seeds = [(0, 0), (7, 3), (4, 9), (9, 9)];
        let map = squared_distance_map(&seeds, 10, 12);
        for y in 0..12 {
            for x in 0..10 {
                let want = seeds
                    .iter()
                    .map(|&(sx, sy)| {
                        let (dx, dy) = (x as f64 - sx as f64, y as f64 - sy as f64);
                        dx * dx + dy * dy
                    })
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(map[y * 10 + x], want, "at ({x}, {y})");
            }
        }
    }

    #[test]
    fn single_pixels_three_four_five() {
        let a = SegMask::from_fn(10, 10, |x, y| (x == 1 && y == 1) as u8).unwrap();
        let b = SegMask::from_fn(10, 10, |x, y| (x == 4 && y == 5) as u8).unwrap();
        assert_eq!(hausdorff(&a, &b, Structure::Ps).unwrap(), 5.0);
        assert_eq!(asd(&a, &b, Structure::Ps).unwrap(), 5.0);
    }

    #[test]
    fn identical_and_shifted_squares() {
        let a = square(16, 3, 3, 6);
        assert_eq!(hausdorff(&a, &a, Structure::Ps).unwrap(), 0.0);
        assert_eq!(asd(&a, &a, Structure::All).unwrap(), 0.0);
        let b = square(16, 5, 3, 6);
        assert_eq!(hausdorff(&a, &b, Structure::Ps).unwrap(), 2.0);
    }

    #[test]
    fn spacing_scales_distances() {
        let a = SegMask::from_fn(8, 8, |x, y| (x == 0 && y == 0) as u8).unwrap();
        let b = SegMask::with_spacing(8, 8, {
            let mut l = vec![0; 64];
            l[3 * 8 + 4] = 1;
            l
        }, 0.5)
        .unwrap();
        let a = SegMask::with_spacing(8, 8, a.labels().to_vec(), 0.5).unwrap();
        assert_eq!(hausdorff(&a, &b, Structure::Ps).unwrap(), 2.5);
    }

    #[test]
    fn empty_region_is_reported() {
        let a = square(8, 1, 1, 3);
        let empty = SegMask::new(8, 8, vec![0; 64]).unwrap();
        assert!(matches!(
            hausdorff(&a, &empty, Structure::Ps),
            Err(MetricsError::EmptyRegion { structure: Structure::Ps })
        ));
        assert!(asd(&empty, &a, Structure::Fh).is_err());
    }
}
