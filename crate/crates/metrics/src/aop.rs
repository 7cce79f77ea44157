//! Angle of progression from a segmentation mask.
//!
//! The symphysis long axis is the principal direction of the PS pixel
//! centres; its endpoints are the extreme projections onto that axis. The
//! angle is taken at the endpoint nearer the fetal-head centroid, between
//! the ray toward the other endpoint and the tangent from the vertex to the
//! convex hull of the FH pixel centres on the far side (the head lies
//! between the axis ray and the tangent ray).

use serde::{Deserialize, Serialize};

use crate::error::{MetricsError, Result};
use crate::mask::{SegMask, Structure};

pub type Point = (f64, f64);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AopGeometry {
    /// `[vertex, far end]` of the symphysis axis, as (x, y) pixel coordinates.
    pub ps_axis: [Point; 2],
    /// Hull vertex of the fetal head touched by the tangent ray.
    pub fh_tangent: Point,
    /// Angle in degrees, in (0, 180).
    pub aop: f64,
}

fn pixels(mask: &SegMask, s: Structure) -> Vec<Point> {
    let mut out = Vec::new();
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if s.contains(mask.get(x, y)) {
                out.push((x as f64, y as f64));
            }
        }
    }
    out
}

fn centroid(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    (sx / n, sy / n)
}

/// Unit eigenvector of the largest eigenvalue of the points' covariance.
fn principal_axis(points: &[Point], c: Point) -> Result<Point> {
    let n = points.len() as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (dx, dy) = (x - c.0, y - c.1);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let (sxx, sxy, syy) = (sxx / n, sxy / n, syy / n);
    let half_diff = 0.5 * (sxx - syy);
    let root = (half_diff * half_diff + sxy * sxy).sqrt();
    let lambda = 0.5 * (sxx + syy) + root;
    if lambda <= 1e-12 {
        return Err(MetricsError::Geometry("PS region has no spatial extent".into()));
    }
    // (A - λI)v = 0; take the larger of the two null-space candidates.
    let v = if sxx >= syy {
        (lambda - syy, sxy)
    } else {
        (sxy, lambda - sxx)
    };
    let norm = (v.0 * v.0 + v.1 * v.1).sqrt();
    if norm < 1e-12 {
        // Isotropic spread: every direction is principal.
        return Ok((1.0, 0.0));
    }
    Ok((v.0 / norm, v.1 / norm))
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain; counter-clockwise in a y-up frame, collinear
/// points dropped.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn strictly_inside(hull: &[Point], p: Point) -> bool {
    if hull.len() < 3 {
        return false;
    }
    (0..hull.len()).all(|i| cross(hull[i], hull[(i + 1) % hull.len()], p) > 0.0)
}

fn signed_angle(from: Point, to: Point) -> f64 {
    let cr = from.0 * to.1 - from.1 * to.0;
    let dot = from.0 * to.0 + from.1 * to.1;
    cr.atan2(dot)
}

fn wrap(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut a = a % tau;
    if a > std::f64::consts::PI {
        a -= tau;
    } else if a <= -std::f64::consts::PI {
        a += tau;
    }
    a
}

pub fn aop_from_mask(mask: &SegMask) -> Result<AopGeometry> {
    let ps = pixels(mask, Structure::Ps);
    let fh = pixels(mask, Structure::Fh);
    if ps.is_empty() {
        return Err(MetricsError::Geometry("no PS pixels".into()));
    }
    if fh.is_empty() {
        return Err(MetricsError::Geometry("no FH pixels".into()));
    }
    let ps_c = centroid(&ps);
    let axis = principal_axis(&ps, ps_c)?;
    let proj = |p: &Point| (p.0 - ps_c.0) * axis.0 + (p.1 - ps_c.1) * axis.1;
    let (tmin, tmax) = ps.iter().map(proj).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t), hi.max(t)));
    let end_a = (ps_c.0 + tmin * axis.0, ps_c.1 + tmin * axis.1);
    let end_b = (ps_c.0 + tmax * axis.0, ps_c.1 + tmax * axis.1);
    let fh_c = centroid(&fh);
    let dist2 = |p: Point| (p.0 - fh_c.0).powi(2) + (p.1 - fh_c.1).powi(2);
    let (vertex, far) = if dist2(end_a) <= dist2(end_b) { (end_a, end_b) } else { (end_b, end_a) };

    let hull = convex_hull(&fh);
    if strictly_inside(&hull, vertex) || hull.contains(&vertex) {
        return Err(MetricsError::Geometry("PS endpoint lies inside the FH hull".into()));
    }
    let axis_ray = (far.0 - vertex.0, far.1 - vertex.1);
    let to_c = (fh_c.0 - vertex.0, fh_c.1 - vertex.1);
    let psi = signed_angle(axis_ray, to_c);
    // Angular offsets of hull vertices around the centroid direction.
    let offsets = hull.iter().map(|&h| {
        let d = wrap(signed_angle(to_c, (h.0 - vertex.0, h.1 - vertex.1)));
        (d, h)
    });
    let (offset, touch) = if psi >= 0.0 {
        offsets.fold((f64::NEG_INFINITY, vertex), |best, c| if c.0 > best.0 { c } else { best })
    } else {
        offsets.fold((f64::INFINITY, vertex), |best, c| if c.0 < best.0 { c } else { best })
    };
    let theta = (psi + offset).abs();
    let theta = if theta > std::f64::consts::PI { std::f64::consts::TAU - theta } else { theta };
    let aop = theta.to_degrees();
    if !(aop > 0.0 && aop < 180.0) {
        return Err(MetricsError::Geometry(format!("degenerate angle {aop}")));
    }
    Ok(AopGeometry { ps_axis: [vertex, far], fh_tangent: touch, aop })
}

/// `|AoP(pred) − AoP(gt)|` in degrees, clamped to [0, 180].
pub fn delta_aop(pred: &SegMask, gt: &SegMask) -> Result<f64> {
    let a = aop_from_mask(pred)?.aop;
    let b = aop_from_mask(gt)?.aop;
    Ok((a - b).abs().clamp(0.0, 180.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_square_grid() {
        let pts: Vec<Point> = (0..3).flat_map(|x| (0..3).map(move |y| (x as f64, y as f64))).collect();
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert!(strictly_inside(&hull, (1.0, 1.0)));
        assert!(!strictly_inside(&hull, (3.0, 1.0)));
    }

    #[test]
    fn principal_axis_of_diagonal_line() {
        let pts: Vec<Point> = (0..10).map(|i| (i as f64, i as f64)).collect();
        let a = principal_axis(&pts, centroid(&pts)).unwrap();
        assert!((a.0.abs() - a.1.abs()).abs() < 1e-12);
    }

    #[test]
    fn missing_structures_are_geometry_errors() {
        let only_fh = SegMask::from_fn(8, 8, |x, _| (x > 4) as u8 * 2).unwrap();
        assert!(matches!(aop_from_mask(&only_fh), Err(MetricsError::Geometry(_))));
        let single_ps = SegMask::from_fn(8, 8, |x, y| match (x, y) {
            (0, 0) => 1,
            (x, _) if x > 4 => 2,
            _ => 0,
        })
        .unwrap();
        assert!(aop_from_mask(&single_ps).is_err());
    }
}
