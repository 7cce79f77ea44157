//! AoP on synthetic PS-segment + FH-disk scenes with closed-form angles.

use brau_metrics::{aop_from_mask, delta_aop, SegMask};

const SIZE: usize = 256;

/// A horizontal one-pixel PS from `vertex` running `len` pixels in
/// direction `dir` (±1), and a disk of radius `r` whose centre sits at
/// distance `d` from the vertex such that the far tangent makes angle
/// `target` (degrees) with the axis ray.
struct Scene {
    vertex: (f64, f64),
    dir: f64,
    len: usize,
    r: f64,
    d: f64,
    target: f64,
}

impl Scene {
    fn centre(&self) -> (f64, f64) {
        let alpha = (self.r / self.d).asin();
        // Axis ray points from the vertex toward the far PS end.
        let axis = if self.dir > 0.0 { 0.0 } else { std::f64::consts::PI };
        let theta = self.target.to_radians();
        // Far tangent at `theta`, so the centre direction is `theta - alpha`
        // away from the axis (rotated in the +y sense).
        let phi = axis + self.dir * (theta - alpha);
        (self.vertex.0 + self.d * phi.cos(), self.vertex.1 + self.d * phi.sin())
    }

    fn mask(&self) -> SegMask {
        let (cx, cy) = self.centre();
        let (vx, vy) = (self.vertex.0 as i64, self.vertex.1 as i64);
        SegMask::from_fn(SIZE, SIZE, |x, y| {
            let (xi, yi) = (x as i64, y as i64);
            let along = (xi - vx) as f64 * self.dir;
            if yi == vy && along >= 0.0 && along < self.len as f64 {
                return 1;
            }
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if dx * dx + dy * dy <= self.r * self.r {
                2
            } else {
                0
            }
        })
        .unwrap()
    }

    /// Closed form from the vertex, the far end and the disk.
    fn closed_form(&self) -> f64 {
        let (cx, cy) = self.centre();
        let axis = (self.dir, 0.0);
        let to_c = (cx - self.vertex.0, cy - self.vertex.1);
        let psi = (axis.0 * to_c.1 - axis.1 * to_c.0).atan2(axis.0 * to_c.0 + axis.1 * to_c.1);
        let dist = (to_c.0 * to_c.0 + to_c.1 * to_c.1).sqrt();
        let theta = psi.abs() + (self.r / dist).asin();
        let theta = if theta > std::f64::consts::PI { std::f64::consts::TAU - theta } else { theta };
        theta.to_degrees()
    }
}

fn scenes() -> Vec<Scene> {
    vec![
        Scene { vertex: (100.0, 60.0), dir: -1.0, len: 70, r: 40.0, d: 110.0, target: 120.0 },
        Scene { vertex: (100.0, 60.0), dir: -1.0, len: 70, r: 35.0, d: 100.0, target: 100.0 },
        Scene { vertex: (90.0, 50.0), dir: -1.0, len: 60, r: 45.0, d: 115.0, target: 140.0 },
        Scene { vertex: (150.0, 70.0), dir: 1.0, len: 80, r: 40.0, d: 105.0, target: 110.0 },
        Scene { vertex: (110.0, 40.0), dir: -1.0, len: 80, r: 30.0, d: 95.0, target: 95.0 },
        Scene { vertex: (120.0, 80.0), dir: -1.0, len: 90, r: 40.0, d: 100.0, target: 130.0 },
        Scene { vertex: (140.0, 60.0), dir: 1.0, len: 70, r: 38.0, d: 110.0, target: 150.0 },
        Scene { vertex: (100.0, 100.0), dir: -1.0, len: 80, r: 35.0, d: 105.0, target: 160.0 },
        Scene { vertex: (100.0, 60.0), dir: -1.0, len: 70, r: 40.0, d: 110.0, target: 105.0 },
        Scene { vertex: (110.0, 120.0), dir: -1.0, len: 90, r: 42.0, d: 108.0, target: 125.0 },
    ]
}

#[test]
fn closed_form_matches_the_construction() {
    for s in scenes() {
        assert!((s.closed_form() - s.target).abs() < 1e-9);
    }
}

#[test]
fn aop_within_half_degree_including_rotations() {
    for (i, s) in scenes().iter().enumerate() {
        let mask = s.mask();
        let want = s.closed_form();
        let got = aop_from_mask(&mask).unwrap().aop;
        assert!((got - want).abs() < 0.5, "scene {i}: {got} vs {want}");
        let rotated = aop_from_mask(&mask.rotate90()).unwrap().aop;
        assert!((rotated - want).abs() < 0.5, "scene {i} rotated: {rotated} vs {want}");
    }
}

#[test]
fn disk_on_axis_extension_gives_half_aperture_complement() {
    let s = Scene { vertex: (130.0, 128.0), dir: -1.0, len: 80, r: 40.0, d: 100.0, target: 0.0 };
    // Centre straight ahead of the vertex, opposite to the axis ray.
    let (cx, cy) = (s.vertex.0 + s.d, s.vertex.1);
    let mask = SegMask::from_fn(SIZE, SIZE, |x, y| {
        if y == 128 && x <= 130 && x > 50 {
            return 1;
        }
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        (dx * dx + dy * dy <= s.r * s.r) as u8 * 2
    })
    .unwrap();
    let want = 180.0 - (s.r / s.d).asin().to_degrees();
    let got = aop_from_mask(&mask).unwrap().aop;
    assert!((got - want).abs() < 0.5, "{got} vs {want}");
}

#[test]
fn delta_aop_between_analytic_scenes() {
    let a = Scene { vertex: (100.0, 60.0), dir: -1.0, len: 70, r: 40.0, d: 110.0, target: 120.0 };
    let b = Scene { target: 130.0, ..Scene { vertex: (100.0, 60.0), dir: -1.0, len: 70, r: 40.0, d: 110.0, target: 0.0 } };
    let (ma, mb) = (a.mask(), b.mask());
    let d = delta_aop(&ma, &mb).unwrap();
    assert!((d - 10.0).abs() < 0.5, "{d}");
    assert_eq!(delta_aop(&ma, &mb).unwrap(), delta_aop(&mb, &ma).unwrap());
    assert_eq!(delta_aop(&ma, &ma).unwrap(), 0.0);
}

#[test]
fn geometry_reports_vertex_and_tangent() {
    let s = &scenes()[0];
    let g = aop_from_mask(&s.mask()).unwrap();
    assert_eq!(g.ps_axis[0], s.vertex);
    assert_eq!(g.ps_axis[1], (s.vertex.0 - (s.len - 1) as f64, s.vertex.1));
    let (cx, cy) = s.centre();
    let r = ((g.fh_tangent.0 - cx).powi(2) + (g.fh_tangent.1 - cy).powi(2)).sqrt();
    assert!((r - s.r).abs() < 1.0);
}
