//! DSC / HD / ASD against brute-force all-pairs boundary distances.

use brau_metrics::{asd, dsc, evaluate_pair, hausdorff, CorpusSummary, SegMask, Structure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random blobs: a few rectangles and disks of each label.
fn random_mask(rng: &mut ChaCha8Rng, size: usize) -> SegMask {
    let mut labels = vec![0u8; size * size];
    for label in [2u8, 1] {
        for _ in 0..rng.random_range(1..4) {
            let cx = rng.random_range(0..size) as f64;
            let cy = rng.random_range(0..size) as f64;
            let r = rng.random_range(1.0..8.0);
            let disk = rng.random_bool(0.5);
            for y in 0..size {
                for x in 0..size {
                    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                    let hit = if disk { dx * dx + dy * dy <= r * r } else { dx.abs() <= r && dy.abs() <= r / 2.0 };
                    if hit {
                        labels[y * size + x] = label;
                    }
                }
            }
        }
    }
    SegMask::new(size, size, labels).unwrap()
}

fn brute_boundary(m: &SegMask, s: Structure) -> Vec<(i64, i64)> {
    let (w, h) = (m.width() as i64, m.height() as i64);
    let fg = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && s.contains(m.get(x as usize, y as usize));
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if fg(x, y) && [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|(dx, dy)| !fg(x + dx, y + dy)) {
                out.push((x, y));
            }
        }
    }
    out
}

fn nearest(from: &[(i64, i64)], to: &[(i64, i64)]) -> Vec<f64> {
    from.iter()
        .map(|&(x, y)| {
            to.iter()
                .map(|&(u, v)| (((x - u).pow(2) + (y - v).pow(2)) as f64).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn brute_hd_asd(a: &SegMask, b: &SegMask, s: Structure) -> Option<(f64, f64)> {
    let (ba, bb) = (brute_boundary(a, s), brute_boundary(b, s));
    if ba.is_empty() || bb.is_empty() {
        return None;
    }
    let d: Vec<f64> = nearest(&ba, &bb).into_iter().chain(nearest(&bb, &ba)).collect();
    let hd = d.iter().cloned().fold(0.0, f64::max);
    let asd = d.iter().sum::<f64>() / d.len() as f64;
    Some((hd, asd))
}

fn brute_dsc(a: &SegMask, b: &SegMask, s: Structure) -> f64 {
    let inter = a.labels().iter().zip(b.labels()).filter(|(&p, &g)| s.contains(p) && s.contains(g)).count();
    let total = a.count(s) + b.count(s);
    if total == 0 { 1.0 } else { 2.0 * inter as f64 / total as f64 }
}

#[test]
fn fifty_random_pairs_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut compared = 0;
    for _ in 0..50 {
        let a = random_mask(&mut rng, 32);
        let b = random_mask(&mut rng, 32);
        for s in Structure::EACH {
            assert_eq!(dsc(&a, &b, s).unwrap(), brute_dsc(&a, &b, s));
            match brute_hd_asd(&a, &b, s) {
                Some((hd, sd)) => {
                    assert!((hausdorff(&a, &b, s).unwrap() - hd).abs() < 1e-9);
                    assert!((asd(&a, &b, s).unwrap() - sd).abs() < 1e-9);
                    compared += 1;
                }
                None => assert!(hausdorff(&a, &b, s).is_err()),
            }
        }
    }
    assert!(compared > 100);
}

#[test]
fn shifted_square_asd_matches_brute_force() {
    let square = |x0: usize| {
        SegMask::from_fn(20, 20, |x, y| (x >= x0 && x < x0 + 8 && (5..13).contains(&y)) as u8).unwrap()
    };
    let (a, b) = (square(4), square(6));
    let (hd, sd) = brute_hd_asd(&a, &b, Structure::Ps).unwrap();
    assert_eq!(hd, 2.0);
    assert_eq!(hausdorff(&a, &b, Structure::Ps).unwrap(), 2.0);
    assert!((asd(&a, &b, Structure::Ps).unwrap() - sd).abs() < 1e-12);
}

#[test]
fn identical_pair_scores_perfectly() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = random_mask(&mut rng, 32);
    let r = evaluate_pair(&m, &m).unwrap();
    let c = r.components;
    assert_eq!((c.dsc_fh, c.dsc_ps, c.dsc_all), (1.0, 1.0, 1.0));
    assert_eq!((c.hd_fh, c.hd_ps, c.hd_all, c.asd_fh, c.asd_ps, c.asd_all), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
    assert_eq!(c.delta_aop, 0.0);
    assert_eq!(r.score, 1.0);

    let corpus = vec![r.clone(), r.clone(), r];
    assert_eq!(CorpusSummary::from_reports(&corpus).mean_score, 1.0);
}

#[test]
fn empty_prediction_takes_worst_clamp() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let gt = random_mask(&mut rng, 32);
    let empty = SegMask::new(32, 32, vec![0; 32 * 32]).unwrap();
    let r = evaluate_pair(&empty, &gt).unwrap();
    assert_eq!(r.components.dsc_fh, 0.0);
    assert_eq!(r.components.hd_fh, 100.0);
    assert_eq!(r.components.asd_all, 100.0);
    assert!(r.flags.iter().any(|f| f == "fh_empty_pred"));
    assert!(r.is_flagged());
}
