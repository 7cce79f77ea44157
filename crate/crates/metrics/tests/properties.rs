use brau_metrics::{asd, challenge_score, dsc, evaluate_pair, hausdorff, ScoreComponents, SegMask, Structure};
use proptest::prelude::*;

fn mask_strategy(size: usize) -> impl Strategy<Value = SegMask> {
    // Rectangles of each label keep regions mostly non-empty.
    let rect = (0..size, 0..size, 1..size / 2, 1..size / 2);
    (rect.clone(), rect).prop_map(move |((x1, y1, w1, h1), (x2, y2, w2, h2))| {
        SegMask::from_fn(size, size, |x, y| {
            if x >= x1 && x < x1 + w1 && y >= y1 && y < y1 + h1 {
                2
            } else if x >= x2 && x < x2 + w2 && y >= y2 && y < y2 + h2 {
                1
            } else {
                0
            }
        })
        .unwrap()
    })
}

fn translate(m: &SegMask, dx: usize, dy: usize) -> SegMask {
    let (w, h) = (m.width() + dx, m.height() + dy);
    SegMask::from_fn(w, h, |x, y| if x >= dx && y >= dy { m.get(x - dx, y - dy) } else { 0 }).unwrap()
}

fn components_strategy() -> impl Strategy<Value = ScoreComponents> {
    (
        prop::array::uniform3(0.0f64..=1.0),
        prop::array::uniform3(0.0f64..150.0),
        prop::array::uniform3(0.0f64..150.0),
        0.0f64..=180.0,
    )
        .prop_map(|(d, h, a, aop)| ScoreComponents {
            dsc_fh: d[0],
            dsc_ps: d[1],
            dsc_all: d[2],
            hd_fh: h[0],
            hd_ps: h[1],
            hd_all: h[2],
            asd_fh: a[0],
            asd_ps: a[1],
            asd_all: a[2],
            delta_aop: aop,
        })
}

proptest! {
    #[test]
    fn dsc_symmetric_and_translation_invariant(a in mask_strategy(16), b in mask_strategy(16), dx in 0usize..5, dy in 0usize..5) {
        for s in Structure::EACH {
            let d = dsc(&a, &b, s).unwrap();
            prop_assert_eq!(d, dsc(&b, &a, s).unwrap());
            prop_assert_eq!(d, dsc(&translate(&a, dx, dy), &translate(&b, dx, dy), s).unwrap());
        }
    }

    #[test]
    fn hausdorff_symmetric_and_bounds_asd(a in mask_strategy(16), b in mask_strategy(16)) {
        for s in Structure::EACH {
            if let (Ok(h), Ok(h2), Ok(sd)) = (hausdorff(&a, &b, s), hausdorff(&b, &a, s), asd(&a, &b, s)) {
                prop_assert_eq!(h, h2);
                prop_assert!(h >= sd);
                prop_assert!(sd >= 0.0);
            }
            let same = hausdorff(&a, &a, s);
            if let Ok(h) = same {
                prop_assert_eq!(h, 0.0);
            }
        }
    }

    #[test]
    fn metrics_invariant_under_quarter_turn(a in mask_strategy(16), b in mask_strategy(16)) {
        let (ra, rb) = (a.rotate90(), b.rotate90());
        for s in Structure::EACH {
            prop_assert_eq!(dsc(&a, &b, s).unwrap(), dsc(&ra, &rb, s).unwrap());
            prop_assert_eq!(hausdorff(&a, &b, s).ok(), hausdorff(&ra, &rb, s).ok());
            let (x, y) = (asd(&a, &b, s).ok(), asd(&ra, &rb, s).ok());
            match (x, y) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                (x, y) => prop_assert_eq!(x.is_none(), y.is_none()),
            }
        }
    }

    #[test]
    fn score_is_monotone(c in components_strategy(), which in 0usize..10, amount in 0.0f64..50.0) {
        let base = challenge_score(&c).unwrap();
        let mut better = c;
        match which {
            0 => better.dsc_fh = (c.dsc_fh + amount / 50.0).min(1.0),
            1 => better.dsc_ps = (c.dsc_ps + amount / 50.0).min(1.0),
            2 => better.dsc_all = (c.dsc_all + amount / 50.0).min(1.0),
            3 => better.hd_fh = (c.hd_fh - amount).max(0.0),
            4 => better.hd_ps = (c.hd_ps - amount).max(0.0),
            5 => better.hd_all = (c.hd_all - amount).max(0.0),
            6 => better.asd_fh = (c.asd_fh - amount).max(0.0),
            7 => better.asd_ps = (c.asd_ps - amount).max(0.0),
            8 => better.asd_all = (c.asd_all - amount).max(0.0),
            _ => better.delta_aop = (c.delta_aop - amount).max(0.0),
        }
        let s = challenge_score(&better).unwrap();
        prop_assert!(s >= base);
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn report_score_recomputes_bit_for_bit(a in mask_strategy(24), b in mask_strategy(24)) {
        let r = evaluate_pair(&a, &b).unwrap();
        prop_assert_eq!(challenge_score(&r.components).unwrap().to_bits(), r.score.to_bits());
    }
}
