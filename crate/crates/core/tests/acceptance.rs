//! End-to-end acceptance criteria, one PASS/FAIL line each. Runs without
//! the test harness so the lines are always printed.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use brau_core::attention::{bra_forward, BraConfig, BraParams, TopK};
use brau_core::model::{BrauNet, ModelConfig};
use brau_core::nn::{Ctx, ParamStore};
use brau_core::pipeline::{evaluate, synthetic_set, train, TrainConfig, TrainOutcome};
use brau_core::verify::{gradient_suite, perturb_parameters, random_tensor};
use brau_core::CoreError;
use brau_metrics::{aop_from_mask, asd, challenge_score, dsc, hausdorff, ScoreComponents, SegMask, Structure};
use brau_tensor::{Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

// ---------------------------------------------------------------- 1

/// Dense multi-head attention over all tokens plus the 5×5 depth-wise
/// value term, written directly from the parameter tensors.
fn dense_reference(x: &Tensor<f64>, store: &ParamStore<f64>, p: &BraParams, heads: usize) -> Vec<f64> {
    let &[b, h, w, c] = x.shape() else { unreachable!() };
    let n = h * w;
    let d = c / heads;
    let mat = |lin: &brau_core::nn::Linear, input: &[f64]| -> Vec<f64> {
        let wt = store.get(lin.weight).data();
        let bias = store.get(lin.bias.unwrap()).data();
        input
            .chunks(c)
            .flat_map(|row| (0..c).map(move |o| bias[o] + (0..c).map(|i| row[i] * wt[i * c + o]).sum::<f64>()))
            .collect()
    };
    let (q, k, v) = (mat(&p.wq, x.data()), mat(&p.wk, x.data()), mat(&p.wv, x.data()));
    let kw = store.get(p.lce.weight).data();
    let kb = store.get(p.lce.bias.unwrap()).data();
    let mut mixed = vec![0.0; b * n * c];
    for bi in 0..b {
        for t in 0..n {
            for head in 0..heads {
                let off = |s: usize| (bi * n + s) * c + head * d;
                let logits: Vec<f64> = (0..n)
                    .map(|s| (0..d).map(|j| q[off(t) + j] * k[off(s) + j]).sum::<f64>() / (d as f64).sqrt())
                    .collect();
                let top = logits.iter().cloned().fold(f64::MIN, f64::max);
                let weights: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
                let total: f64 = weights.iter().sum();
                for j in 0..d {
                    mixed[off(t) + j] = (0..n).map(|s| weights[s] * v[off(s) + j]).sum::<f64>() / total;
                }
            }
            let (ty, tx) = (t / w, t % w);
            for ch in 0..c {
                let mut acc = kb[ch];
                for ky in 0..5 {
                    for kx in 0..5 {
                        let (yy, xx) = (ty as i64 + ky as i64 - 2, tx as i64 + kx as i64 - 2);
                        if (0..h as i64).contains(&yy) && (0..w as i64).contains(&xx) {
                            acc += kw[ch * 25 + ky * 5 + kx] * v[(bi * n + yy as usize * w + xx as usize) * c + ch];
                        }
                    }
                }
                mixed[(bi * n + t) * c + ch] += acc;
            }
        }
    }
    mat(&p.wo, &mixed)
}

fn criterion_dense_oracle() -> Outcome {
    let start = Instant::now();
    let cfg = BraConfig::new(4, TopK::All, 2, 8);
    let mut worst = 0.0f64;
    for seed in 0..3 {
        let mut store = ParamStore::<f64>::new();
        let p = BraParams::new(&mut store, &mut ChaCha8Rng::seed_from_u64(seed), "bra", &cfg).unwrap();
        perturb_parameters(&mut store, 0.3, seed + 10);
        let x = random_tensor(&[2, 16, 16, 8], seed + 20);
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let mut ctx = Ctx::new(&mut tape, &store, false);
        let y = bra_forward(&mut ctx, xv, &p, &cfg).unwrap();
        let reference = dense_reference(&x, &store, &p, 2);
        for (a, b) in tape.value(y).data().iter().zip(&reference) {
            worst = worst.max((a - b).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-5 && elapsed < Duration::from_secs(10),
        format!("max abs diff {worst:.2e} over 3 random inputs, {:.2}s", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- 2

fn criterion_gradients() -> Outcome {
    let start = Instant::now();
    let lines = gradient_suite(7).unwrap();
    let elapsed = start.elapsed();
    let failed: Vec<String> = lines.iter().filter(|l| !l.passed).map(|l| format!("{} ({})", l.name, l.detail)).collect();
    let model = lines.iter().find(|l| l.name.starts_with("full")).map(|l| l.detail.clone()).unwrap_or_default();
    let passed = failed.is_empty() && elapsed < Duration::from_secs(300);
    let detail = if failed.is_empty() {
        format!("{} checks pass; full model: {model}; {:.1}s", lines.len(), elapsed.as_secs_f64())
    } else {
        format!("failed: {}", failed.join("; "))
    };
    outcome(passed, detail)
}

// ---------------------------------------------------------------- 3

fn criterion_score() -> Outcome {
    let table = ScoreComponents {
        dsc_fh: 0.88,
        dsc_ps: 0.80,
        dsc_all: 0.87,
        hd_fh: 20.03,
        hd_ps: 14.07,
        hd_all: 21.87,
        asd_fh: 7.10,
        asd_ps: 4.21,
        asd_all: 6.06,
        delta_aop: 12.20,
    };
    let s = challenge_score(&table).unwrap();
    let perfect = challenge_score(&ScoreComponents::perfect()).unwrap();
    let worst = challenge_score(&ScoreComponents::worst()).unwrap();
    outcome(
        (s - 0.898).abs() <= 0.002 && perfect == 1.0 && worst == 0.0,
        format!("score {s:.6} (reported 89.74), perfect {perfect}, worst {worst}"),
    )
}

// ---------------------------------------------------------------- 4

fn blob_mask(rng: &mut ChaCha8Rng) -> SegMask {
    let mut labels = vec![0u8; 32 * 32];
    for label in [2u8, 1] {
        for _ in 0..rng.random_range(1..4) {
            let (cx, cy) = (rng.random_range(0..32) as f64, rng.random_range(0..32) as f64);
            let (rx, ry) = (rng.random_range(1.0..9.0), rng.random_range(1.0..9.0));
            let square = rng.random_bool(0.4);
            for y in 0..32 {
                for x in 0..32 {
                    let (dx, dy) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
                    let inside = if square { dx.abs() <= 1.0 && dy.abs() <= 1.0 } else { dx * dx + dy * dy <= 1.0 };
                    if inside {
                        labels[y * 32 + x] = label;
                    }
                }
            }
        }
    }
    SegMask::new(32, 32, labels).unwrap()
}

fn edge_pixels(m: &SegMask, s: Structure) -> Vec<(f64, f64)> {
    let inside = |x: i64, y: i64| (0..32).contains(&x) && (0..32).contains(&y) && s.contains(m.get(x as usize, y as usize));
    let mut out = Vec::new();
    for y in 0..32i64 {
        for x in 0..32i64 {
            if inside(x, y) && !(inside(x - 1, y) && inside(x + 1, y) && inside(x, y - 1) && inside(x, y + 1)) {
                out.push((x as f64, y as f64));
            }
        }
    }
    out
}

fn criterion_metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut dsc_exact, mut dist_err, mut compared) = (true, 0.0f64, 0);
    for _ in 0..50 {
        let (a, b) = (blob_mask(&mut rng), blob_mask(&mut rng));
        for s in Structure::EACH {
            let (na, nb) = (a.count(s), b.count(s));
            let both = a.labels().iter().zip(b.labels()).filter(|(p, g)| s.contains(**p) && s.contains(**g)).count();
            let want = if na + nb == 0 { 1.0 } else { (2 * both) as f64 / (na + nb) as f64 };
            dsc_exact &= dsc(&a, &b, s).unwrap() == want;
            let (ea, eb) = (edge_pixels(&a, s), edge_pixels(&b, s));
            if ea.is_empty() || eb.is_empty() {
                continue;
            }
            let mut all = Vec::new();
            for (from, to) in [(&ea, &eb), (&eb, &ea)] {
                for p in from.iter() {
                    all.push(to.iter().map(|q| (p.0 - q.0).hypot(p.1 - q.1)).fold(f64::MAX, f64::min));
                }
            }
            let hd = all.iter().cloned().fold(0.0, f64::max);
            let mean = all.iter().sum::<f64>() / all.len() as f64;
            dist_err = dist_err.max((hausdorff(&a, &b, s).unwrap() - hd).abs());
            dist_err = dist_err.max((asd(&a, &b, s).unwrap() - mean).abs());
            compared += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        dsc_exact && dist_err < 1e-9 && elapsed < Duration::from_secs(30),
        format!(
            "DSC exact: {dsc_exact}; max distance error {dist_err:.1e} over {compared} structure pairs; {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 5

/// Horizontal PS segment starting at `vertex` and running `len` pixels in
/// direction `dir`, and an FH disk placed so that the far tangent from the
/// vertex makes `target` degrees with the PS axis.
struct Scene {
    vertex: (usize, usize),
    dir: i64,
    len: usize,
    radius: f64,
    dist: f64,
    target: f64,
}

impl Scene {
    fn mask(&self) -> SegMask {
        let half_aperture = (self.radius / self.dist).asin();
        let axis_angle = if self.dir > 0 { 0.0 } else { std::f64::consts::PI };
        let phi = axis_angle + self.dir as f64 * (self.target.to_radians() - half_aperture);
        let (vx, vy) = (self.vertex.0 as f64, self.vertex.1 as f64);
        let (cx, cy) = (vx + self.dist * phi.cos(), vy + self.dist * phi.sin());
        SegMask::from_fn(256, 256, |x, y| {
            let along = (x as i64 - self.vertex.0 as i64) * self.dir;
            if y == self.vertex.1 && (0..self.len as i64).contains(&along) {
                1
            } else if (x as f64 - cx).hypot(y as f64 - cy) <= self.radius {
                2
            } else {
                0
            }
        })
        .unwrap()
    }
}

fn criterion_aop() -> Outcome {
    let scenes = [
        Scene { vertex: (100, 60), dir: -1, len: 70, radius: 40.0, dist: 110.0, target: 115.0 },
        Scene { vertex: (100, 70), dir: -1, len: 60, radius: 36.0, dist: 100.0, target: 98.0 },
        Scene { vertex: (95, 50), dir: -1, len: 65, radius: 44.0, dist: 112.0, target: 135.0 },
        Scene { vertex: (150, 70), dir: 1, len: 80, radius: 40.0, dist: 105.0, target: 112.0 },
        Scene { vertex: (110, 45), dir: -1, len: 80, radius: 30.0, dist: 96.0, target: 92.0 },
        Scene { vertex: (120, 80), dir: -1, len: 90, radius: 41.0, dist: 101.0, target: 128.0 },
        Scene { vertex: (140, 60), dir: 1, len: 70, radius: 38.0, dist: 110.0, target: 148.0 },
        Scene { vertex: (100, 100), dir: -1, len: 80, radius: 35.0, dist: 105.0, target: 158.0 },
        Scene { vertex: (105, 62), dir: -1, len: 75, radius: 39.0, dist: 108.0, target: 104.0 },
        Scene { vertex: (110, 120), dir: -1, len: 90, radius: 42.0, dist: 108.0, target: 123.0 },
    ];
    let mut worst = 0.0f64;
    for s in &scenes {
        let m = s.mask();
        for variant in [m.clone(), m.rotate90()] {
            let got = aop_from_mask(&variant).unwrap().aop;
            worst = worst.max((got - s.target).abs());
        }
    }
    outcome(worst < 0.5, format!("10 scenes x 2 orientations, max |error| {worst:.3} deg"))
}

// ---------------------------------------------------------------- 6 & 7

fn smoke_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 2e-3,
        beta1: 0.9,
        beta2: 0.999,
        epsilon: 1e-8,
        batch_size: 8,
        epochs: 500,
        seed: 7,
        flip_prob: 0.0,
        rotation_degrees: 0.0,
        w_ce: 0.4,
        w_dice: 0.6,
        eval_every: 50,
    }
}

fn smoke_run() -> (TrainOutcome, f64, Duration) {
    let start = Instant::now();
    let data = synthetic_set(8, 64, 100);
    let mut model = BrauNet::<f32>::new(ModelConfig::toy(8), 7).unwrap();
    let run = train(&mut model, &data, &[], &smoke_config(), None).unwrap();
    let (_, metrics) = evaluate(&model, &data, 8).unwrap();
    (run, metrics.mean_fg_dsc, start.elapsed())
}

fn criterion_smoke(run: &TrainOutcome, fg_dsc: f64, elapsed: Duration) -> Outcome {
    let windows: Vec<f64> = run.step_losses.chunks(50).take(10).map(|w| w.iter().sum::<f64>() / w.len() as f64).collect();
    let decreasing = windows.len() == 10 && windows.windows(2).all(|p| p[1] < p[0]);
    let steps = run.step_losses.len();
    outcome(
        fg_dsc > 0.95 && decreasing && steps <= 500 && elapsed < Duration::from_secs(900),
        format!(
            "{steps} steps, mean foreground DSC {fg_dsc:.4}, loss windows decreasing: {decreasing} ({:.3} -> {:.4}), {:.1}s",
            windows.first().unwrap_or(&f64::NAN),
            windows.last().unwrap_or(&f64::NAN),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_determinism(a: &TrainOutcome, b: &TrainOutcome) -> Outcome {
    let same_losses = a.step_losses == b.step_losses;
    let same_last = a.last_checkpoint == b.last_checkpoint;
    let same_best = a.best_checkpoint == b.best_checkpoint;
    outcome(
        same_losses && same_last && same_best,
        format!(
            "losses identical: {same_losses}; checkpoints byte-identical: last {same_last}, best {same_best} ({} bytes)",
            a.last_checkpoint.len()
        ),
    )
}

// ---------------------------------------------------------------- 8

fn criterion_shapes() -> Outcome {
    let full = BrauNet::<f32>::new(ModelConfig::full(), 0).unwrap();
    let full_shape = full.infer(&Tensor::from_fn(&[1, 1, 224, 224], |i| (i % 17) as f32 / 17.0)).unwrap().shape().to_vec();
    let toy = BrauNet::<f32>::new(ModelConfig::toy(16), 0).unwrap();
    let toy_shape = toy.infer(&Tensor::zeros(&[1, 1, 64, 64])).unwrap().shape().to_vec();
    let shapes_ok = full_shape == [1, 3, 224, 224] && toy_shape == [1, 3, 64, 64];

    let mut rejections = Vec::new();
    for side in [200usize, 100, 48] {
        let mut cfg = ModelConfig::toy(8);
        cfg.input_size = [side, side];
        rejections.push(matches!(BrauNet::<f32>::new(cfg, 0), Err(CoreError::Config(_))));
    }
    rejections.push(matches!(full.infer(&Tensor::zeros(&[1, 1, 200, 200])), Err(CoreError::Config(_))));
    rejections.push(matches!(toy.infer(&Tensor::zeros(&[1, 1, 48, 48])), Err(CoreError::Config(_))));
    let rejected = rejections.iter().all(|&r| r);
    outcome(
        shapes_ok && rejected,
        format!("224 (S=7) -> {full_shape:?}, 64 (S=4,4,2,1) -> {toy_shape:?}; non-multiple-of-32 rejected: {rejected}"),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 dense-attention oracle", criterion_dense_oracle()),
        ("2 gradient suite", criterion_gradients()),
        ("3 score formula", criterion_score()),
        ("4 metric oracles", criterion_metric_oracles()),
        ("5 AoP geometry", criterion_aop()),
    ];
    let (first, dsc_first, time_first) = smoke_run();
    results.push(("6 training smoke test", criterion_smoke(&first, dsc_first, time_first)));
    let (second, _, _) = smoke_run();
    results.push(("7 determinism", criterion_determinism(&first, &second)));
    results.push(("8 shape/config matrix", criterion_shapes()));

    let mut all = true;
    for (name, o) in &results {
        all &= o.passed;
        println!("{} criterion {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
