//! Finite-difference gradient suite and oracle self-checks shared by the
//! command-line tool and the test suites.

use brau_metrics::{asd, challenge_score, dsc, hausdorff, ScoreComponents, SegMask, Structure};
use brau_tensor::gradcheck::{check_gradients, GradCheckOptions, GradCheckReport};
use brau_tensor::{BatchNormMode, ConvGeom, Real, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attention::{bra_forward_traced, partition_regions, unpartition_regions, BraConfig, BraParams, TopK};
use crate::error::Result;
use crate::model::{BiformerBlock, BrauNet, FinalExpand, ModelConfig, PatchEmbed, PatchExpand, PatchMerge, SkipFuse};
use crate::nn::{BatchNorm2d, Conv2d, Ctx, LayerNorm, Linear, Mlp, ParamStore};
use crate::pipeline::{seg_loss, synthetic_case};

/// Tolerance for primitives, layers and single blocks.
pub const PRIMITIVE_TOL: f64 = 1e-4;
/// Tolerance for the full model.
pub const MODEL_TOL: f64 = 1e-3;

/// One named verification outcome.
#[derive(Clone, Debug)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckLine {
    fn from_report(name: &str, report: &GradCheckReport, tol: f64) -> Self {
        Self {
            name: name.to_string(),
            passed: report.passes(tol),
            detail: format!(
                "entries {:>5}  max rel {:.2e}  max abs {:.2e}  tol {tol:.0e}",
                report.entries_checked, report.max_rel_err, report.max_abs_err
            ),
        }
    }
}

pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Mean of `y` weighted by fixed random coefficients, so every output
/// element contributes a distinct gradient.
pub fn probe<T: Real>(tape: &mut Tape<T>, y: Var, seed: u64) -> Result<Var> {
    let w = random_tensor(tape.shape(y), seed).cast();
    let w = tape.constant(w);
    let p = tape.mul(y, w)?;
    Ok(tape.mean(p)?)
}

/// Adds uniform noise of amplitude `scale` to every trainable entry so that
/// unit scales and zero shifts are also exercised away from their initial
/// values.
pub fn perturb_parameters(store: &mut ParamStore<f64>, scale: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for id in store.trainable_ids() {
        for v in store.get_mut(id).data_mut() {
            *v += scale * rng.random_range(-1.0..1.0);
        }
    }
}

/// Gradient check over the extra inputs followed by every trainable entry
/// of `store`. `build` receives the extra-input variables and must return a
/// scalar.
pub fn check_with_params<F>(
    store: &ParamStore<f64>,
    training: bool,
    extras: &[Tensor<f64>],
    opts: &GradCheckOptions,
    build: F,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Ctx<'_, '_, f64>, &[Var]) -> Result<Var>,
{
    let ids = store.trainable_ids();
    let mut inputs = extras.to_vec();
    inputs.extend(ids.iter().map(|&id| store.get(id).clone()));
    check_gradients(
        &inputs,
        |tape, vars| {
            let mut ctx = Ctx::new(tape, store, training);
            for (&id, &v) in ids.iter().zip(&vars[extras.len()..]) {
                ctx.bind(id, v)?;
            }
            build(&mut ctx, &vars[..extras.len()])
        },
        opts,
    )
}

type TapeFn = fn(&mut Tape<f64>, &[Var]) -> Result<Var>;

fn primitive_cases() -> Vec<(&'static str, Vec<Vec<usize>>, TapeFn)> {
    vec![
        ("matmul", vec![vec![2, 3, 4], vec![4, 5]], |t, v| Ok(t.matmul(v[0], v[1])?)),
        ("add (broadcast)", vec![vec![2, 3, 4], vec![4]], |t, v| Ok(t.add(v[0], v[1])?)),
        ("sub (broadcast)", vec![vec![3, 1], vec![1, 4]], |t, v| Ok(t.sub(v[0], v[1])?)),
        ("mul", vec![vec![3, 4], vec![3, 4]], |t, v| Ok(t.mul(v[0], v[1])?)),
        ("div", vec![vec![3, 4], vec![3, 4]], |t, v| {
            let d = t.affine(v[1], 0.5, 2.0)?;
            Ok(t.div(v[0], d)?)
        }),
        ("affine", vec![vec![5]], |t, v| Ok(t.affine(v[0], -1.5, 0.3)?)),
        ("gelu", vec![vec![4, 5]], |t, v| Ok(t.gelu(v[0])?)),
        ("reshape+permute", vec![vec![2, 3, 4]], |t, v| {
            let p = t.permute(v[0], &[2, 0, 1])?;
            Ok(t.reshape(p, &[4, 6])?)
        }),
        ("concat", vec![vec![2, 3], vec![2, 2]], |t, v| Ok(t.concat(&[v[0], v[1]], 1)?)),
        ("slice", vec![vec![4, 3]], |t, v| Ok(t.slice(v[0], 0, 1, 3)?)),
        ("index_select", vec![vec![4, 3]], |t, v| Ok(t.index_select(v[0], 0, &[3, 0, 3, 1])?)),
        ("sum_axis", vec![vec![2, 3, 4]], |t, v| Ok(t.sum_axis(v[0], 1, false)?)),
        ("mean_axis", vec![vec![2, 3, 4]], |t, v| Ok(t.mean_axis(v[0], 2, true)?)),
        ("softmax", vec![vec![3, 5]], |t, v| Ok(t.softmax(v[0], 1)?)),
        ("log_softmax", vec![vec![2, 4, 3]], |t, v| Ok(t.log_softmax(v[0], 1)?)),
        ("conv2d", vec![vec![2, 3, 6, 6], vec![4, 3, 3, 3], vec![4]], |t, v| {
            Ok(t.conv2d(v[0], v[1], Some(v[2]), ConvGeom::new(1, 1, 1))?)
        }),
        ("conv2d stride 2", vec![vec![1, 2, 7, 7], vec![3, 2, 3, 3]], |t, v| {
            Ok(t.conv2d(v[0], v[1], None, ConvGeom::new(2, 1, 1))?)
        }),
        ("conv2d depth-wise", vec![vec![1, 3, 6, 6], vec![3, 1, 5, 5], vec![3]], |t, v| {
            Ok(t.conv2d(v[0], v[1], Some(v[2]), ConvGeom::new(1, 2, 3))?)
        }),
        ("layer_norm", vec![vec![3, 6], vec![6], vec![6]], |t, v| Ok(t.layer_norm(v[0], v[1], v[2], 1e-5)?)),
        ("batch_norm2d train", vec![vec![2, 3, 3, 3], vec![3], vec![3]], |t, v| {
            Ok(t.batch_norm2d(v[0], v[1], v[2], 1e-5, BatchNormMode::Train)?.out)
        }),
        ("batch_norm2d eval", vec![vec![2, 3, 3, 3], vec![3], vec![3]], |t, v| {
            let mode = BatchNormMode::Eval { mean: &[0.1, -0.2, 0.3], var: &[0.5, 1.5, 2.0] };
            Ok(t.batch_norm2d(v[0], v[1], v[2], 1e-5, mode)?.out)
        }),
    ]
}

/// Checks one parameterized module at `tol`, with all trainable entries
/// perturbed away from initialization.
#[allow(clippy::too_many_arguments)]
fn module_line<F>(
    name: &str,
    mut store: ParamStore<f64>,
    training: bool,
    input_shape: &[usize],
    opts: &GradCheckOptions,
    tol: f64,
    seed: u64,
    forward: F,
) -> Result<CheckLine>
where
    F: Fn(&mut Ctx<'_, '_, f64>, Var) -> Result<Var>,
{
    perturb_parameters(&mut store, 0.1, seed);
    let x = random_tensor(input_shape, seed + 1);
    let report = check_with_params(&store, training, &[x], opts, |ctx, v| {
        let y = forward(ctx, v[0])?;
        probe(ctx.tape, y, seed + 2)
    })?;
    Ok(CheckLine::from_report(name, &report, tol))
}

/// Every primitive op, every layer type, one BiFormer block and the full
/// toy model against central finite differences (64-bit).
pub fn gradient_suite(seed: u64) -> Result<Vec<CheckLine>> {
    let opts = GradCheckOptions { seed, ..GradCheckOptions::default() };
    let mut lines = Vec::new();
    for (i, (name, shapes, f)) in primitive_cases().into_iter().enumerate() {
        let base = seed.wrapping_mul(1000) + 10 * i as u64;
        let inputs: Vec<Tensor<f64>> = shapes.iter().enumerate().map(|(j, s)| random_tensor(s, base + j as u64)).collect();
        let report = check_gradients(
            &inputs,
            |tape, vars| {
                let y = f(tape, vars)?;
                probe(tape, y, base + 9)
            },
            &opts,
        )?;
        lines.push(CheckLine::from_report(name, &report, PRIMITIVE_TOL));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = PRIMITIVE_TOL;
    let s = seed.wrapping_mul(7919);

    let mut st = ParamStore::new();
    let lin = Linear::new(&mut st, &mut rng, "linear", 5, 3, true)?;
    lines.push(module_line("linear layer", st, true, &[2, 4, 5], &opts, tol, s + 1, |c, x| lin.forward(c, x))?);

    let mut st = ParamStore::new();
    let conv = Conv2d::new(&mut st, &mut rng, "conv", 2, 4, 3, ConvGeom::new(2, 1, 1), true)?;
    lines.push(module_line("conv2d layer", st, true, &[2, 2, 8, 8], &opts, tol, s + 2, |c, x| conv.forward(c, x))?);

    let mut st = ParamStore::new();
    let ln = LayerNorm::new(&mut st, "ln", 6)?;
    lines.push(module_line("layernorm layer", st, true, &[2, 3, 6], &opts, tol, s + 3, |c, x| ln.forward(c, x))?);

    let mut st = ParamStore::new();
    let bn = BatchNorm2d::new(&mut st, "bn", 3)?;
    let st_eval = st.clone();
    lines.push(module_line("batchnorm layer (train)", st, true, &[2, 3, 4, 4], &opts, tol, s + 4, |c, x| bn.forward(c, x))?);
    lines.push(module_line("batchnorm layer (eval)", st_eval, false, &[2, 3, 4, 4], &opts, tol, s + 5, |c, x| bn.forward(c, x))?);

    let mut st = ParamStore::new();
    let mlp = Mlp::new(&mut st, &mut rng, "mlp", 4, 3)?;
    lines.push(module_line("mlp", st, true, &[3, 4], &opts, tol, s + 6, |c, x| mlp.forward(c, x))?);

    let cfg = BraConfig::new(2, TopK::Count(2), 2, 8);
    let mut st = ParamStore::new();
    let bra = BraParams::new(&mut st, &mut rng, "bra", &cfg)?;
    lines.push(module_line("bi-level routing attention", st, true, &[2, 8, 8, 8], &opts, tol, s + 7, |c, x| {
        Ok(bra_forward_traced(c, x, &bra, &cfg)?.0)
    })?);

    let mut st = ParamStore::new();
    let block = BiformerBlock::new(&mut st, &mut rng, "block", BraConfig::new(2, TopK::Count(2), 2, 4), 3)?;
    lines.push(module_line("biformer block (8x8, c=4)", st, true, &[1, 8, 8, 4], &opts, tol, s + 8, |c, x| {
        block.forward(c, x)
    })?);

    let mut st = ParamStore::new();
    let embed = PatchEmbed::new(&mut st, &mut rng, "embed", 1, 8)?;
    lines.push(module_line("patch embedding", st, true, &[2, 1, 16, 16], &opts, tol, s + 9, |c, x| embed.forward(c, x))?);

    let mut st = ParamStore::new();
    let merge = PatchMerge::new(&mut st, &mut rng, "merge", 4)?;
    lines.push(module_line("patch merging", st, true, &[1, 4, 4, 4], &opts, tol, s + 10, |c, x| merge.forward(c, x))?);

    let mut st = ParamStore::new();
    let expand = PatchExpand::new(&mut st, &mut rng, "expand", 8)?;
    lines.push(module_line("patch expanding", st, true, &[1, 3, 3, 8], &opts, tol, s + 11, |c, x| expand.forward(c, x))?);

    let mut st = ParamStore::new();
    let fin = FinalExpand::new(&mut st, &mut rng, "final", 4)?;
    lines.push(module_line("final 4x expanding", st, true, &[1, 2, 2, 4], &opts, tol, s + 12, |c, x| fin.forward(c, x))?);

    let mut st = ParamStore::new();
    let fuse = SkipFuse::new(&mut st, &mut rng, "fuse", 4)?;
    perturb_parameters(&mut st, 0.1, s + 13);
    let (d, e) = (random_tensor(&[1, 3, 3, 4], s + 13), random_tensor(&[1, 3, 3, 4], s + 14));
    let report = check_with_params(&st, true, &[d, e], &opts, |ctx, v| {
        let y = fuse.forward(ctx, v[0], v[1])?;
        probe(ctx.tape, y, s + 15)
    })?;
    lines.push(CheckLine::from_report("skip fusion", &report, tol));

    let logits = random_tensor(&[2, 3, 4, 4], s + 16).map(|v| 3.0 * v);
    let targets: Vec<SegMask> = (0..2)
        .map(|b| SegMask::from_fn(4, 4, |x, y| ((x + 2 * y + b) % 3) as u8).expect("labels"))
        .collect();
    let report = check_gradients(
        &[logits],
        |tape, v| seg_loss(tape, v[0], &targets, 0.4, 0.6),
        &opts,
    )?;
    lines.push(CheckLine::from_report("segmentation loss", &report, tol));

    lines.push(full_model_line(seed, &opts)?);
    Ok(lines)
}

/// Full toy model (64×64, C=8, depths [1,1,2,1]) in training mode, with a
/// sample of entries from every parameter tensor.
fn full_model_line(seed: u64, opts: &GradCheckOptions) -> Result<CheckLine> {
    let net = BrauNet::<f64>::new(ModelConfig::toy(8), seed)?;
    let case = synthetic_case(64, seed);
    let img = crate::pipeline::normalize_image(&case.image).cast::<f64>().reshaped(vec![1, 1, 64, 64])?;
    let targets = vec![case.mask];
    let opts = GradCheckOptions { max_entries: Some(3), ..opts.clone() };
    let report = check_with_params(&net.store, true, &[], &opts, |ctx, _| {
        let x = ctx.tape.constant(img.clone());
        let logits = net.forward(ctx, x)?;
        seg_loss(ctx.tape, logits, &targets, 0.4, 0.6)
    })?;
    Ok(CheckLine::from_report("full toy model (64x64, C=8)", &report, MODEL_TOL))
}

/// Brute-force reference for attention with every region routed: dense
/// per-head softmax attention over all tokens, plus the depth-wise local
/// term on the value map, then the output projection. Plain loops over
/// `[B,H,W,C]` input.
pub fn dense_attention_reference(x: &Tensor<f64>, store: &ParamStore<f64>, p: &BraParams, heads: usize) -> Tensor<f64> {
    let &[b, h, w, c] = x.shape() else { panic!("expected [B,H,W,C]") };
    let n = h * w;
    let d = c / heads;
    let project = |lin: &Linear, rows: &[f64]| -> Vec<f64> {
        let wt = store.get(lin.weight).data();
        let bias = lin.bias.map(|id| store.get(id).data());
        let (i_dim, o_dim) = (lin.in_dim, lin.out_dim);
        let mut out = vec![0.0; rows.len() / i_dim * o_dim];
        for (r, row) in rows.chunks(i_dim).enumerate() {
            for o in 0..o_dim {
                let mut acc = bias.map_or(0.0, |bb| bb[o]);
                for (i, &xv) in row.iter().enumerate() {
                    acc += xv * wt[i * o_dim + o];
                }
                out[r * o_dim + o] = acc;
            }
        }
        out
    };
    let q = project(&p.wq, x.data());
    let k = project(&p.wk, x.data());
    let v = project(&p.wv, x.data());
    let kw = store.get(p.lce.weight).data();
    let kb = p.lce.bias.map(|id| store.get(id).data());
    let ks = p.lce.kernel;
    let pad = ks as isize / 2;
    let mut o = vec![0.0; b * n * c];
    for bi in 0..b {
        for t in 0..n {
            for hd in 0..heads {
                let qv = &q[(bi * n + t) * c + hd * d..][..d];
                let scores: Vec<f64> = (0..n)
                    .map(|s| {
                        let kv = &k[(bi * n + s) * c + hd * d..][..d];
                        qv.iter().zip(kv).map(|(a, b)| a * b).sum::<f64>() / (d as f64).sqrt()
                    })
                    .collect();
                let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
                let z: f64 = e.iter().sum();
                for j in 0..d {
                    o[(bi * n + t) * c + hd * d + j] =
                        (0..n).map(|s| e[s] / z * v[(bi * n + s) * c + hd * d + j]).sum();
                }
            }
            let (ty, tx) = ((t / w) as isize, (t % w) as isize);
            for ch in 0..c {
                let mut acc = kb.map_or(0.0, |bb| bb[ch]);
                for dy in 0..ks as isize {
                    for dx in 0..ks as isize {
                        let (yy, xx) = (ty + dy - pad, tx + dx - pad);
                        if yy >= 0 && xx >= 0 && yy < h as isize && xx < w as isize {
                            let src = (bi * n + yy as usize * w + xx as usize) * c + ch;
                            acc += kw[(ch * ks + dy as usize) * ks + dx as usize] * v[src];
                        }
                    }
                }
                o[(bi * n + t) * c + ch] += acc;
            }
        }
    }
    let out = project(&p.wo, &o);
    Tensor::new(vec![b, h, w, c], out).expect("shape")
}

fn line(name: &str, passed: bool, detail: String) -> CheckLine {
    CheckLine { name: name.to_string(), passed, detail }
}

fn random_mask(rng: &mut ChaCha8Rng, size: usize) -> SegMask {
    let mut labels = vec![0u8; size * size];
    for label in [2u8, 1] {
        for _ in 0..rng.random_range(1..4) {
            let (cx, cy) = (rng.random_range(0..size) as f64, rng.random_range(0..size) as f64);
            let r: f64 = rng.random_range(1.0..8.0);
            for y in 0..size {
                for x in 0..size {
                    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                    if dx * dx + dy * dy <= r * r {
                        labels[y * size + x] = label;
                    }
                }
            }
        }
    }
    SegMask::new(size, size, labels).expect("labels")
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

/// Worst deviation of the fast DSC/HD/ASD from all-pairs brute force.
fn metric_oracle_error(seed: u64, pairs: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let (a, b) = (random_mask(&mut rng, 32), random_mask(&mut rng, 32));
        for s in Structure::EACH {
            let inter = a.labels().iter().zip(b.labels()).filter(|(&p, &g)| s.contains(p) && s.contains(g)).count();
            let total = a.count(s) + b.count(s);
            let want = if total == 0 { 1.0 } else { 2.0 * inter as f64 / total as f64 };
            worst = worst.max((dsc(&a, &b, s).expect("same shape") - want).abs());
            let (ba, bb) = (brute_boundary(&a, s), brute_boundary(&b, s));
            if ba.is_empty() || bb.is_empty() {
                continue;
            }
            let nearest = |from: &[(i64, i64)], to: &[(i64, i64)]| -> Vec<f64> {
                from.iter()
                    .map(|&(x, y)| {
                        to.iter()
                            .map(|&(u, v)| (((x - u).pow(2) + (y - v).pow(2)) as f64).sqrt())
                            .fold(f64::INFINITY, f64::min)
                    })
                    .collect()
            };
            let dists: Vec<f64> = nearest(&ba, &bb).into_iter().chain(nearest(&bb, &ba)).collect();
            let hd = dists.iter().cloned().fold(0.0, f64::max);
            let mean = dists.iter().sum::<f64>() / dists.len() as f64;
            worst = worst.max((hausdorff(&a, &b, s).expect("non-empty") - hd).abs());
            worst = worst.max((asd(&a, &b, s).expect("non-empty") - mean).abs());
        }
    }
    worst
}

/// Oracle equivalences: dense attention, routing re-check, partition round
/// trip, metric brute force, published score components and checkpoint
/// round trip.
pub fn selfcheck(seed: u64) -> Result<Vec<CheckLine>> {
    let mut lines = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let cfg = BraConfig::new(4, TopK::All, 2, 8);
    let mut store = ParamStore::new();
    let p = BraParams::new(&mut store, &mut rng, "bra", &cfg)?;
    perturb_parameters(&mut store, 0.3, seed + 1);
    let x = random_tensor(&[2, 16, 16, 8], seed + 2);
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let mut ctx = Ctx::new(&mut tape, &store, false);
    let (out, routing) = bra_forward_traced(&mut ctx, xv, &p, &cfg)?;
    let diff = tape.value(out).max_abs_diff(&dense_attention_reference(&x, &store, &p, 2))?;
    lines.push(line("dense attention oracle (k = S^2)", diff < 1e-5, format!("max abs diff {diff:.2e}")));

    let sparse = BraConfig::new(4, TopK::Count(3), 2, 8);
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let mut ctx = Ctx::new(&mut tape, &store, false);
    let (_, routing_sparse) = bra_forward_traced(&mut ctx, xv, &p, &sparse)?;
    let mut consistent = routing.indices.len() == 2 * 16 * 16;
    let r = routing_sparse.regions();
    for b in 0..2 {
        for i in 0..r {
            let row = &routing_sparse.adjacency.data()[(b * r + i) * r..][..r];
            let mut order: Vec<usize> = (0..r).collect();
            order.sort_by(|&u, &v| row[v].partial_cmp(&row[u]).expect("finite").then(u.cmp(&v)));
            let mut want = order[..3].to_vec();
            want.sort_unstable();
            consistent &= routing_sparse.row(b, i) == want.as_slice();
        }
    }
    lines.push(line("routing rows match brute-force top-k", consistent, format!("{} rows", 2 * r)));

    let mut tape = Tape::<f64>::new();
    let xv = tape.constant(x.clone());
    let pr = partition_regions(&mut tape, xv, 4)?;
    let back = unpartition_regions(&mut tape, pr, 4, 16, 16)?;
    let exact = tape.value(back) == &x;
    lines.push(line("region partition round trip", exact, "bit-exact".into()));

    let err = metric_oracle_error(seed, 20);
    lines.push(line("DSC/HD/ASD vs brute force", err < 1e-9, format!("max abs diff {err:.2e} over 20 pairs")));

    let published = ScoreComponents {
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
    let score = challenge_score(&published)?;
    let perfect = challenge_score(&ScoreComponents::perfect())?;
    let worst = challenge_score(&ScoreComponents::worst())?;
    lines.push(line(
        "challenge score on published components",
        (score - 0.898).abs() <= 0.002 && perfect == 1.0 && worst == 0.0,
        format!("{score:.6} (perfect {perfect}, worst {worst})"),
    ));

    let net = BrauNet::<f32>::new(ModelConfig::toy(8), seed)?;
    let bytes = net.checkpoint_bytes();
    let mut copy = BrauNet::<f32>::new(ModelConfig::toy(8), seed + 1)?;
    copy.store.load_named(brau_tensor::checkpoint::decode(&bytes)?)?;
    let img = random_tensor(&[1, 1, 64, 64], seed + 3).cast::<f32>();
    let same = net.infer(&img)? == copy.infer(&img)?;
    lines.push(line("checkpoint round trip forward", same, "bit-identical logits".into()));
    Ok(lines)
}
