use std::fs::File;
use std::io::Write;
use std::path::Path;

use brau_metrics::{evaluate_pair, CorpusSummary, ScoreReport};
use brau_tensor::{Tape, Tensor, TensorError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::augment::augment;
use super::config::TrainConfig;
use super::data::{stack_images, Sample};
use super::loss::seg_loss;
use super::optim::Adam;
use super::predict::predict_batch;
use crate::error::{config_err, io_err, CoreError, Result};
use crate::model::BrauNet;
use crate::nn::Ctx;

pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const METRICS_LOG: &str = "metrics.jsonl";

/// Aggregate validation metrics over a set of cases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub cases: usize,
    /// Mean over cases of the average FH and PS Dice.
    pub mean_fg_dsc: f64,
    pub mean_dsc_all: f64,
    pub mean_hd_all: f64,
    pub mean_score: f64,
}

/// Scores predictions for `samples` against their masks.
pub fn evaluate(model: &BrauNet<f32>, samples: &[Sample], batch: usize) -> Result<(Vec<ScoreReport>, EvalMetrics)> {
    if samples.is_empty() {
        return config_err("no cases to evaluate");
    }
    let images: Vec<&Tensor<f32>> = samples.iter().map(|s| &s.image).collect();
    let preds = predict_batch(model, &images, batch)?;
    let reports = preds
        .iter()
        .zip(samples)
        .map(|(p, s)| evaluate_pair(p, &s.mask))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let summary = CorpusSummary::from_reports(&reports);
    let n = reports.len() as f64;
    let fg = reports.iter().map(|r| 0.5 * (r.components.dsc_fh + r.components.dsc_ps)).sum::<f64>() / n;
    let metrics = EvalMetrics {
        cases: reports.len(),
        mean_fg_dsc: fg,
        mean_dsc_all: summary.mean.dsc_all,
        mean_hd_all: summary.mean.hd_all,
        mean_score: summary.mean_score,
    };
    Ok((reports, metrics))
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub step_losses: Vec<f64>,
    pub validation: Option<EvalMetrics>,
    /// Whether this epoch produced a new best validation Dice.
    pub best: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub step_losses: Vec<f64>,
    pub records: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_fg_dsc: Option<f64>,
    pub best_checkpoint: Option<Vec<u8>>,
    pub last_checkpoint: Vec<u8>,
}

fn sample_rng(seed: u64, epoch: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 32) | index as u64);
    rng
}

fn order_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((1 << 63) | epoch as u64);
    rng
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(io_err(path))
}

/// Runs `cfg.epochs` epochs of augment → forward → loss → backward → Adam.
///
/// Validation runs every `eval_every` epochs and after the last one, on
/// `val` or, when `val` is empty, on `train`. When `out_dir` is given the
/// best and last checkpoints and a JSON-lines metrics log are written there.
pub fn train(
    model: &mut BrauNet<f32>,
    train: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return config_err("training set is empty");
    }
    let mut log = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
            let path = dir.join(METRICS_LOG);
            Some((File::create(&path).map_err(io_err(&path))?, path))
        }
        None => None,
    };
    let val_set = if val.is_empty() { train } else { val };
    let aug = cfg.augmentation();
    let mut adam = Adam::new(&model.store, cfg.adam());
    let trainable = model.store.trainable_ids();
    let mut outcome = TrainOutcome {
        step_losses: Vec::new(),
        records: Vec::new(),
        best_epoch: None,
        best_fg_dsc: None,
        best_checkpoint: None,
        last_checkpoint: Vec::new(),
    };
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut order_rng(cfg.seed, epoch));
        let mut step_losses = Vec::new();
        for batch in order.chunks(cfg.batch_size) {
            let step = outcome.step_losses.len() + step_losses.len();
            let pairs: Vec<_> = batch
                .iter()
                .map(|&i| augment(&train[i].image, &train[i].mask, &aug, &mut sample_rng(cfg.seed, epoch, i)))
                .collect();
            let images: Vec<&Tensor<f32>> = pairs.iter().map(|p| &p.0).collect();
            let masks: Vec<_> = pairs.iter().map(|p| p.1.clone()).collect();
            let x = stack_images(&images)?;

            let non_finite = |e: CoreError| match e {
                CoreError::Tensor(TensorError::NonFinite(_)) => CoreError::NonFiniteLoss { step, lr: cfg.learning_rate },
                other => other,
            };
            let mut tape = Tape::new();
            let xv = tape.constant(x);
            let mut ctx = Ctx::new(&mut tape, &model.store, true);
            let logits = model.forward(&mut ctx, xv).map_err(non_finite)?;
            let bindings = ctx.bindings();
            let updates = ctx.take_stat_updates();
            let loss = seg_loss(&mut tape, logits, &masks, cfg.w_ce, cfg.w_dice).map_err(non_finite)?;
            let loss_value = tape.value(loss).item()? as f64;
            if !loss_value.is_finite() {
                return Err(CoreError::NonFiniteLoss { step, lr: cfg.learning_rate });
            }
            let mut grads = tape.backward(loss).map_err(|e| non_finite(e.into()))?;
            let mut by_id = vec![None; model.store.len()];
            for (id, var) in bindings {
                by_id[id.index()] = Some(var);
            }
            let grads: Vec<_> = trainable
                .iter()
                .map(|&id| {
                    let g = by_id[id.index()]
                        .and_then(|v| grads.take(v))
                        .unwrap_or_else(|| Tensor::zeros(model.store.get(id).shape()));
                    (id, g)
                })
                .collect();
            for u in &updates {
                u.apply(&mut model.store);
            }
            adam.step(&mut model.store, &grads)?;
            step_losses.push(loss_value);
        }
        outcome.step_losses.extend_from_slice(&step_losses);

        let last = epoch + 1 == cfg.epochs;
        let validation = if (epoch + 1) % cfg.eval_every == 0 || last {
            Some(evaluate(model, val_set, cfg.batch_size)?.1)
        } else {
            None
        };
        let mut best = false;
        if let Some(v) = &validation {
            if outcome.best_fg_dsc.is_none_or(|b| v.mean_fg_dsc > b) {
                best = true;
                outcome.best_fg_dsc = Some(v.mean_fg_dsc);
                outcome.best_epoch = Some(epoch);
                let bytes = model.checkpoint_bytes();
                if let Some(dir) = out_dir {
                    write_file(&dir.join(BEST_CHECKPOINT), &bytes)?;
                }
                outcome.best_checkpoint = Some(bytes);
            }
        }
        let record = EpochRecord {
            epoch,
            mean_loss: step_losses.iter().sum::<f64>() / step_losses.len() as f64,
            step_losses,
            validation,
            best,
        };
        if let Some((file, path)) = log.as_mut() {
            let line = serde_json::to_string(&record)?;
            writeln!(file, "{line}").map_err(io_err(path.as_path()))?;
        }
        outcome.records.push(record);
    }
    outcome.last_checkpoint = model.checkpoint_bytes();
    if let Some(dir) = out_dir {
        write_file(&dir.join(LAST_CHECKPOINT), &outcome.last_checkpoint)?;
    }
    Ok(outcome)
}

/// Reads a metrics log written by [`train`].
pub fn read_metrics_log(path: impl AsRef<Path>) -> Result<Vec<EpochRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
