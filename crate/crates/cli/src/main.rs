//! `braunet`: train, evaluate, predict, score and self-verify.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use brau_core::model::BrauNet;
use brau_core::pipeline::data::read_image;
use brau_core::pipeline::predict::predict_batch;
use brau_core::pipeline::train::{BEST_CHECKPOINT, LAST_CHECKPOINT, METRICS_LOG};
use brau_core::pipeline::{build_index, evaluate, load_samples, synthetic_set, train, write_dataset, RunConfig, Split};
use brau_core::verify::{gradient_suite, selfcheck, CheckLine};
use brau_core::CoreError;
use brau_metrics::{evaluate_pair, CorpusSummary, SegMask};
use clap::{Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "braunet", version, about = "Bi-level routing attention U-Net for PS/FH segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoints plus a metrics log.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `train.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on one split of the configured dataset.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "val")]
        split: Split,
        /// Per-case report (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Segment every PNG in a directory.
    Predict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare predicted masks with ground truth, matched by file name.
    Score {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic `images/` + `masks/` dataset.
    Synth {
        #[arg(long, default_value_t = 64)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference gradient checks of every differentiable component.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Oracle comparisons for attention, routing, metrics and checkpoints.
    Selfcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug)]
enum CliError {
    Core(CoreError),
    Failed(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<brau_metrics::MetricsError> for CliError {
    fn from(e: brau_metrics::MetricsError) -> Self {
        CliError::Core(e.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io<T>(path: &Path, r: std::io::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(CoreError::from)?;
    io(path, std::fs::write(path, text + "\n"))
}

/// PNG files in `dir` keyed by file stem.
fn png_files(dir: &Path) -> CliResult<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in io(dir, std::fs::read_dir(dir))? {
        let path = io(dir, entry)?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path.clone());
            }
        }
    }
    Ok(out)
}

fn load_model(cfg: &RunConfig, checkpoint: &Path) -> CliResult<BrauNet<f32>> {
    let mut model = BrauNet::new(cfg.model.clone(), cfg.train.seed)?;
    model.load(checkpoint)?;
    Ok(model)
}

fn run_train(config: &Path, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(seed) = seed {
        cfg.train.seed = seed;
    }
    let index = build_index(&cfg.data.root, cfg.data.split_ratio, cfg.train.seed)?;
    let channels = cfg.model.in_channels;
    let train_set = load_samples(&index.train, channels)?;
    let val_set = load_samples(&index.val, channels)?;
    let mut model = BrauNet::new(cfg.model.clone(), cfg.train.seed)?;
    println!(
        "model: {} parameters; {} training and {} validation cases",
        model.count_parameters(),
        train_set.len(),
        val_set.len()
    );
    let outcome = train(&mut model, &train_set, &val_set, &cfg.train, Some(out))?;
    for r in &outcome.records {
        match &r.validation {
            Some(v) => println!(
                "epoch {:>4}  loss {:.5}  fg dsc {:.4}  score {:.4}{}",
                r.epoch,
                r.mean_loss,
                v.mean_fg_dsc,
                v.mean_score,
                if r.best { "  *" } else { "" }
            ),
            None => println!("epoch {:>4}  loss {:.5}", r.epoch, r.mean_loss),
        }
    }
    let mut resolved = cfg.clone();
    resolved.data.root = std::path::absolute(&cfg.data.root).unwrap_or(cfg.data.root.clone());
    io(out, std::fs::write(out.join("config.toml"), resolved.to_toml()))?;
    println!(
        "best epoch {:?} (fg dsc {:?}); wrote {}, {}, {}",
        outcome.best_epoch,
        outcome.best_fg_dsc,
        BEST_CHECKPOINT,
        LAST_CHECKPOINT,
        METRICS_LOG
    );
    Ok(())
}

fn run_eval(config: &Path, checkpoint: &Path, split: Split, out: Option<&Path>) -> CliResult<()> {
    let cfg = RunConfig::load(config)?;
    let model = load_model(&cfg, checkpoint)?;
    let index = build_index(&cfg.data.root, cfg.data.split_ratio, cfg.train.seed)?;
    let mut pairs = index.split(split);
    if pairs.is_empty() && split == Split::Val {
        eprintln!("validation split is empty; evaluating on the training split");
        pairs = index.split(Split::Train);
    }
    let samples = load_samples(pairs, cfg.model.in_channels)?;
    let (reports, metrics) = evaluate(&model, &samples, cfg.train.batch_size)?;
    let summary = CorpusSummary::from_reports(&reports);
    println!("{}", serde_json::to_string(&metrics).map_err(CoreError::from)?);
    if let Some(path) = out {
        let cases: Vec<_> = samples.iter().zip(&reports).map(|(s, r)| json!({ "name": s.name, "report": r })).collect();
        write_json(path, &json!({ "metrics": metrics, "summary": summary, "cases": cases }))?;
    }
    Ok(())
}

fn run_predict(config: &Path, checkpoint: &Path, images: &Path, out: &Path) -> CliResult<()> {
    let cfg = RunConfig::load(config)?;
    let model = load_model(&cfg, checkpoint)?;
    let files = png_files(images)?;
    if files.is_empty() {
        return Err(CliError::Failed(format!("no PNG images in {}", images.display())));
    }
    io(out, std::fs::create_dir_all(out))?;
    let names: Vec<&String> = files.keys().collect();
    let tensors = files.values().map(|p| read_image(p, cfg.model.in_channels)).collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<_> = tensors.iter().collect();
    let masks = predict_batch(&model, &refs, cfg.train.batch_size)?;
    for (name, mask) in names.iter().zip(&masks) {
        mask.write_png(out.join(format!("{name}.png")))?;
    }
    println!("wrote {} masks to {}", masks.len(), out.display());
    Ok(())
}

fn run_score(pred: &Path, gt: &Path, out: Option<&Path>) -> CliResult<()> {
    let (pred_files, gt_files) = (png_files(pred)?, png_files(gt)?);
    let missing: Vec<String> = pred_files
        .keys()
        .filter(|k| !gt_files.contains_key(*k))
        .map(|k| format!("{k} (no ground truth)"))
        .chain(gt_files.keys().filter(|k| !pred_files.contains_key(*k)).map(|k| format!("{k} (no prediction)")))
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Failed(format!("unmatched masks: {}", missing.join(", "))));
    }
    if gt_files.is_empty() {
        return Err(CliError::Failed(format!("no PNG masks in {}", gt.display())));
    }
    let mut cases = Vec::new();
    let mut reports = Vec::new();
    for (name, gt_path) in &gt_files {
        let report = evaluate_pair(&SegMask::read_png(&pred_files[name])?, &SegMask::read_png(gt_path)?)?;
        cases.push(json!({ "name": name, "report": report }));
        reports.push(report);
    }
    let summary = CorpusSummary::from_reports(&reports);
    println!("{}", serde_json::to_string(&summary).map_err(CoreError::from)?);
    if let Some(path) = out {
        write_json(path, &json!({ "summary": summary, "cases": cases }))?;
    }
    Ok(())
}

fn report_checks(lines: &[CheckLine]) -> CliResult<()> {
    for l in lines {
        println!("{} {:<28} {}", if l.passed { "PASS" } else { "FAIL" }, l.name, l.detail);
    }
    let failed = lines.iter().filter(|l| !l.passed).count();
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} of {} checks failed", lines.len())));
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train { config, seed, out } => run_train(&config, seed, &out),
        Command::Eval { config, checkpoint, split, out } => run_eval(&config, &checkpoint, split, out.as_deref()),
        Command::Predict { config, checkpoint, images, out } => run_predict(&config, &checkpoint, &images, &out),
        Command::Score { pred, gt, out } => run_score(&pred, &gt, out.as_deref()),
        Command::Synth { count, size, seed, out } => {
            write_dataset(&out, &synthetic_set(count, size, seed))?;
            println!("wrote {count} cases to {}", out.display());
            Ok(())
        }
        Command::Gradcheck { seed } => report_checks(&gradient_suite(seed)?),
        Command::Selfcheck { seed } => report_checks(&selfcheck(seed)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
