//! The subcommands, as library functions returning typed errors.

use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use diacnn_core::data::synth::{grating, SynthConfig};
use diacnn_core::data::{batch_iter, split_dataset, BatchOptions, Dataset, ImageSet, Split};
use diacnn_core::eval::{
    argmax_rows, auc, classification_report, confusion_matrix, metrics, multiclass_metrics, ovr_roc, roc_curve, tsne,
    RocCurve, TsneConfig,
};
use diacnn_core::net::{decode_checkpoint, encode_checkpoint, Model, ModelSpec, ParamStore, Selector};
use diacnn_core::train::{evaluate_set, improved, train_loop, History, TrainData, TrainError, TrainEvent};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::export::{self, parse_features, parse_history, parse_roc};
use crate::imageio::{decode_image, write_png};
use crate::manifest::{load_manifest, render_manifest, resolve_image};
use crate::rundir::RunDir;
use crate::svg::{Chart, Series};

pub const CONFIG_SNAPSHOT: &str = "config.toml";
pub const HISTORY: &str = "history.csv";
pub const BEST_CKPT: &str = "best.ckpt";
pub const FINAL_CKPT: &str = "final.ckpt";
pub const ROC: &str = "roc.csv";
pub const FEATURES: &str = "features.csv";
pub const TSNE: &str = "tsne.csv";

pub fn save_checkpoint(path: &Path, spec: &ModelSpec, params: &ParamStore<f32>) -> Result<()> {
    std::fs::write(path, encode_checkpoint(spec, params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Model<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (spec, params) = decode_checkpoint(&bytes).map_err(|source| Error::Checkpoint { path: path.into(), source })?;
    Ok(Model::from_parts(spec, params)?)
}

// ---------------------------------------------------------------- prepare

pub struct PrepareArgs {
    pub manifest: PathBuf,
    pub out: PathBuf,
    pub ratios: [f64; 3],
    pub seed: u64,
    pub stratify: bool,
}

/// Assigns splits and writes the manifest with its split column filled.
pub fn cmd_prepare(args: &PrepareArgs) -> Result<Dataset> {
    let ds = load_manifest(&args.manifest)?;
    let split = split_dataset(&ds, args.ratios, args.seed, args.stratify)?;
    let text = render_manifest(&split)?;
    std::fs::write(&args.out, text).map_err(|e| Error::io(&args.out, e))?;
    Ok(split)
}

// ---------------------------------------------------------------- data

/// The task-mapped dataset with split assignments. Manifests without any
/// assignment are split with the configured ratios and seed.
pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let ds = cfg.apply_task(&load_manifest(&cfg.manifest_path())?)?;
    if ds.samples.iter().all(|s| s.split == Split::Unassigned) {
        Ok(split_dataset(&ds, cfg.dataset.ratios, cfg.dataset.seed, cfg.dataset.stratify)?)
    } else {
        Ok(ds)
    }
}

pub fn load_split(cfg: &RunConfig, ds: &Dataset, split: Split) -> Result<ImageSet> {
    let manifest = cfg.manifest_path();
    let set = ImageSet::from_dataset(ds, split, &cfg.preprocess, |s| decode_image(&resolve_image(&manifest, &s.image_path)))?;
    if set.is_empty() {
        return Err(diacnn_core::data::DataError::EmptySplit(split.to_string()).into());
    }
    Ok(set)
}

fn check_compatible(cfg: &RunConfig, spec: &ModelSpec) -> Result<()> {
    let [c, h, w] = spec.input_shape;
    let hw = cfg.preprocess.output_hw();
    if c != 3 || (h, w) != hw {
        return Err(Error::Config(format!(
            "checkpoint expects {c}×{h}×{w} input but preprocessing produces 3×{}×{}",
            hw.0, hw.1
        )));
    }
    if spec.num_classes != Some(cfg.task_classes()) {
        return Err(Error::Config(format!(
            "checkpoint has {:?} classes but the task has {}",
            spec.num_classes,
            cfg.task_classes()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------- evaluate

/// Everything computed from one pass over an evaluation split.
pub struct Evaluation {
    pub probs: Vec<f64>,
    pub preds: Vec<usize>,
    pub labels: Vec<usize>,
    pub features: Vec<Vec<f32>>,
    pub metrics_csv: String,
    pub confusion_csv: String,
    pub report_csv: String,
    pub roc_csv: String,
    /// Accuracy in percent.
    pub accuracy: f64,
}

pub fn evaluate_model(model: &Model<f32>, set: &ImageSet, class_names: &[String], batch_size: usize) -> Result<Evaluation> {
    let k = class_names.len();
    let (mut probs, mut labels, mut features) = (Vec::new(), Vec::new(), Vec::new());
    for batch in batch_iter(set, &BatchOptions::eval(batch_size))? {
        let pred = model.predict(&batch.images)?;
        if pred.probs.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite class probabilities".into()));
        }
        probs.extend(pred.probs.data().iter().map(|&v| v as f64));
        labels.extend_from_slice(&batch.labels);
        if let Some(pen) = pred.penultimate {
            let d = pen.len() / batch.labels.len();
            features.extend(pen.data().chunks_exact(d).map(<[f32]>::to_vec));
        }
    }
    let preds = argmax_rows(&probs, k);
    let report = classification_report(&preds, &labels, class_names)?;

    let mut curves: Vec<(String, RocCurve)> = Vec::new();
    let (metrics_csv, confusion_csv) = if k == 2 {
        // Label 1 is the positive class of a binary task.
        let cm = confusion_matrix(&preds, &labels, 1)?;
        let scores: Vec<f64> = probs.chunks_exact(2).map(|r| r[1]).collect();
        let truth: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
        let mut aucs = Vec::new();
        if let Ok(c) = roc_curve(&scores, &truth) {
            aucs.push(("auc".to_string(), auc(&c)));
            curves.push((class_names[1].clone(), c));
        }
        (export::metrics_csv(&metrics(&cm), &aucs), export::confusion_csv(&cm))
    } else {
        let m = multiclass_metrics(&preds, &labels, k)?;
        let mut aucs = Vec::new();
        for (c, name) in class_names.iter().enumerate() {
            if let Ok(curve) = ovr_roc(&probs, k, &labels, c) {
                aucs.push((format!("auc_{name}"), auc(&curve)));
                curves.push((name.clone(), curve));
            }
        }
        if !aucs.is_empty() {
            let mean = aucs.iter().map(|a| a.1).sum::<f64>() / aucs.len() as f64;
            aucs.push(("auc_macro".into(), mean));
        }
        let mut table = vec![vec![0usize; k]; k];
        for (&p, &y) in preds.iter().zip(&labels) {
            table[p][y] += 1;
        }
        // Sensitivity and friends are one-vs-rest macro means; accuracy is exact match.
        let row = diacnn_core::eval::Metrics { acc: m.accuracy, ..m.macro_avg };
        (export::metrics_csv(&row, &aucs), export::confusion_table_csv(&table, class_names))
    };
    Ok(Evaluation {
        accuracy: 100.0 * report.accuracy,
        report_csv: export::report_csv(&report),
        roc_csv: export::roc_csv(&curves),
        metrics_csv,
        confusion_csv,
        probs,
        preds,
        labels,
        features,
    })
}

fn write_evaluation(dir: &RunDir, ev: &Evaluation) -> Result<()> {
    dir.write("metrics.csv", &ev.metrics_csv)?;
    dir.write("confusion.csv", &ev.confusion_csv)?;
    dir.write("report.csv", &ev.report_csv)?;
    dir.write(ROC, &ev.roc_csv)?;
    dir.write(FEATURES, export::features_csv(&ev.features, &ev.labels))
}

pub struct EvaluateArgs {
    pub checkpoint: PathBuf,
    pub split: Split,
    pub out: PathBuf,
}

/// Scores a checkpoint on one split of the configured dataset.
pub fn cmd_evaluate(cfg: &RunConfig, args: &EvaluateArgs) -> Result<Evaluation> {
    let model = load_checkpoint(&args.checkpoint)?;
    check_compatible(cfg, &model.spec)?;
    let ds = load_dataset(cfg)?;
    let set = load_split(cfg, &ds, args.split)?;
    let dir = RunDir::create(&args.out)?;
    let ev = evaluate_model(&model, &set, &ds.class_names, cfg.train.batch_size)?;
    write_evaluation(&dir, &ev)?;
    dir.log(format!("evaluated {} on {} {} samples: accuracy {}%", args.checkpoint.display(), set.len(), args.split, ev.accuracy))?;
    dir.seal()?;
    Ok(ev)
}

// ---------------------------------------------------------------- train

pub struct TrainSummary {
    pub history: History,
    pub evaluation: Evaluation,
    pub run_dir: PathBuf,
}

/// Writes the config snapshot: the input bytes when no command-line
/// overrides were applied, otherwise the effective configuration.
fn write_snapshot(dir: &RunDir, cfg: &RunConfig, text: &str, overridden: bool) -> Result<()> {
    if overridden {
        dir.write(CONFIG_SNAPSHOT, cfg.to_toml())
    } else {
        dir.write(CONFIG_SNAPSHOT, text)
    }
}

fn run_training(cfg: &RunConfig, dir: &RunDir, model: &mut Model<f32>, start: Option<f64>) -> Result<(History, ParamStore<f32>)> {
    let ds = load_dataset(cfg)?;
    let train = load_split(cfg, &ds, Split::Train)?;
    let val = load_split(cfg, &ds, Split::Val)?;
    dir.log(format!("dataset: {} train, {} val; classes {:?}", train.len(), val.len(), ds.class_names))?;
    let data = TrainData { train: &train, val: &val, augment: cfg.augment.then(|| cfg.preprocess.augment.clone()) };

    let initial = model.params.clone();
    let mut log_err = None;
    let outcome = train_loop(model, &data, &cfg.train, &mut |ev| {
        let line = match ev {
            TrainEvent::Epoch { record: r, improved, .. } => format!(
                "epoch {} lr {} train_loss {:.6} train_acc {:.4} val_loss {:.6} val_acc {:.4}{}",
                r.epoch,
                r.lr,
                r.train_loss,
                r.train_acc,
                r.val_loss,
                r.val_acc,
                if improved { " *" } else { "" }
            ),
            TrainEvent::EarlyStop { epoch } => format!("early stop after epoch {epoch}"),
        };
        if let Err(e) = dir.log(line) {
            log_err = Some(e);
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    });
    if let Some(e) = log_err {
        return Err(e);
    }
    let outcome = match outcome {
        Err(TrainError::Diverged { epoch, batch }) => {
            let at = if batch == usize::MAX { "validation".to_string() } else { format!("batch {batch}") };
            dir.log(format!("training diverged at epoch {epoch}, {at}"))?;
            return Err(Error::Numeric(format!("training diverged at epoch {epoch}, {at}; try a smaller learning rate")));
        }
        other => other?,
    };
    dir.write(HISTORY, export::history_csv(&outcome.history))?;

    // Fine-tuning keeps the starting weights unless an epoch beats them.
    let mut best = outcome.best;
    if let (Some(s), Some(b)) = (start, outcome.history.best_epoch) {
        let value = outcome.history.records[b].metric(cfg.train.monitor);
        if !improved(Some(s), value, 0.0, cfg.train.monitor.higher_is_better()) {
            dir.log(format!("no epoch beat the starting {:?} of {s}; best.ckpt keeps the starting weights", cfg.train.monitor))?;
            best = initial;
        }
    }
    Ok((outcome.history, best))
}

fn finish_run(cfg: &RunConfig, dir: &RunDir, model: &Model<f32>, best: ParamStore<f32>, history: History) -> Result<TrainSummary> {
    save_checkpoint(&dir.file(FINAL_CKPT), &model.spec, &model.params)?;
    save_checkpoint(&dir.file(BEST_CKPT), &model.spec, &best)?;
    let best_model = Model::from_parts(model.spec.clone(), best)?;
    let ds = load_dataset(cfg)?;
    let split: Split = cfg.output.eval_split.parse().map_err(Error::Config)?;
    let set = load_split(cfg, &ds, split)?;
    let evaluation = evaluate_model(&best_model, &set, &ds.class_names, cfg.train.batch_size)?;
    write_evaluation(dir, &evaluation)?;
    dir.log(format!("best.ckpt on {} {} samples: accuracy {}%", set.len(), split, evaluation.accuracy))?;
    dir.seal()?;
    Ok(TrainSummary { history, evaluation, run_dir: dir.path.clone() })
}

/// Trains a fresh model and writes the run directory.
pub fn cmd_train(cfg: &RunConfig, config_text: &str, overridden: bool) -> Result<TrainSummary> {
    let spec = cfg.build_model()?;
    let dir = RunDir::create(&cfg.out_dir())?;
    dir.reset_log()?;
    write_snapshot(&dir, cfg, config_text, overridden)?;
    let mut model = Model::new(spec, cfg.init_seed())?;
    dir.log(format!(
        "model {} with {} parameters, init seed {}",
        model.spec.name,
        model.params.element_count(),
        cfg.init_seed()
    ))?;
    let (history, best) = run_training(cfg, &dir, &mut model, None)?;
    finish_run(cfg, &dir, &model, best, history)
}

// ---------------------------------------------------------------- finetune

pub struct FinetuneSummary {
    pub run: TrainSummary,
    pub frozen_before: u64,
    pub frozen_after: u64,
    pub trainable: Vec<String>,
}

/// Loads a checkpoint, trains only the parameters `selector` matches and
/// writes a run directory.
pub fn cmd_finetune(cfg: &RunConfig, config_text: &str, overridden: bool, checkpoint: &Path, selector: &Selector) -> Result<FinetuneSummary> {
    let mut model = load_checkpoint(checkpoint)?;
    check_compatible(cfg, &model.spec)?;
    model.params.train_only(&model.spec, selector)?;
    let trainable: Vec<String> = model.params.trainable_names().into_iter().map(String::from).collect();

    let dir = RunDir::create(&cfg.out_dir())?;
    dir.reset_log()?;
    write_snapshot(&dir, cfg, config_text, overridden)?;
    let frozen_before = model.params.frozen_checksum();
    dir.log(format!("fine-tuning {} with trainable {:?}", checkpoint.display(), trainable))?;
    dir.log(format!("frozen checksum before {frozen_before:016x}"))?;

    let ds = load_dataset(cfg)?;
    let val = load_split(cfg, &ds, Split::Val)?;
    let (val_loss, val_acc) = evaluate_set(&model, &val, cfg.train.batch_size)?;
    let start = diacnn_core::train::EpochRecord { epoch: 0, train_loss: f64::NAN, train_acc: f64::NAN, val_loss, val_acc, lr: 0.0 }
        .metric(cfg.train.monitor);
    dir.log(format!("starting val_loss {val_loss:.6} val_acc {val_acc:.4}"))?;

    let (history, best) = run_training(cfg, &dir, &mut model, Some(start).filter(|v| v.is_finite()))?;
    let frozen_after = model.params.frozen_checksum();
    dir.log(format!("frozen checksum after {frozen_after:016x}"))?;
    if frozen_after != frozen_before {
        return Err(Error::Numeric("frozen parameters changed during fine-tuning".into()));
    }
    let run = finish_run(cfg, &dir, &model, best, history)?;
    Ok(FinetuneSummary { run, frozen_before, frozen_after, trainable })
}

// ---------------------------------------------------------------- report

pub struct ReportArgs {
    pub run_dir: PathBuf,
    pub perplexity: f64,
    pub seed: u64,
}

pub struct ReportSummary {
    pub tsne_rows: usize,
    pub perplexity: f64,
    pub kl: f64,
}

/// Renders training, ROC and t-SNE plots from a run directory.
pub fn cmd_report(args: &ReportArgs) -> Result<ReportSummary> {
    let dir = RunDir::open(&args.run_dir)?;
    // Read everything first so a missing file fails before any output.
    let history = parse_history(&dir.read(HISTORY)?)?;
    let roc = parse_roc(&dir.read(ROC)?)?;
    let (x, d, labels) = parse_features(&dir.read(FEATURES)?)?;

    let ep = |f: fn(&export::HistoryRow) -> f64| -> Vec<(f64, f64)> { history.iter().map(|r| (r.epoch as f64, f(r))).collect() };
    let training = Chart {
        title: "Training progress".into(),
        x_label: "epoch".into(),
        y_label: "loss / accuracy".into(),
        x_range: None,
        y_range: None,
        series: vec![
            Series { name: "train loss".into(), points: ep(|r| r.train_loss), line: true },
            Series { name: "val loss".into(), points: ep(|r| r.val_loss), line: true },
            Series { name: "train acc".into(), points: ep(|r| r.train_acc), line: true },
            Series { name: "val acc".into(), points: ep(|r| r.val_acc), line: true },
        ],
        guide: None,
    };
    dir.write("training.svg", training.render())?;

    let mut classes: Vec<String> = Vec::new();
    for r in &roc {
        if !classes.contains(&r.class) {
            classes.push(r.class.clone());
        }
    }
    let roc_chart = Chart {
        title: "ROC curve".into(),
        x_label: "false positive rate".into(),
        y_label: "true positive rate".into(),
        x_range: Some((0.0, 1.0)),
        y_range: Some((0.0, 1.0)),
        series: classes
            .iter()
            .map(|c| Series {
                name: c.clone(),
                points: roc.iter().filter(|r| &r.class == c).map(|r| (r.fpr, r.tpr)).collect(),
                line: true,
            })
            .collect(),
        guide: Some(((0.0, 0.0), (1.0, 1.0))),
    };
    dir.write("roc.svg", roc_chart.render())?;

    let n = labels.len();
    if n < 4 || d == 0 {
        return Err(Error::Config(format!("{FEATURES} has {n} rows of dimension {d}; t-SNE needs at least 4 points")));
    }
    let limit = ((n - 1) as f64 / 3.0).max(1.0);
    let perplexity = if args.perplexity > limit {
        dir.log(format!("perplexity {} lowered to {limit} for {n} points", args.perplexity))?;
        limit
    } else {
        args.perplexity
    };
    let emb = tsne(&x, n, d, &TsneConfig { perplexity, seed: args.seed, ..TsneConfig::default() })?;
    dir.write(TSNE, export::tsne_csv(&emb.coords, &labels))?;
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let scatter = Chart {
        title: "t-SNE of penultimate features".into(),
        x_label: "t-SNE 1".into(),
        y_label: "t-SNE 2".into(),
        x_range: None,
        y_range: None,
        series: (0..k)
            .map(|c| Series {
                name: format!("class {c}"),
                points: emb.coords.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| (p[0], p[1])).collect(),
                line: false,
            })
            .collect(),
        guide: None,
    };
    dir.write("tsne.svg", scatter.render())?;
    dir.log(format!("t-SNE on {n} points, perplexity {perplexity}, KL {}", emb.kl))?;
    dir.seal()?;
    Ok(ReportSummary { tsne_rows: n, perplexity, kl: emb.kl })
}

// ---------------------------------------------------------------- synth

pub struct SynthArgs {
    pub out: PathBuf,
    /// Manifest class token for each synthetic class.
    pub classes: Vec<String>,
    pub config: SynthConfig,
}

/// Writes seeded grating images as PNGs plus an unsplit manifest.
pub fn cmd_synth(args: &SynthArgs) -> Result<usize> {
    let k = args.classes.len();
    if k < 2 {
        return Err(Error::Config("need at least two class tokens".into()));
    }
    let odir = Dataset::odir();
    for c in &args.classes {
        odir.class_index(c).ok_or_else(|| Error::Config(format!("unknown class token `{c}`")))?;
    }
    let c = &args.config;
    let img_dir = args.out.join("images");
    std::fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    let mut manifest = String::from("image_path,eye,label\n");
    let mut count = 0;
    for i in 0..c.per_class {
        for class in 0..k {
            let index = (i * k + class) as u64;
            let img = grating(class, k, c.height, c.width, c.noise, c.seed, index);
            let name = format!("images/{index:05}.png");
            write_png(&args.out.join(&name), &img)?;
            let eye = if index.is_multiple_of(2) { "left" } else { "right" };
            manifest.push_str(&format!("{name},{eye},{}\n", args.classes[class]));
            count += 1;
        }
    }
    let p = args.out.join("manifest.csv");
    std::fs::write(&p, manifest).map_err(|e| Error::io(&p, e))?;
    Ok(count)
}
