use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use diacnn::commands::{
    cmd_evaluate, cmd_finetune, cmd_prepare, cmd_report, cmd_synth, cmd_train, EvaluateArgs, PrepareArgs, ReportArgs,
    SynthArgs,
};
use diacnn::config::RunConfig;
use diacnn::core::data::synth::SynthConfig;
use diacnn::core::data::Split;
use diacnn::core::net::{FreezePreset, Selector};
use diacnn::{Error, Result};

#[derive(Parser)]
#[command(name = "diacnn", version, about = "Train and evaluate DiaCNN fundus-image classifiers")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Assign train/val/test splits to a manifest.
    Prepare {
        #[arg(long)]
        manifest: PathBuf,
        /// Output manifest with the split column filled.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.8, 0.1, 0.1])]
        ratios: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        no_stratify: bool,
    },
    /// Train a model from a run config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a checkpoint on one split.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long)]
        out: PathBuf,
    },
    /// Continue training a checkpoint with most parameters frozen.
    Finetune {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Parameters left trainable: head_only, last_block, all, or comma-separated layer prefixes.
        #[arg(long, default_value = "head_only")]
        train: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render plots and the t-SNE embedding for a run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 30.0)]
        perplexity: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a seeded synthetic image set and manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Manifest label for each synthetic class.
        #[arg(long, value_delimiter = ',', default_values_t = ["N".to_string(), "C".to_string()])]
        classes: Vec<String>,
        #[arg(long, default_value_t = 50)]
        per_class: usize,
        #[arg(long, default_value_t = 32)]
        size: usize,
        #[arg(long, default_value_t = 20.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn selector(s: &str) -> Selector {
    match s {
        "head_only" => Selector::Preset(FreezePreset::HeadOnly),
        "last_block" => Selector::Preset(FreezePreset::LastBlock),
        "all" => Selector::Preset(FreezePreset::All),
        list => Selector::Prefixes(list.split(',').map(|p| p.trim().to_string()).collect()),
    }
}

fn load_config(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(RunConfig, String, bool)> {
    let (mut cfg, text) = RunConfig::load(path)?;
    let overridden = seed.is_some() || out.is_some();
    if let Some(s) = seed {
        cfg.override_seed(s);
    }
    if let Some(o) = out {
        let cwd = std::env::current_dir().map_err(|e| Error::io(".", e))?;
        cfg.output.dir = cwd.join(o);
    }
    Ok((cfg, text, overridden))
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Prepare { manifest, out, ratios, seed, no_stratify } => {
            let ds = cmd_prepare(&PrepareArgs { manifest, out: out.clone(), ratios: [ratios[0], ratios[1], ratios[2]], seed, stratify: !no_stratify })?;
            let counts: Vec<usize> = Split::ASSIGNED.iter().map(|&s| ds.split(s).count()).collect();
            println!("wrote {} ({} train, {} val, {} test)", out.display(), counts[0], counts[1], counts[2]);
        }
        Cmd::Train { config, seed, out } => {
            let (cfg, text, overridden) = load_config(&config, seed, out)?;
            let s = cmd_train(&cfg, &text, overridden)?;
            println!("{}: {} epochs, accuracy {}%", s.run_dir.display(), s.history.records.len(), s.evaluation.accuracy);
        }
        Cmd::Evaluate { config, checkpoint, split, out } => {
            let (cfg, _, _) = load_config(&config, None, None)?;
            let ev = cmd_evaluate(&cfg, &EvaluateArgs { checkpoint, split, out: out.clone() })?;
            println!("{}: accuracy {}%", out.display(), ev.accuracy);
        }
        Cmd::Finetune { config, checkpoint, train, seed, out } => {
            let (cfg, text, overridden) = load_config(&config, seed, out)?;
            let s = cmd_finetune(&cfg, &text, overridden, &checkpoint, &selector(&train))?;
            println!(
                "{}: trained {:?}, frozen checksum {:016x}, accuracy {}%",
                s.run.run_dir.display(),
                s.trainable,
                s.frozen_after,
                s.run.evaluation.accuracy
            );
        }
        Cmd::Report { run, perplexity, seed } => {
            let r = cmd_report(&ReportArgs { run_dir: run.clone(), perplexity, seed })?;
            println!("{}: t-SNE of {} points, KL {}", run.display(), r.tsne_rows, r.kl);
        }
        Cmd::Synth { out, classes, per_class, size, noise, seed } => {
            let config = SynthConfig { num_classes: classes.len(), per_class, height: size, width: size, noise, seed };
            let n = cmd_synth(&SynthArgs { out: out.clone(), classes, config })?;
            println!("wrote {n} images and {}", out.join("manifest.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
