//! `ncg` — train and evaluate single-spike classification layers with
//! neuronal competition groups.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use ncg_core::config::{DataSource, ExperimentConfig, GridSpace};
use ncg_core::report;

#[derive(Parser)]
#[command(name = "ncg", version, about = "Supervised STDP training with neuronal competition groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the commands that run experiments.
#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the report bundle.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Use IDX data from this directory (sets the data source).
    #[arg(long)]
    mnist_dir: Option<PathBuf>,
    /// Use this NCGF feature file for training (sets the data source).
    #[arg(long)]
    features: Option<PathBuf>,
    /// NCGF feature file for testing (with --features).
    #[arg(long)]
    features_test: Option<PathBuf>,
    /// Encoding for dense inputs (only "latency").
    #[arg(long)]
    encode: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write a report bundle.
    Train(RunArgs),
    /// K-fold cross-validation.
    Kfold {
        #[command(flatten)]
        run: RunArgs,
        /// Number of folds.
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Exhaustive hyperparameter search on a validation split.
    Gridsearch {
        #[command(flatten)]
        run: RunArgs,
        /// Grid document (TOML arrays keyed by parameter name).
        #[arg(long)]
        grid: PathBuf,
    },
    /// Export a saved model snapshot as a weight CSV.
    ExportWeights {
        /// Model snapshot (models/fold_N.json from a bundle).
        #[arg(long)]
        model: PathBuf,
        /// Destination CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a report bundle: update shares and entropy per class.
    Report {
        /// Bundle directory written by train/kfold.
        #[arg(long)]
        bundle: PathBuf,
    },
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    if let Some(dir) = &args.mnist_dir {
        cfg.data.source = DataSource::Idx;
        cfg.data.mnist_dir = Some(dir.clone());
    }
    if let Some(path) = &args.features {
        cfg.data.source = DataSource::Ncgf;
        cfg.data.features_train = Some(path.clone());
    }
    if let Some(path) = &args.features_test {
        cfg.data.features_test = Some(path.clone());
    }
    if let Some(encoding) = &args.encode {
        cfg.data.encoding = encoding.clone();
    }
    if let Some(seed) = args.seed {
        cfg.training.seed = seed;
    }
    cfg.validate().context("config rejected after applying flag overrides")?;
    Ok(cfg)
}

fn out_dir(args: &RunArgs, cfg: &ExperimentConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.output.as_ref().and_then(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("ncg-out"))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(args) => {
            let cfg = load_config(&args)?;
            let dir = out_dir(&args, &cfg);
            let report = report::run_train(&cfg, &dir, args.threads)?;
            println!("config sha256: {}", report.config_hash);
            for f in &report.folds {
                println!(
                    "fold {}: best epoch {} ({} run), val {:.4}, test {:.4}",
                    f.fold, f.best_epoch, f.epochs_run, f.val_accuracy, f.test_accuracy
                );
            }
            println!("test accuracy: {}", report.accuracy_line());
            println!("bundle written to {}", report.out_dir.display());
        }
        Command::Kfold { run, k } => {
            let cfg = load_config(&run)?;
            let dir = out_dir(&run, &cfg);
            let report = report::run_kfold(&cfg, k, &dir, run.threads)?;
            println!("config sha256: {}", report.config_hash);
            for f in &report.folds {
                println!("fold {}: seed {}, test {:.4}", f.fold, f.seed, f.test_accuracy);
            }
            println!("test accuracy: {}", report.accuracy_line());
            println!("bundle written to {}", report.out_dir.display());
        }
        Command::Gridsearch { run, grid } => {
            let cfg = load_config(&run)?;
            let dir = out_dir(&run, &cfg);
            let space = GridSpace::from_path(&grid)
                .with_context(|| format!("loading grid {}", grid.display()))?;
            let report = report::run_gridsearch(&cfg, &space, &dir, run.threads)?;
            for (rank, settings, acc) in report.rows.iter().take(10) {
                let line = settings
                    .iter()
                    .map(|(n, v)| format!("{n}={v}"))
                    .collect::<Vec<_>>()
                    .join(" ");
                println!("#{rank}: val {acc:.4}  {line}");
            }
            println!("winner written to {}", report.best_config_path.display());
        }
        Command::ExportWeights { model, out } => {
            report::export_weights(&model, &out)?;
            println!("weights written to {}", out.display());
        }
        Command::Report { bundle } => {
            let text = report::summarize_bundle(&bundle)?;
            print!("{text}");
            println!("share and entropy tables written next to the bundle");
        }
    }
    Ok(())
}
