//! Report bundles and the operations behind the CLI commands.
//!
//! A run writes a bundle directory:
//!   summary.txt      human-readable overview (the only file with timestamps)
//!   accuracy.csv     one row per fold
//!   ledger.csv       per-fold, per-epoch, per-neuron update counts
//!   thresholds.csv   per-fold, per-epoch, per-group theta-prime stats
//!   weights.csv      weight matrix of the best fold, one row per neuron
//!   config.lock      canonical config with its content hash
//!   models/          one JSON layer snapshot per fold
//!
//! Reruns with the same config and seed produce byte-identical CSV files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{apply_grid_setting_experiment, ExperimentConfig, GridSpace};
use crate::data::split_validation;
use crate::engine::{ClassificationLayer, LayerSnapshot, NeuronLabel};
use crate::error::{Error, Result};
use crate::rng;
use crate::training::{evaluate, fit, gridsearch, init_layer, kfold_evaluate, FoldOutcome};

/// Run a closure on a dedicated rayon pool when a thread count is given.
pub fn with_thread_pool<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::parameter(e.to_string()))?
            .install(f),
    }
}

/// Per-fold summary row as written to `accuracy.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldRow {
    pub fold: usize,
    pub seed: u64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
}

/// What a train/kfold command produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub config_hash: String,
    pub folds: Vec<FoldRow>,
    pub mean: f64,
    pub std: f64,
}

impl RunReport {
    /// Accuracy summary formatted as `mean +- std %`.
    pub fn accuracy_line(&self) -> String {
        format!("{:.2} +- {:.2} %", self.mean * 100.0, self.std * 100.0)
    }
}

/// Train a single model and write its bundle.
pub fn run_train(cfg: &ExperimentConfig, out_dir: &Path, threads: Option<usize>) -> Result<RunReport> {
    with_thread_pool(threads, || {
        let (train_all, test) = cfg.load_data()?;
        let train_cfg = cfg.train_config(train_all.n_inputs())?;
        let (train, val) = split_validation(
            &train_all,
            cfg.training.validation_fraction,
            rng::derive_seed(train_cfg.seed, "train-val-split", 0),
        )?;
        let mut layer = init_layer(&train_cfg, train_all.n_inputs(), train_all.n_classes())?;
        let mut result = fit(&mut layer, &train, &val, &train_cfg)?;
        result.test_accuracy = Some(evaluate(&layer, &test)?);
        let outcome = FoldOutcome { fold: 0, seed: train_cfg.seed, result };
        write_bundle(out_dir, cfg, std::slice::from_ref(&outcome))
    })
}

/// K-fold cross-validation; the whole bundle carries all folds.
pub fn run_kfold(
    cfg: &ExperimentConfig,
    k: usize,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<RunReport> {
    with_thread_pool(threads, || {
        let (train_all, test) = cfg.load_data()?;
        let train_cfg = cfg.train_config(train_all.n_inputs())?;
        let summary = kfold_evaluate(&train_all, &test, &train_cfg, k)?;
        write_bundle(out_dir, cfg, &summary.folds)
    })
}

/// Gridsearch outcome on disk: the ranked table and the winner config.
#[derive(Debug, Clone)]
pub struct GridReport {
    pub out_dir: PathBuf,
    pub rows: Vec<(usize, Vec<(String, f64)>, f64)>,
    pub best_config_path: PathBuf,
}

/// Enumerate a grid, rank cells by validation accuracy, and emit the winner
/// as a ready-to-run config document.
pub fn run_gridsearch(
    cfg: &ExperimentConfig,
    grid: &GridSpace,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<GridReport> {
    with_thread_pool(threads, || {
        let (train_all, _) = cfg.load_data()?;
        let base = cfg.train_config(train_all.n_inputs())?;
        let outcome = gridsearch(&train_all, &base, grid, cfg.training.validation_fraction)?;

        fs::create_dir_all(out_dir)?;
        let mut w = csv_writer(&out_dir.join("gridsearch.csv"))?;
        w.write_record(["rank", "settings", "val_accuracy", "best_epoch"])
            .map_err(csv_io)?;
        let mut rows = Vec::new();
        for (rank, cell) in outcome.ranked.iter().enumerate() {
            let settings = cell
                .settings
                .iter()
                .map(|(n, v)| format!("{n}={v}"))
                .collect::<Vec<_>>()
                .join(" ");
            w.write_record([
                (rank + 1).to_string(),
                settings,
                cell.val_accuracy.to_string(),
                cell.best_epoch.to_string(),
            ])
            .map_err(csv_io)?;
            rows.push((rank + 1, cell.settings.clone(), cell.val_accuracy));
        }
        w.flush()?;

        let mut best_cfg = cfg.clone();
        for (name, value) in &outcome.ranked[0].settings {
            apply_grid_setting_experiment(&mut best_cfg, name, *value)?;
        }
        best_cfg.validate()?;
        let best_path = out_dir.join("best_config.toml");
        fs::write(&best_path, best_cfg.canonical_toml())?;
        Ok(GridReport { out_dir: out_dir.to_path_buf(), rows, best_config_path: best_path })
    })
}

/// Export a saved model snapshot as a weight CSV: one row per neuron with
/// class, group, label, then all input weights.
pub fn export_weights(model_path: &Path, out_path: &Path) -> Result<()> {
    let layer = load_model(model_path)?;
    write_weights_csv(out_path, &layer)
}

/// Load and validate a model snapshot.
pub fn load_model(path: &Path) -> Result<ClassificationLayer> {
    let bytes = fs::read(path)?;
    let snapshot: LayerSnapshot =
        serde_json::from_slice(&bytes).map_err(|e| Error::format(e.to_string()))?;
    ClassificationLayer::from_snapshot(snapshot)
}

fn csv_io(e: csv::Error) -> Error {
    Error::format(e.to_string())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_writer(fs::File::create(path)?))
}

fn label_str(label: NeuronLabel) -> &'static str {
    match label {
        NeuronLabel::Target => "target",
        NeuronLabel::NonTarget => "non-target",
    }
}

fn write_weights_csv(path: &Path, layer: &ClassificationLayer) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["class".to_string(), "group".to_string(), "label".to_string()];
    header.extend((0..layer.n_inputs()).map(|i| format!("w{i}")));
    w.write_record(&header).map_err(csv_io)?;
    for j in 0..layer.n_neurons() {
        let mut row = vec![
            layer.class_of(j).to_string(),
            layer.group_of(j).to_string(),
            label_str(layer.label_of(j)).to_string(),
        ];
        row.extend(layer.weight_row(j).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn write_bundle(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    outcomes: &[FoldOutcome],
) -> Result<RunReport> {
    fs::create_dir_all(out_dir.join("models"))?;
    let hash = cfg.content_hash();
    fs::write(
        out_dir.join("config.lock"),
        format!("# sha256: {hash}\n{}", cfg.canonical_toml()),
    )?;

    let mut folds = Vec::new();
    for o in outcomes {
        let r = &o.result;
        folds.push(FoldRow {
            fold: o.fold,
            seed: o.seed,
            best_epoch: r.best_epoch,
            epochs_run: r.val_history.len(),
            val_accuracy: r.val_history[r.best_epoch - 1],
            test_accuracy: r.test_accuracy.unwrap_or(f64::NAN),
        });
    }
    if folds.iter().any(|f| !f.test_accuracy.is_finite()) {
        return Err(Error::numeric("missing test accuracy for a fold"));
    }

    let mut w = csv_writer(&out_dir.join("accuracy.csv"))?;
    w.write_record(["fold", "seed", "best_epoch", "epochs_run", "val_accuracy", "test_accuracy"])
        .map_err(csv_io)?;
    for f in &folds {
        w.write_record([
            f.fold.to_string(),
            f.seed.to_string(),
            f.best_epoch.to_string(),
            f.epochs_run.to_string(),
            f.val_accuracy.to_string(),
            f.test_accuracy.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;

    let mut w = csv_writer(&out_dir.join("ledger.csv"))?;
    w.write_record([
        "fold",
        "epoch",
        "neuron",
        "class",
        "group",
        "label",
        "target_updates",
        "non_target_updates",
    ])
    .map_err(csv_io)?;
    for o in outcomes {
        let layer = &o.result.layer;
        let ledger = &o.result.ledger;
        for epoch in 0..ledger.n_epochs() {
            let counts = ledger.epoch(epoch);
            for j in 0..ledger.n_neurons() {
                w.write_record([
                    o.fold.to_string(),
                    (epoch + 1).to_string(),
                    j.to_string(),
                    layer.class_of(j).to_string(),
                    layer.group_of(j).to_string(),
                    label_str(layer.label_of(j)).to_string(),
                    counts.target[j].to_string(),
                    counts.non_target[j].to_string(),
                ])
                .map_err(csv_io)?;
            }
        }
    }
    w.flush()?;

    let mut w = csv_writer(&out_dir.join("thresholds.csv"))?;
    w.write_record([
        "fold",
        "epoch",
        "group",
        "theta_prime_min",
        "theta_prime_max",
        "theta_prime_mean",
    ])
    .map_err(csv_io)?;
    for o in outcomes {
        for (epoch, groups) in o.result.threshold_log.iter().enumerate() {
            for (g, s) in groups.iter().enumerate() {
                w.write_record([
                    o.fold.to_string(),
                    (epoch + 1).to_string(),
                    g.to_string(),
                    s.min.to_string(),
                    s.max.to_string(),
                    s.mean.to_string(),
                ])
                .map_err(csv_io)?;
            }
        }
    }
    w.flush()?;

    for o in outcomes {
        let snapshot = o.result.layer.to_snapshot();
        let json = serde_json::to_vec_pretty(&snapshot)
            .map_err(|e| Error::format(e.to_string()))?;
        fs::write(out_dir.join("models").join(format!("fold_{}.json", o.fold)), json)?;
    }

    // Best fold's weights, ties to the lowest fold index.
    let best = folds
        .iter()
        .max_by(|a, b| {
            a.test_accuracy
                .total_cmp(&b.test_accuracy)
                .then(b.fold.cmp(&a.fold))
        })
        .expect("at least one fold");
    let best_layer = &outcomes.iter().find(|o| o.fold == best.fold).expect("fold").result.layer;
    write_weights_csv(&out_dir.join("weights.csv"), best_layer)?;

    let mean = folds.iter().map(|f| f.test_accuracy).sum::<f64>() / folds.len() as f64;
    let var = folds
        .iter()
        .map(|f| (f.test_accuracy - mean).powi(2))
        .sum::<f64>()
        / folds.len() as f64;
    let report = RunReport {
        out_dir: out_dir.to_path_buf(),
        config_hash: hash,
        folds,
        mean,
        std: var.sqrt(),
    };

    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut text = String::new();
    let _ = writeln!(text, "config sha256: {}", report.config_hash);
    let _ = writeln!(text, "written at: {now} (unix seconds)");
    let _ = writeln!(text, "folds: {}", report.folds.len());
    for f in &report.folds {
        let _ = writeln!(
            text,
            "fold {}: seed {} best_epoch {} epochs_run {} val {:.4} test {:.4}",
            f.fold, f.seed, f.best_epoch, f.epochs_run, f.val_accuracy, f.test_accuracy
        );
    }
    let _ = writeln!(text, "test accuracy: {}", report.accuracy_line());
    fs::write(out_dir.join("summary.txt"), text)?;

    Ok(report)
}

/// Shannon entropy of a count distribution, normalized to `[0, 1]` by the
/// maximum for its support size. Empty or single-bin distributions count as
/// perfectly balanced.
pub fn normalized_entropy(counts: &[u64]) -> f64 {
    if counts.len() <= 1 {
        return 1.0;
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 1.0;
    }
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum();
    h / (counts.len() as f64).ln()
}

/// One `ledger.csv` row.
#[derive(Debug, Clone, PartialEq, Eq, serde::Deserialize)]
pub struct LedgerRow {
    pub fold: usize,
    pub epoch: usize,
    pub neuron: usize,
    pub class: usize,
    pub group: usize,
    pub label: String,
    pub target_updates: u64,
    pub non_target_updates: u64,
}

/// Parse `ledger.csv` contents. An empty table is a format error.
pub fn read_ledger_csv(data: &[u8]) -> Result<Vec<LedgerRow>> {
    let mut rows: Vec<LedgerRow> = Vec::new();
    let mut reader = csv::Reader::from_reader(data);
    for record in reader.deserialize() {
        rows.push(record.map_err(csv_io)?);
    }
    if rows.is_empty() {
        return Err(Error::format("empty bundle: ledger.csv has no rows"));
    }
    Ok(rows)
}

/// Digest a bundle: per-class update shares, target-update entropy, and the
/// accuracy summary. Writes `report_shares.csv` and `report_entropy.csv`
/// next to the bundle and returns the human-readable summary.
pub fn summarize_bundle(bundle_dir: &Path) -> Result<String> {
    let ledger_path = bundle_dir.join("ledger.csv");
    if !ledger_path.exists() {
        return Err(Error::format("not a report bundle: ledger.csv missing"));
    }
    let rows = read_ledger_csv(&fs::read(&ledger_path)?)?;

    // (fold, epoch, class) -> rows, in first-seen order (file order).
    let mut keys: Vec<(usize, usize, usize)> = Vec::new();
    for r in &rows {
        let key = (r.fold, r.epoch, r.class);
        if keys.last() != Some(&key) && !keys.contains(&key) {
            keys.push(key);
        }
    }

    let mut shares = csv_writer(&bundle_dir.join("report_shares.csv"))?;
    shares
        .write_record([
            "fold",
            "epoch",
            "class",
            "neuron",
            "label",
            "target_updates",
            "target_share",
            "non_target_updates",
        ])
        .map_err(csv_io)?;
    let mut entropy = csv_writer(&bundle_dir.join("report_entropy.csv"))?;
    entropy
        .write_record(["fold", "epoch", "class", "normalized_entropy"])
        .map_err(csv_io)?;

    let mut final_entropies: Vec<((usize, usize, usize), f64)> = Vec::new();
    for &(fold, epoch, class) in &keys {
        let members: Vec<&LedgerRow> = rows
            .iter()
            .filter(|r| r.fold == fold && r.epoch == epoch && r.class == class)
            .collect();
        let class_total: u64 = members.iter().map(|r| r.target_updates).sum();
        for r in &members {
            let share = if class_total == 0 {
                0.0
            } else {
                r.target_updates as f64 / class_total as f64
            };
            shares
                .write_record([
                    fold.to_string(),
                    epoch.to_string(),
                    class.to_string(),
                    r.neuron.to_string(),
                    r.label.clone(),
                    r.target_updates.to_string(),
                    share.to_string(),
                    r.non_target_updates.to_string(),
                ])
                .map_err(csv_io)?;
        }
        let target_counts: Vec<u64> = members
            .iter()
            .filter(|r| r.label == "target")
            .map(|r| r.target_updates)
            .collect();
        let h = normalized_entropy(&target_counts);
        entropy
            .write_record([
                fold.to_string(),
                epoch.to_string(),
                class.to_string(),
                h.to_string(),
            ])
            .map_err(csv_io)?;
        final_entropies.push(((fold, epoch, class), h));
    }
    shares.flush()?;
    entropy.flush()?;

    let mut text = String::new();
    let accuracy_path = bundle_dir.join("accuracy.csv");
    if accuracy_path.exists() {
        let mut reader = csv::Reader::from_path(&accuracy_path).map_err(csv_io)?;
        let mut accs = Vec::new();
        for record in reader.records() {
            let record = record.map_err(csv_io)?;
            if let Some(acc) = record.get(5).and_then(|s| s.parse::<f64>().ok()) {
                accs.push(acc);
            }
        }
        if !accs.is_empty() {
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / accs.len() as f64;
            let _ = writeln!(
                text,
                "test accuracy: {:.2} +- {:.2} % over {} fold(s)",
                mean * 100.0,
                var.sqrt() * 100.0,
                accs.len()
            );
        }
    }
    let last_epoch = rows.iter().map(|r| r.epoch).max().unwrap_or(0);
    let last_fold = rows.iter().map(|r| r.fold).min().unwrap_or(0);
    let _ = writeln!(text, "final-epoch target-update entropy (fold {last_fold}):");
    for ((fold, epoch, class), h) in &final_entropies {
        if *epoch == last_epoch && *fold == last_fold {
            let _ = writeln!(text, "  class {class}: {h:.3}");
        }
    }
    Ok(text)
}
