//! K-fold cross-validation and exhaustive gridsearch.

use rayon::prelude::*;

use super::{evaluate, fit, init_layer, RunResult, TrainConfig};
use crate::config::{apply_grid_setting, GridSpace};
use crate::data::{kfold_partition, split_validation, SpikeDataset};
use crate::error::{Error, Result};
use crate::rng;

/// One fold's trained model and scores.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: usize,
    pub seed: u64,
    pub result: RunResult,
}

/// Aggregated K-fold evaluation.
#[derive(Debug, Clone)]
pub struct KfoldSummary {
    pub folds: Vec<FoldOutcome>,
    pub mean: f64,
    /// Population (1-sigma) standard deviation of the fold test accuracies.
    pub std: f64,
}

/// Train K models, each validating on a different stratified fold and seeded
/// independently, then score each on the held-out test set.
pub fn kfold_evaluate(
    train_all: &SpikeDataset,
    test: &SpikeDataset,
    cfg: &TrainConfig,
    k: usize,
) -> Result<KfoldSummary> {
    cfg.validate()?;
    let plan = kfold_partition(train_all, k, cfg.seed)?;
    let mut folds: Vec<FoldOutcome> = (0..k)
        .into_par_iter()
        .map(|fold| -> Result<FoldOutcome> {
            let (train, val) = plan.split(train_all, fold)?;
            let seed = rng::derive_seed(cfg.seed, "fold", fold as u64);
            let fold_cfg = TrainConfig { seed, ..cfg.clone() };
            let mut layer = init_layer(&fold_cfg, train_all.n_inputs(), train_all.n_classes())?;
            let mut result = fit(&mut layer, &train, &val, &fold_cfg)?;
            result.test_accuracy = Some(evaluate(&layer, test)?);
            Ok(FoldOutcome { fold, seed, result })
        })
        .collect::<Result<_>>()?;
    folds.sort_by_key(|f| f.fold);

    let accs: Vec<f64> = folds
        .iter()
        .map(|f| f.result.test_accuracy.expect("test accuracy set above"))
        .collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / accs.len() as f64;
    Ok(KfoldSummary { folds, mean, std: var.sqrt() })
}

/// One evaluated grid cell.
#[derive(Debug, Clone)]
pub struct GridCell {
    /// Deterministic enumeration index.
    pub index: usize,
    pub settings: Vec<(String, f64)>,
    pub val_accuracy: f64,
    pub best_epoch: usize,
}

/// Gridsearch outcome: cells ranked by validation accuracy and the winning
/// configuration, ready to train with.
#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub ranked: Vec<GridCell>,
    pub best: TrainConfig,
}

/// Exhaustively evaluate the Cartesian product of the grid on one shared
/// stratified train/validation split.
///
/// Ties in validation accuracy keep the first cell in enumeration order
/// (parameters sorted by name, values in file order).
pub fn gridsearch(
    train_all: &SpikeDataset,
    base: &TrainConfig,
    space: &GridSpace,
    validation_fraction: f64,
) -> Result<GridOutcome> {
    let combos = space.combinations();
    if combos.is_empty() {
        return Err(Error::parameter("empty grid"));
    }
    let split_seed = rng::derive_seed(base.seed, "grid-split", 0);
    let (train, val) = split_validation(train_all, validation_fraction, split_seed)?;

    let configs: Vec<(usize, Vec<(String, f64)>, TrainConfig)> = combos
        .into_iter()
        .enumerate()
        .map(|(index, settings)| -> Result<_> {
            let mut cfg = base.clone();
            for (name, value) in &settings {
                apply_grid_setting(&mut cfg, name, *value)?;
            }
            cfg.validate()?;
            Ok((index, settings, cfg))
        })
        .collect::<Result<_>>()?;

    let mut cells: Vec<GridCell> = configs
        .par_iter()
        .map(|(index, settings, cfg)| -> Result<GridCell> {
            let mut layer = init_layer(cfg, train_all.n_inputs(), train_all.n_classes())?;
            let result = fit(&mut layer, &train, &val, cfg)?;
            let val_accuracy = result.val_history[result.best_epoch - 1];
            Ok(GridCell {
                index: *index,
                settings: settings.clone(),
                val_accuracy,
                best_epoch: result.best_epoch,
            })
        })
        .collect::<Result<_>>()?;

    cells.sort_by(|a, b| {
        b.val_accuracy
            .total_cmp(&a.val_accuracy)
            .then(a.index.cmp(&b.index))
    });

    let winner = &cells[0];
    let mut best = base.clone();
    for (name, value) in &winner.settings {
        apply_grid_setting(&mut best, name, *value)?;
    }
    Ok(GridOutcome { ranked: cells, best })
}
