//! The per-sample training step and the epoch loop.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{GroupThresholdStats, RunResult, TrainConfig, UpdateLedger};
use crate::data::SpikeDataset;
use crate::data::SpikeVector;
use crate::engine::{
    integrate_sample, predict, ClassificationLayer, NeuronLabel, Phase,
};
use crate::error::{Error, Result};
use crate::plasticity::{
    apply_dropout, apply_stdp_update, compute_error_rstdp, compute_error_s2stdp,
    compute_error_sstdp, mean_winner_time, Rule,
};
use crate::regulation::{regulation_trigger, CrMode};
use crate::rng;

/// What one training sample did to the layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    /// `(neuron, sample_of_its_class)` for every weight update applied.
    pub updates: Vec<(usize, bool)>,
    /// Whether competition regulation fired on the sample-class group.
    pub regulated: bool,
    /// R-STDP only: whether the global winner matched the label.
    pub rstdp_hit: Option<bool>,
}

/// Build a randomly initialized layer matching a train configuration.
pub fn init_layer(
    cfg: &TrainConfig,
    n_inputs: usize,
    n_classes: usize,
) -> Result<ClassificationLayer> {
    ClassificationLayer::init_random(
        n_inputs,
        n_classes,
        cfg.neurons_per_class,
        cfg.labeling,
        cfg.rule.w_min,
        cfg.rule.w_max,
        cfg.threshold.theta,
        cfg.threshold.eta_th,
        cfg.threshold.beta_th,
        cfg.threshold.mode,
        rng::derive_seed(cfg.seed, "init", 0),
    )
}

/// Run one training sample through the layer and apply the configured rule.
///
/// SSTDP/S2-STDP update every eligible group winner (one update per group);
/// R-STDP updates only the layer-wide winner. A winner of the sample-class
/// group that is target-labeled and actually updated triggers competition
/// regulation across the group's target neurons. `lr_scales` are the
/// `(reward, punish)` multipliers for R-STDP adaptive learning rates.
pub fn process_sample(
    layer: &mut ClassificationLayer,
    sample: &SpikeVector,
    cfg: &TrainConfig,
    norm_target: Option<f64>,
    lr_scales: (f64, f64),
    dropout_rng: &mut ChaCha8Rng,
) -> Result<SampleOutcome> {
    let label = sample.label();
    let thresholds = layer.select_thresholds(Some(label), Phase::Train)?;
    let mask = if cfg.rule.dropout > 0.0 {
        Some(apply_dropout(layer.n_neurons(), cfg.rule.dropout, dropout_rng)?)
    } else {
        None
    };
    let response = integrate_sample(layer, sample, cfg.scope, &thresholds, mask.as_deref())?;
    let dropped = |j: usize| mask.as_ref().is_some_and(|m| m[j]);

    let mut updates = Vec::new();
    let mut rstdp_hit = None;
    match cfg.rule.rule {
        Rule::RStdp => {
            let j = response.layer_winner();
            if !dropped(j) {
                let err = compute_error_rstdp(j, layer.class_of(j), label);
                let hit = err.e > 0.0;
                let scale = if hit { lr_scales.0 } else { lr_scales.1 };
                let t_j = response.firing_times[j];
                apply_stdp_update(
                    layer.weight_row_mut(j),
                    sample,
                    t_j,
                    err.e * scale,
                    &cfg.rule,
                    norm_target,
                )?;
                updates.push((j, layer.class_of(j) == label));
                rstdp_hit = Some(hit);
            }
        }
        Rule::Sstdp | Rule::S2Stdp => {
            let t_mean = mean_winner_time(&response);
            let n_classes = layer.n_classes();
            for g in 0..layer.n_groups() {
                let j = response.winners[g];
                if dropped(j) {
                    continue;
                }
                // A non-target-labeled winner always takes the non-target
                // branch, even on samples of its own class.
                let is_target =
                    layer.class_of(j) == label && layer.label_of(j) == NeuronLabel::Target;
                let t_j = response.firing_times[j];
                let err = match cfg.rule.rule {
                    Rule::Sstdp => {
                        compute_error_sstdp(j, t_j, t_mean, cfg.rule.gap, n_classes, is_target)
                    }
                    Rule::S2Stdp => {
                        compute_error_s2stdp(j, t_j, t_mean, cfg.rule.gap, n_classes, is_target)
                    }
                    Rule::RStdp => unreachable!(),
                };
                if err.eligible {
                    apply_stdp_update(
                        layer.weight_row_mut(j),
                        sample,
                        t_j,
                        err.e,
                        &cfg.rule,
                        norm_target,
                    )?;
                    updates.push((j, layer.class_of(j) == label));
                }
            }
        }
    }

    let mut regulated = false;
    if cfg.threshold.mode != CrMode::Off && cfg.rule.rule != Rule::RStdp {
        let g = layer.group_of_class(label);
        let winner = response.winners[g];
        if regulation_trigger(layer.label_of(winner)) && updates.iter().any(|&(j, _)| j == winner)
        {
            let targets = layer.target_members(g);
            layer.thresholds_mut().regulate(&targets, winner)?;
            regulated = true;
        }
    }

    Ok(SampleOutcome { updates, regulated, rstdp_hit })
}

fn group_threshold_stats(layer: &ClassificationLayer) -> Vec<GroupThresholdStats> {
    (0..layer.n_groups())
        .map(|g| {
            let members = layer.group_members(g);
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            let mut sum = 0.0;
            for &j in members {
                let tp = layer.thresholds().theta_prime(j);
                min = min.min(tp);
                max = max.max(tp);
                sum += tp;
            }
            GroupThresholdStats { min, max, mean: sum / members.len() as f64 }
        })
        .collect()
}

/// Train with early stopping and restore the best-validation snapshot.
///
/// Each epoch reshuffles the training set with a per-epoch derived seed,
/// processes every sample, logs threshold statistics, resets and anneals the
/// thresholds, then scores the validation set with test thresholds. Training
/// stops after `patience` epochs without improvement or at `max_epochs`.
pub fn fit(
    layer: &mut ClassificationLayer,
    train: &SpikeDataset,
    val: &SpikeDataset,
    cfg: &TrainConfig,
) -> Result<RunResult> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::parameter("train and validation sets must be non-empty"));
    }
    if train.n_inputs() != layer.n_inputs() || train.n_classes() != layer.n_classes() {
        return Err(Error::consistency("dataset does not match layer dimensions"));
    }
    let norm_target = cfg
        .rule
        .normalize
        .then(|| cfg.rule.norm_target.unwrap_or_else(|| layer.mean_row_sum()));

    let mut ledger = UpdateLedger::new(layer.n_neurons());
    let mut threshold_log = Vec::new();
    let mut val_history = Vec::new();
    let mut best: Option<(usize, f64, ClassificationLayer)> = None;
    let mut since_best = 0usize;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut prev_hit_rate: Option<f64> = None;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng::stream(cfg.seed, "shuffle", epoch as u64));
        let mut dropout_rng = rng::stream(cfg.seed, "dropout", epoch as u64);
        let lr_scales = match (cfg.rule.adaptive_lr, prev_hit_rate) {
            (true, Some(hit)) => (1.0 - hit, hit),
            _ => (1.0, 1.0),
        };

        ledger.start_epoch();
        let mut hits = 0u64;
        let mut measured = 0u64;
        for &idx in &order {
            let outcome = process_sample(
                layer,
                train.sample(idx),
                cfg,
                norm_target,
                lr_scales,
                &mut dropout_rng,
            )?;
            for &(j, target_sample) in &outcome.updates {
                ledger.record(j, target_sample);
            }
            if let Some(hit) = outcome.rstdp_hit {
                measured += 1;
                hits += hit as u64;
            }
        }
        if measured > 0 {
            prev_hit_rate = Some(hits as f64 / measured as f64);
        }

        threshold_log.push(group_threshold_stats(layer));
        layer.thresholds_mut().epoch_reset();

        let acc = evaluate(layer, val)?;
        val_history.push(acc);
        if best.as_ref().is_none_or(|(_, b, _)| acc > *b) {
            best = Some((epoch, acc, layer.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }

    let (best_epoch, _, best_layer) = best.expect("at least one epoch ran");
    *layer = best_layer.clone();
    Ok(RunResult {
        best_epoch,
        val_history,
        test_accuracy: None,
        layer: best_layer,
        ledger,
        threshold_log,
    })
}

/// Fraction of samples whose first-spike prediction matches the label.
///
/// Inference only: test thresholds, no dropout, no state mutation.
pub fn evaluate(layer: &ClassificationLayer, dataset: &SpikeDataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::parameter("cannot evaluate an empty dataset"));
    }
    let thresholds = layer.select_thresholds(None, Phase::Test)?;
    let scope = crate::engine::InhibitionScope::IntraGroup;
    let correct = (0..dataset.len())
        .into_par_iter()
        .map(|i| -> Result<u64> {
            let sample = dataset.sample(i);
            let response = integrate_sample(layer, sample, scope, &thresholds, None)?;
            Ok((predict(&response, layer) == sample.label()) as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(correct as f64 / dataset.len() as f64)
}
