//! Training: per-sample updates, the epoch loop with early stopping,
//! K-fold evaluation, and gridsearch.

mod harness;
mod search;

pub use harness::{evaluate, fit, init_layer, process_sample, SampleOutcome};
pub use search::{gridsearch, kfold_evaluate, FoldOutcome, GridCell, GridOutcome, KfoldSummary};

use serde::{Deserialize, Serialize};

use crate::engine::InhibitionScope;
use crate::error::{Error, Result};
use crate::plasticity::{Rule, RuleConfig};
use crate::regulation::CrMode;

/// Threshold initialization and regulation schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub theta: f64,
    pub eta_th: f64,
    pub beta_th: f64,
    pub mode: CrMode,
}

/// Everything one training run needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub rule: RuleConfig,
    pub threshold: ThresholdConfig,
    pub neurons_per_class: usize,
    pub labeling: bool,
    pub scope: InhibitionScope,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.rule.validate()?;
        if self.neurons_per_class < 1 {
            return Err(Error::parameter("neurons_per_class must be >= 1"));
        }
        if self.labeling && self.neurons_per_class < 2 {
            return Err(Error::parameter("labeling requires neurons_per_class >= 2"));
        }
        if self.max_epochs < 1 {
            return Err(Error::parameter("max_epochs must be >= 1"));
        }
        if self.patience < 1 {
            return Err(Error::parameter("patience must be >= 1"));
        }
        match self.rule.rule {
            Rule::RStdp => {
                if self.scope != InhibitionScope::Global {
                    return Err(Error::parameter("r-stdp requires global inhibition"));
                }
                if self.threshold.mode != CrMode::Off {
                    return Err(Error::parameter("r-stdp is incompatible with competition regulation"));
                }
                if self.labeling {
                    return Err(Error::parameter("neuron labeling applies to sstdp/s2-stdp only"));
                }
            }
            Rule::Sstdp | Rule::S2Stdp => {
                if self.scope == InhibitionScope::Global {
                    return Err(Error::parameter("sstdp/s2-stdp use intra-group or no inhibition"));
                }
            }
        }
        Ok(())
    }
}

/// Per-epoch, per-neuron counts of received weight updates, split by whether
/// the triggering sample belonged to the neuron's class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateLedger {
    n_neurons: usize,
    epochs: Vec<EpochCounts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochCounts {
    pub target: Vec<u64>,
    pub non_target: Vec<u64>,
}

impl UpdateLedger {
    pub fn new(n_neurons: usize) -> Self {
        UpdateLedger { n_neurons, epochs: Vec::new() }
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn n_epochs(&self) -> usize {
        self.epochs.len()
    }

    pub fn start_epoch(&mut self) {
        self.epochs.push(EpochCounts {
            target: vec![0; self.n_neurons],
            non_target: vec![0; self.n_neurons],
        });
    }

    pub fn record(&mut self, neuron: usize, target_sample: bool) {
        let epoch = self.epochs.last_mut().expect("start_epoch before record");
        if target_sample {
            epoch.target[neuron] += 1;
        } else {
            epoch.non_target[neuron] += 1;
        }
    }

    /// Counts for a past epoch (0-based).
    pub fn epoch(&self, e: usize) -> &EpochCounts {
        &self.epochs[e]
    }
}

/// Min/max/mean of the training thresholds across one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupThresholdStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// Outcome of one training run.
#[derive(Debug, Clone)]
pub struct RunResult {
    /// 1-based epoch with the best validation accuracy (earliest on ties).
    pub best_epoch: usize,
    pub val_history: Vec<f64>,
    pub test_accuracy: Option<f64>,
    /// Layer snapshot restored from the best epoch.
    pub layer: crate::engine::ClassificationLayer,
    pub ledger: UpdateLedger,
    /// Per-epoch, per-group theta-prime statistics, sampled before the
    /// epoch-boundary reset.
    pub threshold_log: Vec<Vec<GroupThresholdStats>>,
}
