//! The single-spike integrate-and-fire classification layer.
//!
//! A layer holds `N = C * M` output neurons, each fully connected to the
//! inputs. Neurons of one class form a competition group; within a group an
//! optional non-target neuron specializes on samples of other classes.

mod sim;

pub use sim::{integrate_sample, Phase};

use rand::distributions::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regulation::{CrMode, ThresholdState};
use crate::rng;

/// Lateral-inhibition scope of a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InhibitionScope {
    /// The first spike within a group suppresses only that group.
    IntraGroup,
    /// The first spike in the layer suppresses every other neuron.
    Global,
    /// No lateral inhibition.
    None,
}

/// Within-group role of a neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeuronLabel {
    Target,
    NonTarget,
}

/// Fully-connected classification layer with per-class competition groups.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationLayer {
    /// Neuron-major weights: `weights[j * n_inputs + i]`.
    weights: Vec<f64>,
    n_inputs: usize,
    n_classes: usize,
    per_class: usize,
    class_map: Vec<usize>,
    group_map: Vec<usize>,
    neuron_labels: Vec<NeuronLabel>,
    thresholds: ThresholdState,
    /// Cache: members of each group, ascending neuron index.
    group_members: Vec<Vec<usize>>,
    /// Cache: group index of each class.
    class_group: Vec<usize>,
}

/// Plain serializable form of a trained layer (the `model.json` schema).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSnapshot {
    pub n_inputs: usize,
    pub n_classes: usize,
    pub per_class: usize,
    pub class_map: Vec<usize>,
    pub group_map: Vec<usize>,
    pub neuron_labels: Vec<NeuronLabel>,
    pub thresholds: ThresholdState,
    pub weights: Vec<f64>,
}

impl ClassificationLayer {
    /// Build a layer with uniformly drawn weights in `[w_min, w_max]`.
    ///
    /// Groups are laid out contiguously: group `g` covers neurons
    /// `g*M ..= g*M+M-1` and is mapped to class `g`. With `labeling`, the
    /// last neuron of each group is the non-target one.
    #[allow(clippy::too_many_arguments)]
    pub fn init_random(
        n_inputs: usize,
        n_classes: usize,
        per_class: usize,
        labeling: bool,
        w_min: f64,
        w_max: f64,
        theta0: f64,
        eta_th: f64,
        beta_th: f64,
        cr_mode: CrMode,
        seed: u64,
    ) -> Result<Self> {
        if n_inputs == 0 || n_classes == 0 || per_class == 0 {
            return Err(Error::parameter("layer dimensions must be positive"));
        }
        if labeling && per_class < 2 {
            return Err(Error::parameter("labeling requires at least 2 neurons per class"));
        }
        if !(w_min < w_max) {
            return Err(Error::parameter(format!("w_min {w_min} must be < w_max {w_max}")));
        }
        let n = n_classes * per_class;
        let mut r = rng::stream(seed, "weights", 0);
        let dist = Uniform::new_inclusive(w_min, w_max);
        let weights: Vec<f64> = (0..n * n_inputs).map(|_| dist.sample(&mut r)).collect();
        let class_map: Vec<usize> = (0..n).map(|j| j / per_class).collect();
        let group_map = class_map.clone();
        let neuron_labels: Vec<NeuronLabel> = (0..n)
            .map(|j| {
                if labeling && j % per_class == per_class - 1 {
                    NeuronLabel::NonTarget
                } else {
                    NeuronLabel::Target
                }
            })
            .collect();
        let thresholds = ThresholdState::new(n, theta0, eta_th, beta_th, cr_mode)?;
        Self::assemble(
            weights,
            n_inputs,
            n_classes,
            per_class,
            class_map,
            group_map,
            neuron_labels,
            thresholds,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        weights: Vec<f64>,
        n_inputs: usize,
        n_classes: usize,
        per_class: usize,
        class_map: Vec<usize>,
        group_map: Vec<usize>,
        neuron_labels: Vec<NeuronLabel>,
        thresholds: ThresholdState,
    ) -> Result<Self> {
        let n = class_map.len();
        if n == 0 || n_inputs == 0 || per_class == 0 {
            return Err(Error::consistency("layer dimensions must be positive"));
        }
        let expected_weights = n.checked_mul(n_inputs).ok_or_else(|| Error::consistency("layer size overflow"))?;
        if n != n_classes.checked_mul(per_class).unwrap_or(usize::MAX)
            || weights.len() != expected_weights
            || group_map.len() != n
            || neuron_labels.len() != n
            || thresholds.len() != n
        {
            return Err(Error::consistency("layer field lengths disagree"));
        }
        if let Some(&c) = class_map.iter().find(|&&c| c >= n_classes) {
            return Err(Error::consistency(format!("class index {c} out of range")));
        }
        let n_groups = n_classes;
        let mut group_members = vec![Vec::new(); n_groups];
        for (j, &g) in group_map.iter().enumerate() {
            if g >= n_groups {
                return Err(Error::consistency(format!("neuron {j} group {g} out of range")));
            }
            group_members[g].push(j);
        }
        let mut class_group = vec![usize::MAX; n_classes];
        for (g, members) in group_members.iter().enumerate() {
            if members.len() != per_class {
                return Err(Error::Consistency(format!(
                    "group {g} has {} neurons, expected {per_class}",
                    members.len()
                )));
            }
            let class = class_map[members[0]];
            if members.iter().any(|&j| class_map[j] != class) {
                return Err(Error::consistency(format!("group {g} mixes classes")));
            }
            if class_group[class] != usize::MAX {
                return Err(Error::consistency(format!("class {class} mapped to two groups")));
            }
            class_group[class] = g;
            let non_targets = members
                .iter()
                .filter(|&&j| neuron_labels[j] == NeuronLabel::NonTarget)
                .count();
            if non_targets > 1 {
                return Err(Error::consistency(format!("group {g} has {non_targets} non-target neurons")));
            }
            if non_targets == members.len() {
                return Err(Error::consistency(format!("group {g} has no target neuron")));
            }
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::numeric("non-finite weight"));
        }
        thresholds.validate()?;
        Ok(ClassificationLayer {
            weights,
            n_inputs,
            n_classes,
            per_class,
            class_map,
            group_map,
            neuron_labels,
            thresholds,
            group_members,
            class_group,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn per_class(&self) -> usize {
        self.per_class
    }

    pub fn n_neurons(&self) -> usize {
        self.class_map.len()
    }

    pub fn n_groups(&self) -> usize {
        self.group_members.len()
    }

    #[inline]
    pub fn weight(&self, input: usize, neuron: usize) -> f64 {
        self.weights[neuron * self.n_inputs + input]
    }

    pub fn weight_row(&self, neuron: usize) -> &[f64] {
        &self.weights[neuron * self.n_inputs..(neuron + 1) * self.n_inputs]
    }

    pub fn weight_row_mut(&mut self, neuron: usize) -> &mut [f64] {
        &mut self.weights[neuron * self.n_inputs..(neuron + 1) * self.n_inputs]
    }

    pub fn class_of(&self, neuron: usize) -> usize {
        self.class_map[neuron]
    }

    pub fn group_of(&self, neuron: usize) -> usize {
        self.group_map[neuron]
    }

    pub fn label_of(&self, neuron: usize) -> NeuronLabel {
        self.neuron_labels[neuron]
    }

    pub fn group_members(&self, group: usize) -> &[usize] {
        &self.group_members[group]
    }

    /// The group mapped to a class.
    pub fn group_of_class(&self, class: usize) -> usize {
        self.class_group[class]
    }

    /// Target-labeled members of a group, ascending index.
    pub fn target_members(&self, group: usize) -> Vec<usize> {
        self.group_members[group]
            .iter()
            .copied()
            .filter(|&j| self.neuron_labels[j] == NeuronLabel::Target)
            .collect()
    }

    pub fn thresholds(&self) -> &ThresholdState {
        &self.thresholds
    }

    pub fn thresholds_mut(&mut self) -> &mut ThresholdState {
        &mut self.thresholds
    }

    /// Mean over neurons of the per-row weight sum.
    pub fn mean_row_sum(&self) -> f64 {
        let n = self.n_neurons();
        (0..n).map(|j| self.weight_row(j).iter().sum::<f64>()).sum::<f64>() / n as f64
    }

    pub fn to_snapshot(&self) -> LayerSnapshot {
        LayerSnapshot {
            n_inputs: self.n_inputs,
            n_classes: self.n_classes,
            per_class: self.per_class,
            class_map: self.class_map.clone(),
            group_map: self.group_map.clone(),
            neuron_labels: self.neuron_labels.clone(),
            thresholds: self.thresholds.clone(),
            weights: self.weights.clone(),
        }
    }

    pub fn from_snapshot(snap: LayerSnapshot) -> Result<Self> {
        Self::assemble(
            snap.weights,
            snap.n_inputs,
            snap.n_classes,
            snap.per_class,
            snap.class_map,
            snap.group_map,
            snap.neuron_labels,
            snap.thresholds,
        )
    }
}

/// Per-sample result of a forward pass.
///
/// Neurons that never fire carry the surrogate time `T_MAX` with
/// `fired = false`; their final potential serves as the tie-breaker.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerResponse {
    pub firing_times: Vec<f64>,
    pub fired: Vec<bool>,
    pub potentials: Vec<f64>,
    /// Winning neuron of each group.
    pub winners: Vec<usize>,
    pub inhibited: Vec<bool>,
}

impl LayerResponse {
    /// The layer-wide winner: earliest firer, then actual firing beats the
    /// surrogate, then highest potential, then lowest index.
    pub fn layer_winner(&self) -> usize {
        *self
            .winners
            .iter()
            .min_by(|&&a, &&b| {
                self.firing_times[a]
                    .total_cmp(&self.firing_times[b])
                    .then(self.fired[b].cmp(&self.fired[a]))
                    .then(self.potentials[b].total_cmp(&self.potentials[a]))
                    .then(a.cmp(&b))
            })
            .expect("response has at least one group")
    }
}

/// First-spike prediction: the class of the earliest-firing neuron, ties
/// broken by highest membrane potential, then lowest index. Reads only
/// firing times, potentials, and the class map.
pub fn predict(response: &LayerResponse, layer: &ClassificationLayer) -> usize {
    let j = (0..layer.n_neurons())
        .min_by(|&a, &b| {
            response.firing_times[a]
                .total_cmp(&response.firing_times[b])
                .then(response.potentials[b].total_cmp(&response.potentials[a]))
                .then(a.cmp(&b))
        })
        .expect("layer has at least one neuron");
    layer.class_of(j)
}
