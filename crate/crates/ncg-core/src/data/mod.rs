//! Datasets: dense intensity samples, spike-encoded samples, and partitioning.
//!
//! All spike timestamps live in the normalized window `[0, T_MAX]`. An input
//! that never spikes is represented internally by an infinite sentinel and
//! exposed as `None`.

mod encode;
mod idx;
mod ncgf;
mod split;

pub use encode::encode_latency;
pub use idx::{load_idx, parse_idx_images, parse_idx_labels};
pub use ncgf::{encode_features, load_features, parse_features, write_features};
pub use split::{kfold_partition, split_validation, stratified_take, FoldPlan};

use crate::error::{Error, Result};

/// End of the simulation window; also the surrogate firing time of neurons
/// that never fire.
pub const T_MAX: f64 = 1.0;

/// Internal "never spikes" sentinel. Never observable through the public API.
pub(crate) const NO_SPIKE: f64 = f64::INFINITY;

/// One sample of raw intensities (pixels in `[0, 255]` or features in `[0, 1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSample {
    pub values: Vec<f32>,
    pub label: usize,
}

/// One sample as input-spike timestamps: at most one spike per input neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeVector {
    times: Vec<f64>,
    label: usize,
}

impl SpikeVector {
    /// Build from optional timestamps. Present timestamps must lie in `[0, T_MAX]`.
    pub fn new(times: Vec<Option<f64>>, label: usize) -> Result<Self> {
        let times: Vec<f64> = times.into_iter().map(|t| t.unwrap_or(NO_SPIKE)).collect();
        let sv = SpikeVector { times, label };
        sv.validate()?;
        Ok(sv)
    }

    /// Internal constructor over the sentinel representation.
    pub(crate) fn from_raw(times: Vec<f64>, label: usize) -> Self {
        SpikeVector { times, label }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn label(&self) -> usize {
        self.label
    }

    /// Spike time of input `i`, or `None` if that input never spikes.
    pub fn time(&self, i: usize) -> Option<f64> {
        let t = self.times[i];
        (t != NO_SPIKE).then_some(t)
    }

    /// Iterator over `(input index, spike time)` for present spikes only.
    pub fn spikes(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.times
            .iter()
            .enumerate()
            .filter(|(_, &t)| t != NO_SPIKE)
            .map(|(i, &t)| (i, t))
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &t) in self.times.iter().enumerate() {
            if t == NO_SPIKE {
                continue;
            }
            if !t.is_finite() || !(0.0..=T_MAX).contains(&t) {
                return Err(Error::Consistency(format!(
                    "spike time {t} at input {i} outside [0, {T_MAX}]"
                )));
            }
        }
        Ok(())
    }
}

/// An immutable collection of spike vectors with a fixed input width and
/// class count. Safe to share read-only across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeDataset {
    samples: Vec<SpikeVector>,
    n_inputs: usize,
    n_classes: usize,
}

impl SpikeDataset {
    pub fn new(samples: Vec<SpikeVector>, n_inputs: usize, n_classes: usize) -> Result<Self> {
        let ds = SpikeDataset { samples, n_inputs, n_classes };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn sample(&self, i: usize) -> &SpikeVector {
        &self.samples[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SpikeVector> {
        self.samples.iter()
    }

    /// New dataset containing clones of the selected samples, in index order.
    pub fn subset(&self, indices: &[usize]) -> SpikeDataset {
        SpikeDataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            n_inputs: self.n_inputs,
            n_classes: self.n_classes,
        }
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for s in &self.samples {
            counts[s.label()] += 1;
        }
        counts
    }

    pub fn validate(&self) -> Result<()> {
        for (k, s) in self.samples.iter().enumerate() {
            if s.len() != self.n_inputs {
                return Err(Error::Consistency(format!(
                    "sample {k} has {} inputs, dataset declares {}",
                    s.len(),
                    self.n_inputs
                )));
            }
            if s.label() >= self.n_classes {
                return Err(Error::Consistency(format!(
                    "sample {k} label {} >= n_classes {}",
                    s.label(),
                    self.n_classes
                )));
            }
            s.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spike_vector_rejects_out_of_window_times() {
        assert!(SpikeVector::new(vec![Some(0.5), None], 0).is_ok());
        assert!(SpikeVector::new(vec![Some(1.5)], 0).is_err());
        assert!(SpikeVector::new(vec![Some(-0.1)], 0).is_err());
        assert!(SpikeVector::new(vec![Some(f64::NAN)], 0).is_err());
    }

    #[test]
    fn dataset_checks_widths_and_labels() {
        let a = SpikeVector::new(vec![Some(0.1), None], 0).unwrap();
        let b = SpikeVector::new(vec![Some(0.2)], 1).unwrap();
        assert!(SpikeDataset::new(vec![a.clone()], 2, 1).is_ok());
        assert!(SpikeDataset::new(vec![a.clone(), b], 2, 2).is_err());
        assert!(SpikeDataset::new(vec![a], 2, 0).is_err());
    }
}
