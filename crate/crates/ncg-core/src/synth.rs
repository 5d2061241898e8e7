//! Synthetic multi-modal benchmark: each class is a mixture of well-separated
//! cluster prototypes, latency-encoded. Useful for exercising intra-class
//! competition without external data.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{encode_latency, DenseSample, SpikeDataset};
use crate::error::{Error, Result};
use crate::rng;

const V_MAX: f64 = 255.0;
const ACTIVE_MEAN: f64 = 220.0;
const BACKGROUND_MEAN: f64 = 12.0;

/// Shape of the generated benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub classes: usize,
    pub clusters_per_class: usize,
    pub n_features: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Intensity noise (sigma) around the prototype means.
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_noise() -> f64 {
    18.0
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.clusters_per_class == 0 {
            return Err(Error::parameter("classes and clusters_per_class must be positive"));
        }
        let prototypes = self.classes * self.clusters_per_class;
        if self.n_features < prototypes {
            return Err(Error::Parameter(format!(
                "{} features cannot host {prototypes} prototypes",
                self.n_features
            )));
        }
        if self.train_per_class == 0 || self.test_per_class == 0 {
            return Err(Error::parameter("per-class sample counts must be positive"));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::parameter("noise must be >= 0"));
        }
        Ok(())
    }
}

/// Generate `(train, test)` datasets.
///
/// Each `(class, cluster)` prototype owns a contiguous block of features held
/// near `ACTIVE_MEAN`; everything else sits near `BACKGROUND_MEAN`. Samples
/// draw a cluster uniformly, add Gaussian intensity noise, clamp to
/// `[0, 255]`, then latency-encode.
pub fn generate(spec: &SynthSpec, seed: u64) -> Result<(SpikeDataset, SpikeDataset)> {
    spec.validate()?;
    let train = generate_split(spec, spec.train_per_class, rng::derive_seed(seed, "synth", 0))?;
    let test = generate_split(spec, spec.test_per_class, rng::derive_seed(seed, "synth", 1))?;
    Ok((train, test))
}

fn generate_split(spec: &SynthSpec, per_class: usize, seed: u64) -> Result<SpikeDataset> {
    let prototypes = spec.classes * spec.clusters_per_class;
    let block = spec.n_features / prototypes;
    let mut r = rng::stream(seed, "samples", 0);
    let noise = Normal::new(0.0, spec.noise.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::parameter(e.to_string()))?;

    let mut samples = Vec::with_capacity(per_class * spec.classes);
    for class in 0..spec.classes {
        for _ in 0..per_class {
            let cluster = r.gen_range(0..spec.clusters_per_class);
            let proto = class * spec.clusters_per_class + cluster;
            let lo = proto * block;
            let hi = lo + block;
            let values = (0..spec.n_features)
                .map(|f| {
                    let mean = if (lo..hi).contains(&f) { ACTIVE_MEAN } else { BACKGROUND_MEAN };
                    (mean + noise.sample(&mut r)).clamp(0.0, V_MAX) as f32
                })
                .collect();
            samples.push(DenseSample { values, label: class });
        }
    }
    encode_latency(&samples, V_MAX)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SynthSpec {
        SynthSpec {
            classes: 3,
            clusters_per_class: 3,
            n_features: 64,
            train_per_class: 20,
            test_per_class: 5,
            noise: 18.0,
        }
    }

    #[test]
    fn shapes_and_determinism() {
        let (train, test) = generate(&spec(), 11).unwrap();
        assert_eq!(train.len(), 60);
        assert_eq!(test.len(), 15);
        assert_eq!(train.n_inputs(), 64);
        assert_eq!(train.n_classes(), 3);
        train.validate().unwrap();
        let (train2, _) = generate(&spec(), 11).unwrap();
        assert_eq!(train, train2);
        let (train3, _) = generate(&spec(), 12).unwrap();
        assert_ne!(train, train3);
    }

    #[test]
    fn prototype_blocks_spike_early() {
        let (train, _) = generate(&spec(), 7).unwrap();
        // In every sample some feature spikes in the early part of the window
        // (its prototype block), and background features spike late or never.
        for s in train.iter() {
            let earliest = (0..s.len())
                .filter_map(|i| s.time(i))
                .fold(f64::INFINITY, f64::min);
            assert!(earliest < 0.35, "prototype block missing, earliest {earliest}");
        }
    }

    #[test]
    fn rejects_impossible_shapes() {
        let mut s = spec();
        s.n_features = 5;
        assert!(generate(&s, 0).is_err());
    }
}
