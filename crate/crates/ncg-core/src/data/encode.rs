//! First-spike latency encoding of dense intensities.

use super::{DenseSample, SpikeDataset, SpikeVector, NO_SPIKE};
use crate::error::{Error, Result};

/// Encode intensities into spike latencies: `t = 1 - v / v_max`.
///
/// Stronger inputs spike earlier; zero-intensity inputs never spike. Class
/// count is taken as `max label + 1`.
pub fn encode_latency(samples: &[DenseSample], v_max: f64) -> Result<SpikeDataset> {
    if !(v_max > 0.0) {
        return Err(Error::parameter(format!("v_max must be > 0, got {v_max}")));
    }
    let n_inputs = samples.first().map_or(0, |s| s.values.len());
    let n_classes = samples.iter().map(|s| s.label + 1).max().unwrap_or(0);
    let mut encoded = Vec::with_capacity(samples.len());
    for (k, s) in samples.iter().enumerate() {
        let mut times = Vec::with_capacity(s.values.len());
        for (i, &v) in s.values.iter().enumerate() {
            let v = v as f64;
            if !(0.0..=v_max).contains(&v) {
                return Err(Error::Parameter(format!(
                    "sample {k} value {v} at input {i} outside [0, {v_max}]"
                )));
            }
            times.push(if v == 0.0 { NO_SPIKE } else { 1.0 - v / v_max });
        }
        encoded.push(SpikeVector::from_raw(times, s.label));
    }
    SpikeDataset::new(encoded, n_inputs, n_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(values: Vec<f32>) -> Vec<DenseSample> {
        vec![DenseSample { values, label: 0 }]
    }

    #[test]
    fn boundary_values() {
        let ds = encode_latency(&one(vec![255.0, 0.0, 127.0]), 255.0).unwrap();
        assert_eq!(ds.sample(0).time(0), Some(0.0));
        assert_eq!(ds.sample(0).time(1), None);
        let t = ds.sample(0).time(2).unwrap();
        assert!((t - (1.0 - 127.0 / 255.0)).abs() < 1e-15);
        assert!((t - 0.501961).abs() < 1e-6);
    }

    #[test]
    fn out_of_range_value_is_an_error() {
        assert!(encode_latency(&one(vec![256.0]), 255.0).is_err());
        assert!(encode_latency(&one(vec![-1.0]), 255.0).is_err());
        assert!(encode_latency(&one(vec![1.0]), 0.0).is_err());
    }

    #[test]
    fn encoding_is_monotone() {
        let ds = encode_latency(&one((1..=255).map(|v| v as f32).collect()), 255.0).unwrap();
        let times: Vec<f64> = (0..255).map(|i| ds.sample(0).time(i).unwrap()).collect();
        for w in times.windows(2) {
            assert!(w[0] > w[1], "higher intensity must spike strictly earlier");
        }
    }
}
