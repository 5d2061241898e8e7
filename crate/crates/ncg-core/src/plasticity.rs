//! Supervised STDP rules: error computation and the error-modulated
//! additive weight update.
//!
//! All three rules share one update kernel: inputs that spiked at or before
//! the neuron's firing time are potentiated by `e * a_plus`, all other inputs
//! (later spikes or silent inputs) move by `e * a_minus`. R-STDP uses a
//! binary error from a global winner-takes-all; SSTDP and S2-STDP use
//! temporal errors anchored to the mean winner firing time.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::SpikeVector;
use crate::engine::LayerResponse;
use crate::error::{Error, Result};

/// Supervised STDP rule selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    RStdp,
    Sstdp,
    S2Stdp,
}

/// Learning-rule hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleConfig {
    pub rule: Rule,
    /// Potentiation rate, > 0.
    pub a_plus: f64,
    /// Depression rate, < 0.
    pub a_minus: f64,
    /// Desired temporal separation between target and non-target spikes.
    pub gap: f64,
    pub w_min: f64,
    pub w_max: f64,
    /// Rescale each updated row to `norm_target` after clipping.
    pub normalize: bool,
    /// Per-neuron weight-sum target; `None` resolves to the initial mean row
    /// sum at training start.
    pub norm_target: Option<f64>,
    /// Per-sample neuron dropout probability, in `[0, 1)`.
    pub dropout: f64,
    /// R-STDP only: scale updates by the previous epoch's miss/hit rates.
    pub adaptive_lr: bool,
}

impl RuleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_plus > 0.0) {
            return Err(Error::parameter(format!("a_plus must be > 0, got {}", self.a_plus)));
        }
        if !(self.a_minus < 0.0) {
            return Err(Error::parameter(format!("a_minus must be < 0, got {}", self.a_minus)));
        }
        if !(self.gap > 0.0) {
            return Err(Error::parameter(format!("gap must be > 0, got {}", self.gap)));
        }
        if !(self.w_min < self.w_max) {
            return Err(Error::Parameter(format!(
                "w_min {} must be < w_max {}",
                self.w_min, self.w_max
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::parameter(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if let Some(t) = self.norm_target {
            if !t.is_finite() {
                return Err(Error::parameter("norm_target must be finite"));
            }
        }
        if self.adaptive_lr && self.rule != Rule::RStdp {
            return Err(Error::parameter("adaptive_lr applies to r-stdp only"));
        }
        Ok(())
    }
}

/// Error assigned to one neuron for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronError {
    pub neuron: usize,
    /// Time units for SSTDP/S2-STDP; +-1 for R-STDP.
    pub e: f64,
    /// When false, no weight change is applied.
    pub eligible: bool,
}

/// Mean firing time of the per-group winners.
///
/// With one neuron per class this is the plain layer mean used by the
/// original SSTDP/S2-STDP formulations.
pub fn mean_winner_time(response: &LayerResponse) -> f64 {
    let sum: f64 = response.winners.iter().map(|&j| response.firing_times[j]).sum();
    sum / response.winners.len() as f64
}

/// Desired firing timestamp of a target (its class shown) neuron.
fn target_anchor(t_mean: f64, gap: f64, n_classes: usize) -> f64 {
    t_mean - gap * (n_classes as f64 - 1.0) / n_classes as f64
}

/// Desired firing timestamp of a non-target neuron.
fn non_target_anchor(t_mean: f64, gap: f64, n_classes: usize) -> f64 {
    t_mean + gap / n_classes as f64
}

/// SSTDP error: time-range gated. Target neurons update only when firing
/// after their anchor, non-targets only when firing before theirs.
pub fn compute_error_sstdp(
    neuron: usize,
    t_j: f64,
    t_mean: f64,
    gap: f64,
    n_classes: usize,
    is_target: bool,
) -> NeuronError {
    let e = if is_target {
        t_j - t_j.min(target_anchor(t_mean, gap, n_classes))
    } else {
        t_j - t_j.max(non_target_anchor(t_mean, gap, n_classes))
    };
    NeuronError { neuron, e, eligible: e != 0.0 }
}

/// S2-STDP error: distance to the desired timestamp, always applied.
pub fn compute_error_s2stdp(
    neuron: usize,
    t_j: f64,
    t_mean: f64,
    gap: f64,
    n_classes: usize,
    is_target: bool,
) -> NeuronError {
    let anchor = if is_target {
        target_anchor(t_mean, gap, n_classes)
    } else {
        non_target_anchor(t_mean, gap, n_classes)
    };
    NeuronError { neuron, e: t_j - anchor, eligible: true }
}

/// R-STDP error for the global winner: +1 on a hit, -1 on a miss.
pub fn compute_error_rstdp(neuron: usize, winner_class: usize, sample_label: usize) -> NeuronError {
    let e = if winner_class == sample_label { 1.0 } else { -1.0 };
    NeuronError { neuron, e, eligible: true }
}

/// Apply the additive STDP update to one neuron's weight row.
///
/// Clips to `[w_min, w_max]`, then optionally rescales the row sum to
/// `norm_target` and re-clips once.
pub fn apply_stdp_update(
    row: &mut [f64],
    sample: &SpikeVector,
    t_j: f64,
    e: f64,
    config: &RuleConfig,
    norm_target: Option<f64>,
) -> Result<()> {
    if !e.is_finite() {
        return Err(Error::numeric(format!("non-finite error {e}")));
    }
    debug_assert_eq!(row.len(), sample.len());
    let potentiate = e * config.a_plus;
    let depress = e * config.a_minus;
    for (i, w) in row.iter_mut().enumerate() {
        let delta = match sample.time(i) {
            Some(t_i) if t_i <= t_j => potentiate,
            _ => depress,
        };
        *w = (*w + delta).clamp(config.w_min, config.w_max);
    }
    if config.normalize {
        let target = norm_target
            .or(config.norm_target)
            .ok_or_else(|| Error::parameter("normalization enabled without a resolved target"))?;
        let sum: f64 = row.iter().sum();
        if sum > f64::EPSILON {
            let scale = target / sum;
            for w in row.iter_mut() {
                *w = (*w * scale).clamp(config.w_min, config.w_max);
            }
        }
    }
    Ok(())
}

/// Draw a fresh per-neuron dropout mask (`true` = dropped this sample).
pub fn apply_dropout(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Result<Vec<bool>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::parameter(format!("dropout probability must be in [0, 1), got {p}")));
    }
    Ok((0..n).map(|_| rng.gen::<f64>() < p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::T_MAX;
    use crate::rng;

    fn cfg(rule: Rule) -> RuleConfig {
        RuleConfig {
            rule,
            a_plus: 0.1,
            a_minus: -0.1,
            gap: 0.2,
            w_min: 0.0,
            w_max: 1.0,
            normalize: false,
            norm_target: None,
            dropout: 0.0,
            adaptive_lr: false,
        }
    }

    #[test]
    fn winner_mean() {
        let r = LayerResponse {
            firing_times: vec![0.2, 0.9, 0.4, 0.9, 0.6, 0.9],
            fired: vec![true; 6],
            potentials: vec![1.0; 6],
            winners: vec![0, 2, 4],
            inhibited: vec![false; 6],
        };
        assert!((mean_winner_time(&r) - 0.4).abs() < 1e-15);
        let flat = LayerResponse {
            firing_times: vec![0.5, 0.5],
            fired: vec![true; 2],
            potentials: vec![1.0; 2],
            winners: vec![0, 1],
            inhibited: vec![false; 2],
        };
        assert_eq!(mean_winner_time(&flat), 0.5);
    }

    #[test]
    fn sstdp_gating() {
        // C=10, g=0.2, T=0.5: target anchor 0.32, non-target anchor 0.52.
        let e = compute_error_sstdp(0, 0.45, 0.5, 0.2, 10, true);
        assert!((e.e - 0.13).abs() < 1e-12);
        assert!(e.eligible);
        let e = compute_error_sstdp(0, 0.30, 0.5, 0.2, 10, true);
        assert_eq!(e.e, 0.0);
        assert!(!e.eligible);
        let e = compute_error_sstdp(0, 0.40, 0.5, 0.2, 10, false);
        assert!((e.e + 0.12).abs() < 1e-12);
        assert!(e.eligible);
        let e = compute_error_sstdp(0, 0.60, 0.5, 0.2, 10, false);
        assert!(!e.eligible);
    }

    #[test]
    fn s2stdp_always_applies() {
        let e = compute_error_s2stdp(0, 0.32, 0.5, 0.2, 10, true);
        assert!(e.e.abs() < 1e-12);
        assert!(e.eligible);
        let e = compute_error_s2stdp(0, 0.45, 0.5, 0.2, 10, true);
        assert!((e.e - 0.13).abs() < 1e-12);
        let e = compute_error_s2stdp(0, 0.40, 0.5, 0.2, 10, false);
        assert!((e.e + 0.12).abs() < 1e-12);
    }

    #[test]
    fn anchors_are_gap_apart() {
        for c in 2..=100usize {
            for g in [0.05, 0.2, 1.0] {
                let spread = non_target_anchor(0.5, g, c) - target_anchor(0.5, g, c);
                assert!((spread - g).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rstdp_error_sign() {
        assert_eq!(compute_error_rstdp(0, 3, 3).e, 1.0);
        assert_eq!(compute_error_rstdp(0, 3, 7).e, -1.0);
    }

    #[test]
    fn stdp_update_branches() {
        let mut row = vec![0.5, 0.2];
        let s = SpikeVector::new(vec![Some(0.1), None], 0).unwrap();
        apply_stdp_update(&mut row, &s, 0.3, 0.2, &cfg(Rule::S2Stdp), None).unwrap();
        assert!((row[0] - 0.52).abs() < 1e-12);
        assert!((row[1] - 0.18).abs() < 1e-12);
    }

    #[test]
    fn zero_error_leaves_row_unchanged() {
        let mut row = vec![0.5, 0.2];
        let s = SpikeVector::new(vec![Some(0.1), Some(0.9)], 0).unwrap();
        apply_stdp_update(&mut row, &s, 0.3, 0.0, &cfg(Rule::Sstdp), None).unwrap();
        assert_eq!(row, vec![0.5, 0.2]);
    }

    #[test]
    fn late_spikes_take_the_depression_branch() {
        let mut row = vec![0.5, 0.5];
        let s = SpikeVector::new(vec![Some(0.3), Some(0.31)], 0).unwrap();
        apply_stdp_update(&mut row, &s, 0.3, 1.0, &cfg(Rule::S2Stdp), None).unwrap();
        assert!((row[0] - 0.6).abs() < 1e-12, "t_i == t_j potentiates");
        assert!((row[1] - 0.4).abs() < 1e-12, "t_i > t_j depresses");
    }

    #[test]
    fn clipping_saturates() {
        let mut row = vec![0.999];
        let s = SpikeVector::new(vec![Some(0.1)], 0).unwrap();
        apply_stdp_update(&mut row, &s, 0.3, 0.2, &cfg(Rule::S2Stdp), None).unwrap();
        assert_eq!(row[0], 1.0);
        let mut row = vec![0.001];
        let s = SpikeVector::new(vec![None], 0).unwrap();
        apply_stdp_update(&mut row, &s, 0.3, 0.2, &cfg(Rule::S2Stdp), None).unwrap();
        assert_eq!(row[0], 0.0);
    }

    #[test]
    fn non_finite_error_is_rejected() {
        let mut row = vec![0.5];
        let s = SpikeVector::new(vec![Some(0.1)], 0).unwrap();
        assert!(apply_stdp_update(&mut row, &s, 0.3, f64::NAN, &cfg(Rule::S2Stdp), None).is_err());
    }

    #[test]
    fn normalization_restores_row_sum() {
        let mut c = cfg(Rule::S2Stdp);
        c.normalize = true;
        let mut row = vec![0.4, 0.3, 0.3];
        let target: f64 = row.iter().sum();
        let s = SpikeVector::new(vec![Some(0.1), Some(0.2), None], 0).unwrap();
        apply_stdp_update(&mut row, &s, 0.5, 0.3, &c, Some(target)).unwrap();
        let sum: f64 = row.iter().sum();
        assert!((sum - target).abs() / target < 1e-9);
    }

    #[test]
    fn surrogate_time_updates_silent_neuron_toward_firing() {
        // A neuron that never fired (t_j = T_MAX): every spiking input is
        // "before" it, so positive error potentiates all contributing inputs.
        let mut row = vec![0.5, 0.5];
        let s = SpikeVector::new(vec![Some(0.7), None], 0).unwrap();
        apply_stdp_update(&mut row, &s, T_MAX, 0.4, &cfg(Rule::S2Stdp), None).unwrap();
        assert!(row[0] > 0.5 && row[1] < 0.5);
    }

    #[test]
    fn dropout_mask_statistics() {
        let mut r = rng::stream(1, "dropout-test", 0);
        assert!(apply_dropout(10, 0.0, &mut r).unwrap().iter().all(|&d| !d));
        let mask = apply_dropout(1_000_000, 0.5, &mut r).unwrap();
        let active = mask.iter().filter(|&&d| !d).count() as f64 / 1e6;
        assert!((active - 0.5).abs() < 2e-3, "active fraction {active}");
        assert!(apply_dropout(10, 1.0, &mut r).is_err());
        assert!(apply_dropout(10, -0.1, &mut r).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(cfg(Rule::S2Stdp).validate().is_ok());
        let mut bad = cfg(Rule::S2Stdp);
        bad.a_plus = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = cfg(Rule::S2Stdp);
        bad.a_minus = 0.1;
        assert!(bad.validate().is_err());
        let mut bad = cfg(Rule::S2Stdp);
        bad.gap = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = cfg(Rule::S2Stdp);
        bad.adaptive_lr = true;
        assert!(bad.validate().is_err());
        let mut ok = cfg(Rule::RStdp);
        ok.adaptive_lr = true;
        assert!(ok.validate().is_ok());
    }
}
