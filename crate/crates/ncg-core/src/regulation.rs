//! Competition regulation: two-compartment threshold state.
//!
//! Every neuron carries a fixed test threshold `theta` used for inference and
//! an adaptive training threshold `theta_prime` used only on samples of its
//! own class. Each regulation trigger raises the winner's `theta_prime` and
//! lowers the losers', floored at `theta`; `theta_prime` resets to `theta`
//! between epochs and the regulation rate anneals geometrically.

use serde::{Deserialize, Serialize};

use crate::engine::NeuronLabel;
use crate::error::{Error, Result};

/// Competition-regulation variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrMode {
    /// No regulation; `theta_prime` stays pinned to `theta`.
    Off,
    /// Single-threshold ablation: deltas act on `theta` itself, no floor,
    /// no epoch reset, learned thresholds used at inference.
    SingleThreshold,
    /// Two-compartment regulation on `theta_prime`.
    TwoCompartment,
}

/// Per-neuron threshold pair plus the regulation-rate schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdState {
    theta: Vec<f64>,
    theta_prime: Vec<f64>,
    eta_th: f64,
    beta_th: f64,
    mode: CrMode,
}

impl ThresholdState {
    pub fn new(n: usize, theta0: f64, eta_th: f64, beta_th: f64, mode: CrMode) -> Result<Self> {
        if !(theta0 > 0.0) || !theta0.is_finite() {
            return Err(Error::parameter(format!("theta must be positive, got {theta0}")));
        }
        if !(eta_th >= 0.0) || !eta_th.is_finite() {
            return Err(Error::parameter(format!("eta_th must be >= 0, got {eta_th}")));
        }
        if !(beta_th > 0.0 && beta_th <= 1.0) {
            return Err(Error::parameter(format!("beta_th must be in (0, 1], got {beta_th}")));
        }
        Ok(ThresholdState {
            theta: vec![theta0; n],
            theta_prime: vec![theta0; n],
            eta_th,
            beta_th,
            mode,
        })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn mode(&self) -> CrMode {
        self.mode
    }

    pub fn eta_th(&self) -> f64 {
        self.eta_th
    }

    pub fn theta(&self, j: usize) -> f64 {
        self.theta[j]
    }

    pub fn theta_prime(&self, j: usize) -> f64 {
        self.theta_prime[j]
    }

    pub fn thetas(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_primes(&self) -> &[f64] {
        &self.theta_prime
    }

    /// Apply one regulation trigger over the target neurons of a group.
    ///
    /// `group` holds the target-neuron indices; its length is the effective
    /// group size. The winner gains `eta_th * (M-1)/M`, every other member
    /// loses `eta_th / M`, so the pre-floor deltas sum to exactly zero.
    pub fn regulate(&mut self, group: &[usize], winner: usize) -> Result<()> {
        if !group.contains(&winner) {
            return Err(Error::consistency(format!(
                "regulation winner {winner} not in group {group:?}"
            )));
        }
        if self.mode == CrMode::Off {
            return Ok(());
        }
        let m = group.len() as f64;
        let share = self.eta_th / m;
        for &j in group {
            let delta = if j == winner { share * (m - 1.0) } else { -share };
            match self.mode {
                CrMode::TwoCompartment => {
                    self.theta_prime[j] = self.theta[j].max(self.theta_prime[j] + delta);
                }
                CrMode::SingleThreshold => {
                    // Learned threshold: no floor, mirrored so that both
                    // compartments always agree in this mode.
                    self.theta[j] += delta;
                    self.theta_prime[j] = self.theta[j];
                }
                CrMode::Off => unreachable!(),
            }
        }
        Ok(())
    }

    /// Epoch boundary: reset `theta_prime` to `theta` and anneal the rate.
    pub fn epoch_reset(&mut self) {
        match self.mode {
            CrMode::TwoCompartment => {
                self.theta_prime.copy_from_slice(&self.theta);
                self.eta_th *= self.beta_th;
            }
            CrMode::SingleThreshold => {
                self.eta_th *= self.beta_th;
            }
            CrMode::Off => {}
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.len() != self.theta_prime.len() {
            return Err(Error::consistency("threshold compartments differ in length"));
        }
        for j in 0..self.theta.len() {
            if !self.theta[j].is_finite() || !self.theta_prime[j].is_finite() {
                return Err(Error::numeric(format!("non-finite threshold at neuron {j}")));
            }
            if self.mode == CrMode::TwoCompartment && self.theta_prime[j] < self.theta[j] {
                return Err(Error::Consistency(format!(
                    "theta_prime {} < theta {} at neuron {j}",
                    self.theta_prime[j], self.theta[j]
                )));
            }
        }
        Ok(())
    }
}

/// Whether a training sample triggers competition regulation: only when the
/// winner of the sample-class group is a target neuron.
pub fn regulation_trigger(winner_label: NeuronLabel) -> bool {
    winner_label == NeuronLabel::Target
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(n: usize, eta: f64, beta: f64, mode: CrMode) -> ThresholdState {
        ThresholdState::new(n, 10.0, eta, beta, mode).unwrap()
    }

    #[test]
    fn eq6_deltas() {
        let mut s = state(4, 0.1, 1.0, CrMode::TwoCompartment);
        s.regulate(&[0, 1, 2, 3], 2).unwrap();
        assert!((s.theta_prime(2) - 10.075).abs() < 1e-12);
        // losers are floored at theta
        for j in [0, 1, 3] {
            assert_eq!(s.theta_prime(j), 10.0);
        }
        // off the floor, losers move down by eta/M
        s.regulate(&[0, 1, 2, 3], 2).unwrap();
        s.regulate(&[0, 1, 2, 3], 0).unwrap();
        assert!((s.theta_prime(2) - (10.15 - 0.025)).abs() < 1e-12);
        assert!((s.theta_prime(0) - 10.075).abs() < 1e-12);
    }

    #[test]
    fn floor_at_theta() {
        let mut s = state(2, 0.1, 1.0, CrMode::TwoCompartment);
        s.regulate(&[0, 1], 0).unwrap();
        assert_eq!(s.theta_prime(1), 10.0);
        s.validate().unwrap();
    }

    #[test]
    fn singleton_group_is_a_no_op() {
        let mut s = state(1, 0.1, 1.0, CrMode::TwoCompartment);
        s.regulate(&[0], 0).unwrap();
        assert_eq!(s.theta_prime(0), 10.0);
        assert_eq!(s.theta(0), 10.0);
    }

    #[test]
    fn winner_outside_group_is_rejected() {
        let mut s = state(4, 0.1, 1.0, CrMode::TwoCompartment);
        assert!(s.regulate(&[0, 1], 3).is_err());
    }

    #[test]
    fn pre_floor_delta_sum_is_exactly_zero() {
        // eta*(m-1)/m and (m-1)*(eta/m) are the same rounded product, so the
        // winner gain cancels the total loser loss bit-exactly.
        for m in 2..=7usize {
            for eta in [0.1, 0.317, 1e-3, 123.456] {
                let share = eta / m as f64;
                let winner_delta = share * (m as f64 - 1.0);
                let loser_total = (m as f64 - 1.0) * share;
                assert_eq!(winner_delta - loser_total, 0.0);
            }
        }
    }

    #[test]
    fn epoch_reset_restores_theta_and_anneals() {
        let mut s = state(3, 0.1, 0.5, CrMode::TwoCompartment);
        s.regulate(&[0, 1, 2], 1).unwrap();
        assert!(s.theta_prime(1) > 10.0);
        s.epoch_reset();
        assert_eq!(s.theta_primes(), &[10.0, 10.0, 10.0]);
        s.epoch_reset();
        s.epoch_reset();
        assert!((s.eta_th() - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn identity_annealing_keeps_rate() {
        let mut s = state(2, 0.1, 1.0, CrMode::TwoCompartment);
        for _ in 0..5 {
            s.epoch_reset();
        }
        assert_eq!(s.eta_th(), 0.1);
    }

    #[test]
    fn single_threshold_mode_moves_theta_without_floor_or_reset() {
        let mut s = state(2, 0.1, 1.0, CrMode::SingleThreshold);
        s.regulate(&[0, 1], 0).unwrap();
        assert!((s.theta(0) - 10.05).abs() < 1e-12);
        assert!((s.theta(1) - 9.95).abs() < 1e-12);
        assert_eq!(s.theta(1), s.theta_prime(1));
        s.epoch_reset();
        assert!((s.theta(1) - 9.95).abs() < 1e-12, "no reset in single-threshold mode");
    }

    #[test]
    fn off_mode_never_moves() {
        let mut s = state(2, 0.5, 0.5, CrMode::Off);
        s.regulate(&[0, 1], 0).unwrap();
        s.epoch_reset();
        assert_eq!(s.thetas(), &[10.0, 10.0]);
        assert_eq!(s.theta_primes(), &[10.0, 10.0]);
        assert_eq!(s.eta_th(), 0.5);
    }

    #[test]
    fn trigger_requires_target_winner() {
        assert!(regulation_trigger(NeuronLabel::Target));
        assert!(!regulation_trigger(NeuronLabel::NonTarget));
    }
}
