//! Event-driven forward pass.
//!
//! Input spikes are processed in ascending time order; spikes sharing a
//! timestamp are applied as one batch before any firing check, so results do
//! not depend on input index order at equal times. A neuron fires at the
//! first event time where its potential reaches its effective threshold,
//! fires at most once, and stops integrating once it fires, is inhibited, or
//! is dropped out.

use super::{ClassificationLayer, InhibitionScope, LayerResponse, NeuronLabel};
use crate::data::{SpikeVector, T_MAX};
use crate::error::{Error, Result};

/// Whether thresholds are selected for training or inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Test,
}

impl ClassificationLayer {
    /// Effective per-neuron thresholds for one sample presentation.
    ///
    /// Test phase: every neuron uses its fixed `theta`. Train phase: target
    /// neurons of the group mapped to the sample's class switch to their
    /// adaptive `theta_prime`; everyone else keeps `theta`.
    pub fn select_thresholds(&self, sample_label: Option<usize>, phase: Phase) -> Result<Vec<f64>> {
        let th = self.thresholds();
        match phase {
            Phase::Test => Ok(th.thetas().to_vec()),
            Phase::Train => {
                let label = sample_label
                    .ok_or_else(|| Error::parameter("train phase requires a sample label"))?;
                if label >= self.n_classes() {
                    return Err(Error::parameter(format!("label {label} out of range")));
                }
                let own_group = self.group_of_class(label);
                Ok((0..self.n_neurons())
                    .map(|j| {
                        if self.group_of(j) == own_group && self.label_of(j) == NeuronLabel::Target {
                            th.theta_prime(j)
                        } else {
                            th.theta(j)
                        }
                    })
                    .collect())
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Active,
    Fired,
    Suppressed,
    Dropped,
}

/// Simulate one sample through the layer.
///
/// `thresholds` are the effective thresholds from [`ClassificationLayer::select_thresholds`];
/// `dropped`, when present, marks neurons excluded from this presentation.
pub fn integrate_sample(
    layer: &ClassificationLayer,
    sample: &SpikeVector,
    scope: InhibitionScope,
    thresholds: &[f64],
    dropped: Option<&[bool]>,
) -> Result<LayerResponse> {
    let n = layer.n_neurons();
    if sample.len() != layer.n_inputs() {
        return Err(Error::Consistency(format!(
            "sample has {} inputs, layer expects {}",
            sample.len(),
            layer.n_inputs()
        )));
    }
    if thresholds.len() != n {
        return Err(Error::consistency("threshold vector length mismatch"));
    }
    if let Some(&bad) = thresholds.iter().find(|&&t| !(t > 0.0)) {
        return Err(Error::parameter(format!("effective threshold {bad} must be positive")));
    }
    if let Some(d) = dropped {
        if d.len() != n {
            return Err(Error::consistency("dropout mask length mismatch"));
        }
    }

    let mut status = vec![Status::Active; n];
    let mut potentials = vec![0.0f64; n];
    let mut firing_times = vec![T_MAX; n];
    let mut fired = vec![false; n];
    let mut inhibited = vec![false; n];
    if let Some(d) = dropped {
        for (j, &out) in d.iter().enumerate() {
            if out {
                status[j] = Status::Dropped;
            }
        }
    }
    let mut active = status.iter().filter(|&&s| s == Status::Active).count();

    let n_groups = layer.n_groups();
    let mut group_winner: Vec<Option<usize>> = vec![None; n_groups];

    let mut events: Vec<(f64, u32)> = sample.spikes().map(|(i, t)| (t, i as u32)).collect();
    events.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    let mut crossers: Vec<usize> = Vec::new();
    let mut k = 0;
    'events: while k < events.len() && active > 0 {
        let t = events[k].0;
        let mut end = k + 1;
        while end < events.len() && events[end].0 == t {
            end += 1;
        }
        for &(_, i) in &events[k..end] {
            let i = i as usize;
            for (j, s) in status.iter().enumerate() {
                if *s == Status::Active {
                    potentials[j] += layer.weight(i, j);
                }
            }
        }
        k = end;

        crossers.clear();
        for j in 0..n {
            if status[j] == Status::Active && potentials[j] >= thresholds[j] {
                crossers.push(j);
            }
        }
        if crossers.is_empty() {
            continue;
        }

        // Every neuron crossing at this event actually emits its spike;
        // inhibition only suppresses strictly later firing.
        for &j in &crossers {
            status[j] = Status::Fired;
            fired[j] = true;
            firing_times[j] = t;
            active -= 1;
        }

        // Resolve first-firing winners for the groups touched at this event:
        // highest potential wins, ties to the lowest index.
        let resolved_before: Vec<bool> = group_winner.iter().map(Option::is_some).collect();
        for &j in &crossers {
            let g = layer.group_of(j);
            if resolved_before[g] {
                continue;
            }
            match group_winner[g] {
                Some(w) if potentials[j] <= potentials[w] => {}
                _ => group_winner[g] = Some(j),
            }
        }

        match scope {
            InhibitionScope::None => {}
            InhibitionScope::IntraGroup => {
                for &j in &crossers {
                    let g = layer.group_of(j);
                    if resolved_before[g] {
                        continue;
                    }
                    let winner = group_winner[g].expect("group resolved at this event");
                    for &m in layer.group_members(g) {
                        if m == winner || status[m] == Status::Dropped {
                            continue;
                        }
                        inhibited[m] = true;
                        if status[m] == Status::Active {
                            status[m] = Status::Suppressed;
                            active -= 1;
                        }
                    }
                }
            }
            InhibitionScope::Global => {
                let winner = *crossers
                    .iter()
                    .min_by(|&&a, &&b| {
                        potentials[b].total_cmp(&potentials[a]).then(a.cmp(&b))
                    })
                    .expect("crossers is non-empty");
                for (j, s) in status.iter_mut().enumerate() {
                    if j == winner || *s == Status::Dropped {
                        continue;
                    }
                    inhibited[j] = true;
                    if *s == Status::Active {
                        *s = Status::Suppressed;
                    }
                }
                break 'events;
            }
        }
    }

    // Groups with no firing event: the winner is the member with the highest
    // frozen potential, ties to the lowest index.
    let winners: Vec<usize> = (0..n_groups)
        .map(|g| {
            group_winner[g].unwrap_or_else(|| {
                *layer
                    .group_members(g)
                    .iter()
                    .min_by(|&&a, &&b| potentials[b].total_cmp(&potentials[a]).then(a.cmp(&b)))
                    .expect("groups are non-empty")
            })
        })
        .collect();

    Ok(LayerResponse { firing_times, fired, potentials, winners, inhibited })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::predict;
    use crate::regulation::CrMode;

    pub(crate) fn layer_with_weights(
        n_inputs: usize,
        n_classes: usize,
        per_class: usize,
        labeling: bool,
        rows: &[&[f64]],
        theta0: f64,
    ) -> ClassificationLayer {
        let mut layer = ClassificationLayer::init_random(
            n_inputs, n_classes, per_class, labeling, 0.0, 1.0, theta0, 0.1, 1.0,
            CrMode::TwoCompartment, 0,
        )
        .unwrap();
        for (j, row) in rows.iter().enumerate() {
            layer.weight_row_mut(j).copy_from_slice(row);
        }
        layer
    }

    fn spikes(times: &[Option<f64>]) -> SpikeVector {
        SpikeVector::new(times.to_vec(), 0).unwrap()
    }

    #[test]
    fn accumulates_until_threshold() {
        // Two inputs into one neuron: crosses theta=1.0 at the second spike.
        let layer = layer_with_weights(2, 1, 1, false, &[&[0.5, 0.6]], 1.0);
        let s = spikes(&[Some(0.2), Some(0.4)]);
        let th = layer.select_thresholds(None, Phase::Test).unwrap();
        let r = integrate_sample(&layer, &s, InhibitionScope::IntraGroup, &th, None).unwrap();
        assert!(r.fired[0]);
        assert_eq!(r.firing_times[0], 0.4);
        assert!((r.potentials[0] - 1.1).abs() < 1e-15);
        assert_eq!(r.winners, vec![0]);
    }

    #[test]
    fn unreachable_threshold_never_fires() {
        let layer = layer_with_weights(2, 1, 1, false, &[&[0.5, 0.6]], 10.0);
        let s = spikes(&[Some(0.2), Some(0.4)]);
        let th = layer.select_thresholds(None, Phase::Test).unwrap();
        let r = integrate_sample(&layer, &s, InhibitionScope::IntraGroup, &th, None).unwrap();
        assert!(!r.fired[0]);
        assert_eq!(r.firing_times[0], T_MAX);
        assert!((r.potentials[0] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn simultaneous_crossing_resolves_by_potential() {
        // Both neurons of one group cross at t=0.3; the higher potential wins.
        let layer = layer_with_weights(1, 1, 2, false, &[&[1.3], &[1.5]], 1.0);
        let s = spikes(&[Some(0.3)]);
        let th = layer.select_thresholds(None, Phase::Test).unwrap();
        let r = integrate_sample(&layer, &s, InhibitionScope::IntraGroup, &th, None).unwrap();
        assert_eq!(r.winners, vec![1]);
        assert!(r.fired[0] && r.fired[1]);
        assert!(r.inhibited[0] && !r.inhibited[1]);
    }

    #[test]
    fn intra_group_inhibition_stops_later_firing() {
        // Neuron 0 crosses at 0.1; neuron 1 would cross at 0.5.
        let layer = layer_with_weights(2, 1, 2, false, &[&[1.0, 0.0], &[0.4, 0.8]], 1.0);
        let s = spikes(&[Some(0.1), Some(0.5)]);
        let th = layer.select_thresholds(None, Phase::Test).unwrap();
        let r = integrate_sample(&layer, &s, InhibitionScope::IntraGroup, &th, None).unwrap();
        assert_eq!(r.winners, vec![0]);
        assert!(!r.fired[1]);
        assert!(r.inhibited[1]);
        assert_eq!(r.firing_times[1], T_MAX);
        // Suppressed neurons stop integrating at the inhibition event.
        assert!((r.potentials[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn no_inhibition_lets_everyone_fire() {
        let layer = layer_with_weights(2, 1, 2, false, &[&[1.0, 0.0], &[0.4, 0.8]], 1.0);
        let s = spikes(&[Some(0.1), Some(0.5)]);
        let th = layer.select_thresholds(None, Phase::Test).unwrap();
        let r = integrate_sample(&layer, &s, InhibitionScope::None, &th, None).unwrap();
        assert!(r.fired[0] && r.fired[1]);
        assert_eq!(r.firing_times[1], 0.5);
        assert_eq!(r.winners, vec![0], "winner is still the first firer");
        assert!(!r.inhibited[1]);
    }

    #[test]
    fn global_scope_suppresses_the_whole_layer() {
        let layer = layer_with_weights(
            2,
            2,
            1,
            false,
            &[&[0.4, 0.8], &[1.0, 0.0]],
            1.0,
        );
        let s = spikes(&[Some(0.1), Some(0.5)]);
        let th = layer.select_thresholds(None, Phase::Test).unwrap();
        let r = integrate_sample(&layer, &s, InhibitionScope::Global, &th, None).unwrap();
        assert!(r.fired[1] && !r.fired[0]);
        assert!(r.inhibited[0] && !r.inhibited[1]);
        assert_eq!(r.layer_winner(), 1);
    }

    #[test]
    fn dropped_neurons_never_integrate_or_fire() {
        let layer = layer_with_weights(1, 1, 2, false, &[&[2.0], &[1.5]], 1.0);
        let s = spikes(&[Some(0.0)]);
        let th = layer.select_thresholds(None, Phase::Test).unwrap();
        let r =
            integrate_sample(&layer, &s, InhibitionScope::IntraGroup, &th, Some(&[true, false]))
                .unwrap();
        assert!(!r.fired[0]);
        assert_eq!(r.potentials[0], 0.0);
        assert_eq!(r.winners, vec![1]);
    }

    #[test]
    fn input_order_at_equal_times_does_not_matter() {
        let layer = layer_with_weights(3, 1, 1, false, &[&[0.5, 0.3, 0.4]], 1.0);
        let th = layer.select_thresholds(None, Phase::Test).unwrap();
        let a = integrate_sample(
            &layer,
            &spikes(&[Some(0.2), Some(0.2), Some(0.2)]),
            InhibitionScope::IntraGroup,
            &th,
            None,
        )
        .unwrap();
        assert!(a.fired[0]);
        assert_eq!(a.firing_times[0], 0.2);
        assert!((a.potentials[0] - 1.2).abs() < 1e-15, "whole batch lands before the check");
    }

    #[test]
    fn parameter_and_consistency_errors() {
        let layer = layer_with_weights(2, 1, 1, false, &[&[0.5, 0.6]], 1.0);
        let s = spikes(&[Some(0.2), Some(0.4)]);
        assert!(integrate_sample(&layer, &s, InhibitionScope::None, &[0.0], None).is_err());
        assert!(integrate_sample(&layer, &s, InhibitionScope::None, &[1.0, 1.0], None).is_err());
        let short = spikes(&[Some(0.2)]);
        assert!(integrate_sample(&layer, &short, InhibitionScope::None, &[1.0], None).is_err());
        assert!(
            integrate_sample(&layer, &s, InhibitionScope::None, &[1.0], Some(&[true, false]))
                .is_err()
        );
    }

    #[test]
    fn predict_takes_earliest_spike_then_potential() {
        let layer = layer_with_weights(1, 3, 1, false, &[&[1.0], &[1.0], &[1.0]], 1.0);
        let r = LayerResponse {
            firing_times: vec![0.4, 0.2, 0.9],
            fired: vec![true, true, true],
            potentials: vec![1.0, 1.0, 1.0],
            winners: vec![0, 1, 2],
            inhibited: vec![false; 3],
        };
        assert_eq!(predict(&r, &layer), 1);
        let tie = LayerResponse {
            firing_times: vec![0.2, 0.2, 0.9],
            fired: vec![true, true, true],
            potentials: vec![1.3, 1.5, 1.0],
            winners: vec![0, 1, 2],
            inhibited: vec![false; 3],
        };
        assert_eq!(predict(&tie, &layer), 1);
        let silent = LayerResponse {
            firing_times: vec![T_MAX, T_MAX, T_MAX],
            fired: vec![false, false, false],
            potentials: vec![0.1, 0.7, 0.3],
            winners: vec![0, 1, 2],
            inhibited: vec![false; 3],
        };
        assert_eq!(predict(&silent, &layer), 1);
    }

    #[test]
    fn threshold_selection_rules() {
        // 10 classes, M=5, labeling on: non-target is the last of each group.
        let mut layer = ClassificationLayer::init_random(
            4, 10, 5, true, 0.0, 1.0, 10.0, 0.1, 1.0, CrMode::TwoCompartment, 1,
        )
        .unwrap();
        // Raise theta_prime of the target neurons of group 2.
        let targets = layer.target_members(2);
        assert_eq!(targets.len(), 4);
        layer.thresholds_mut().regulate(&targets, targets[0]).unwrap();

        let test = layer.select_thresholds(None, Phase::Test).unwrap();
        assert!(test.iter().all(|&t| t == 10.0));

        let train = layer.select_thresholds(Some(2), Phase::Train).unwrap();
        let raised: Vec<usize> = (0..50).filter(|&j| train[j] != 10.0).collect();
        assert_eq!(raised, vec![targets[0]], "only the regulated target of group 2 moved");
        // All neurons of other groups and the non-target of group 2 use theta.
        assert_eq!(train.iter().filter(|&&t| t == 10.0).count(), 49);

        assert!(layer.select_thresholds(None, Phase::Train).is_err());

        // Freshly initialized layer: theta_prime == theta everywhere.
        let fresh = ClassificationLayer::init_random(
            4, 10, 5, true, 0.0, 1.0, 10.0, 0.1, 1.0, CrMode::TwoCompartment, 1,
        )
        .unwrap();
        let train = fresh.select_thresholds(Some(3), Phase::Train).unwrap();
        assert!(train.iter().all(|&t| t == 10.0));
    }
}
