//! Stratified validation splits and K-fold partitioning.

use rand::seq::SliceRandom;

use super::SpikeDataset;
use crate::error::{Error, Result};
use crate::rng;

/// Stratified fold assignment for K-fold cross-validation.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    k: usize,
    assignments: Vec<usize>,
    seed: u64,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// Split a dataset into (train, validation) for fold `fold`.
    pub fn split(&self, dataset: &SpikeDataset, fold: usize) -> Result<(SpikeDataset, SpikeDataset)> {
        if fold >= self.k {
            return Err(Error::parameter(format!("fold {fold} >= K {}", self.k)));
        }
        if dataset.len() != self.assignments.len() {
            return Err(Error::consistency("fold plan built for a different dataset"));
        }
        let (mut train, mut val) = (Vec::new(), Vec::new());
        for (i, &f) in self.assignments.iter().enumerate() {
            if f == fold {
                val.push(i);
            } else {
                train.push(i);
            }
        }
        Ok((dataset.subset(&train), dataset.subset(&val)))
    }
}

/// Per-class index lists in dataset order.
fn indices_by_class(dataset: &SpikeDataset) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); dataset.n_classes()];
    for (i, s) in dataset.iter().enumerate() {
        by_class[s.label()].push(i);
    }
    by_class
}

/// Move a per-class fraction of samples into a validation set.
///
/// For each class, `round(nu * n_c)` samples are selected at random; the
/// remaining samples stay in the train set. Original sample order is
/// preserved on both sides.
pub fn split_validation(
    dataset: &SpikeDataset,
    nu: f64,
    seed: u64,
) -> Result<(SpikeDataset, SpikeDataset)> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::parameter(format!("validation fraction must be in (0, 1), got {nu}")));
    }
    let mut in_val = vec![false; dataset.len()];
    for (class, mut idxs) in indices_by_class(dataset).into_iter().enumerate() {
        let n_c = idxs.len();
        let take = ((nu * n_c as f64).round() as usize).min(n_c);
        let mut r = rng::stream(seed, "val-split", class as u64);
        idxs.shuffle(&mut r);
        for &i in idxs.iter().take(take) {
            in_val[i] = true;
        }
    }
    let train: Vec<usize> = (0..dataset.len()).filter(|&i| !in_val[i]).collect();
    let val: Vec<usize> = (0..dataset.len()).filter(|&i| in_val[i]).collect();
    Ok((dataset.subset(&train), dataset.subset(&val)))
}

/// Assign every sample to one of `k` folds, stratified per class: fold sizes
/// within a class differ by at most one.
pub fn kfold_partition(dataset: &SpikeDataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::parameter(format!("K must be >= 2, got {k}")));
    }
    let mut assignments = vec![0usize; dataset.len()];
    for (class, mut idxs) in indices_by_class(dataset).into_iter().enumerate() {
        if idxs.len() < k {
            return Err(Error::Parameter(format!(
                "class {class} has {} samples, fewer than K={k}",
                idxs.len()
            )));
        }
        let mut r = rng::stream(seed, "kfold", class as u64);
        idxs.shuffle(&mut r);
        for (pos, &i) in idxs.iter().enumerate() {
            assignments[i] = pos % k;
        }
    }
    Ok(FoldPlan { k, assignments, seed })
}

/// Deterministic stratified subsample of `n` samples (proportional per class).
///
/// Used to carve desk-scale subsets out of a large dataset. Keeps original
/// order; rounds per-class quotas down then tops up largest classes first.
pub fn stratified_take(dataset: &SpikeDataset, n: usize, seed: u64) -> Result<SpikeDataset> {
    if n == 0 || n > dataset.len() {
        return Err(Error::parameter(format!(
            "cannot take {n} samples from a dataset of {}",
            dataset.len()
        )));
    }
    let by_class = indices_by_class(dataset);
    let total = dataset.len() as f64;
    let mut quotas: Vec<usize> = by_class
        .iter()
        .map(|idxs| ((n as f64) * (idxs.len() as f64) / total).floor() as usize)
        .collect();
    let mut assigned: usize = quotas.iter().sum();
    // Distribute the remainder to the largest classes, ties by class index.
    let mut order: Vec<usize> = (0..by_class.len()).collect();
    order.sort_by_key(|&c| std::cmp::Reverse(by_class[c].len()));
    let mut cursor = 0;
    while assigned < n {
        let c = order[cursor % order.len()];
        if quotas[c] < by_class[c].len() {
            quotas[c] += 1;
            assigned += 1;
        }
        cursor += 1;
    }
    let mut keep = vec![false; dataset.len()];
    for (class, mut idxs) in by_class.into_iter().enumerate() {
        let mut r = rng::stream(seed, "take", class as u64);
        idxs.shuffle(&mut r);
        for &i in idxs.iter().take(quotas[class]) {
            keep[i] = true;
        }
    }
    let selected: Vec<usize> = (0..dataset.len()).filter(|&i| keep[i]).collect();
    Ok(dataset.subset(&selected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SpikeVector;

    fn balanced(n_per_class: usize, classes: usize) -> SpikeDataset {
        let samples = (0..n_per_class * classes)
            .map(|i| SpikeVector::new(vec![Some(0.5)], i % classes).unwrap())
            .collect();
        SpikeDataset::new(samples, 1, classes).unwrap()
    }

    #[test]
    fn validation_split_is_stratified_and_deterministic() {
        let ds = balanced(100, 10);
        let (train, val) = split_validation(&ds, 0.1, 9).unwrap();
        assert_eq!(val.len(), 100);
        assert_eq!(train.len(), 900);
        assert!(val.class_counts().iter().all(|&c| c == 10));
        let (train2, val2) = split_validation(&ds, 0.1, 9).unwrap();
        assert_eq!(train, train2);
        assert_eq!(val, val2);
        let (_, val3) = split_validation(&ds, 0.1, 10).unwrap();
        assert_ne!(val, val3);
    }

    #[test]
    fn validation_fraction_bounds() {
        let ds = balanced(10, 2);
        assert!(split_validation(&ds, 0.0, 1).is_err());
        assert!(split_validation(&ds, 1.0, 1).is_err());
    }

    #[test]
    fn kfold_covers_every_sample_exactly_once_and_balances() {
        let ds = balanced(25, 4);
        let plan = kfold_partition(&ds, 10, 3).unwrap();
        let mut seen = vec![0usize; ds.len()];
        for fold in 0..10 {
            let (train, val) = plan.split(&ds, fold).unwrap();
            assert_eq!(train.len() + val.len(), ds.len());
            for (i, &f) in plan.assignments().iter().enumerate() {
                if f == fold {
                    seen[i] += 1;
                }
            }
            // Stratified: per-class fold sizes differ by at most one.
            for &c in val.class_counts().iter() {
                assert!(c == 2 || c == 3);
            }
        }
        assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn kfold_two_folds_of_two() {
        let ds = balanced(4, 1);
        let plan = kfold_partition(&ds, 2, 0).unwrap();
        let (train, val) = plan.split(&ds, 0).unwrap();
        assert_eq!((train.len(), val.len()), (2, 2));
    }

    #[test]
    fn kfold_parameter_errors() {
        let ds = balanced(4, 1);
        assert!(kfold_partition(&ds, 0, 0).is_err());
        assert!(kfold_partition(&ds, 1, 0).is_err());
        assert!(kfold_partition(&ds, 5, 0).is_err());
    }

    #[test]
    fn stratified_take_respects_proportions() {
        let ds = balanced(100, 10);
        let sub = stratified_take(&ds, 200, 7).unwrap();
        assert_eq!(sub.len(), 200);
        assert!(sub.class_counts().iter().all(|&c| c == 20));
        assert_eq!(sub, stratified_take(&ds, 200, 7).unwrap());
    }
}
