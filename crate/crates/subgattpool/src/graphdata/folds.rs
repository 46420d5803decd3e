//! Stratified splits for cross-validation and validation holdouts.

use crate::error::{EngineError, Result};
use crate::rng::{stream, tag};
use rand::seq::SliceRandom;

/// Stratified k-fold assignment. Within each class (ascending class id) the
/// members are shuffled by a per-class stream, then dealt to folds by a
/// single cursor that keeps counting across classes, so fold sizes stay
/// within one graph of each other overall, not merely per class.
///
/// Returns the test index set of each fold, each sorted ascending.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(EngineError::Split {
            detail: format!("need at least 2 folds, got {k}"),
        });
    }
    if labels.len() < k {
        return Err(EngineError::Split {
            detail: format!("{} graphs cannot fill {k} folds", labels.len()),
        });
    }
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut cursor = 0usize;
    for class in 0..num_classes {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        members.shuffle(&mut stream(seed, &[tag::FOLD, class as u64]));
        for idx in members {
            folds[cursor % k].push(idx);
            cursor += 1;
        }
    }
    if let Some(empty) = folds.iter().position(Vec::is_empty) {
        return Err(EngineError::Split {
            detail: format!("fold {empty} is empty"),
        });
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Split indices into (train, validation) with roughly `fraction` of each
/// class held out. Every class with at least two members contributes at
/// least one validation graph; singleton classes stay in train.
pub fn stratified_holdout(
    labels: &[usize],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(EngineError::Split {
            detail: format!("holdout fraction must be in [0, 1), got {fraction}"),
        });
    }
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in 0..num_classes {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        members.shuffle(&mut stream(seed, &[tag::VAL_SPLIT, class as u64]));
        let take = if members.len() < 2 || fraction == 0.0 {
            0
        } else {
            ((members.len() as f64 * fraction).round() as usize)
                .max(1)
                .min(members.len() - 1)
        };
        val.extend_from_slice(&members[..take]);
        train.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class_labels(zeros: usize, ones: usize) -> Vec<usize> {
        let mut l = vec![0usize; zeros];
        l.extend(std::iter::repeat(1).take(ones));
        l
    }

    #[test]
    fn folds_partition_the_dataset() {
        let labels = two_class_labels(125, 63);
        let folds = stratified_folds(&labels, 10, 0).unwrap();
        let mut seen = vec![false; labels.len()];
        for fold in &folds {
            for &i in fold {
                assert!(!seen[i], "index {i} appears twice");
                seen[i] = true;
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn global_cursor_balances_fold_sizes() {
        // 125 + 63 over 10 folds: eight folds of 19 and two of 18.
        let labels = two_class_labels(125, 63);
        let folds = stratified_folds(&labels, 10, 3).unwrap();
        let mut sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![18, 18, 19, 19, 19, 19, 19, 19, 19, 19]);
    }

    #[test]
    fn folds_are_stratified() {
        let labels = two_class_labels(125, 63);
        for fold in stratified_folds(&labels, 10, 1).unwrap() {
            let ones = fold.iter().filter(|&&i| labels[i] == 1).count();
            let zeros = fold.len() - ones;
            assert!((12..=13).contains(&zeros), "zeros {zeros}");
            assert!((6..=7).contains(&ones), "ones {ones}");
        }
    }

    #[test]
    fn same_seed_reproduces_different_seed_changes() {
        let labels = two_class_labels(40, 20);
        let a = stratified_folds(&labels, 5, 9).unwrap();
        let b = stratified_folds(&labels, 5, 9).unwrap();
        assert_eq!(a, b);
        let c = stratified_folds(&labels, 5, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn too_few_graphs_is_an_error() {
        assert!(stratified_folds(&[0, 1], 3, 0).is_err());
        assert!(stratified_folds(&[0; 10], 1, 0).is_err());
    }

    #[test]
    fn holdout_keeps_every_class_in_train() {
        let labels = two_class_labels(18, 2);
        let (train, val) = stratified_holdout(&labels, 0.1, 4).unwrap();
        assert_eq!(train.len() + val.len(), 20);
        // Class 1 has two members: one goes to validation, one stays.
        assert_eq!(val.iter().filter(|&&i| labels[i] == 1).count(), 1);
        assert_eq!(train.iter().filter(|&&i| labels[i] == 1).count(), 1);
        // Class 0 holds out round(18 * 0.1) = 2.
        assert_eq!(val.iter().filter(|&&i| labels[i] == 0).count(), 2);
    }

    #[test]
    fn singleton_class_is_never_held_out() {
        let labels = vec![0, 0, 0, 0, 1];
        let (train, val) = stratified_holdout(&labels, 0.25, 0).unwrap();
        assert!(train.contains(&4));
        assert!(!val.contains(&4));
    }
}
