use std::cmp::Ordering;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::features::FeatureSet;
use super::linear::{fit_linear, tissue_error, LinearModel, LossKind};
use crate::seeds;
use crate::{MraiError, Result};

/// Default regularization grid, `1e-4 ..= 1e2`.
pub const DEFAULT_L2_GRID: [f64; 7] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2];

fn vector_hash(seed: u64, v: &[f64]) -> u64 {
    v.iter().fold(seeds::splitmix64(seed), |acc, x| seeds::splitmix64(acc ^ x.to_bits()))
}

/// Stratified fold index per sample. Within each class, distinct vectors are
/// ordered by a seeded hash and dealt round-robin, so identical vectors
/// always share a fold.
pub fn stratified_folds(data: &FeatureSet, folds: usize, cv_seed: u64) -> Vec<usize> {
    let hashes: Vec<u64> = data.vectors.iter().map(|v| vector_hash(cv_seed, v)).collect();
    let mut assignment = vec![0; data.len()];
    for class in data.classes() {
        let mut members: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == class).collect();
        members.sort_by(|&a, &b| hashes[a].cmp(&hashes[b]).then_with(|| lex(&data.vectors[a], &data.vectors[b])));
        let mut rank = 0;
        for (pos, &i) in members.iter().enumerate() {
            if pos > 0 && data.vectors[members[pos - 1]] != data.vectors[i] {
                rank += 1;
            }
            assignment[i] = rank % folds;
        }
    }
    assignment
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Mean validation error over stratified folds for each grid value.
pub fn cross_validate(data: &FeatureSet, loss: LossKind, grid: &[f64], folds: usize, cv_seed: u64) -> Result<Vec<f64>> {
    if folds < 2 || data.len() < folds {
        return Err(MraiError::InvalidArgument(format!("{folds} folds over {} samples", data.len())));
    }
    if data.classes().len() < 2 {
        return Err(MraiError::DegenerateLabels("cross-validation needs two classes".into()));
    }
    let assignment = stratified_folds(data, folds, cv_seed);
    let splits: Vec<(FeatureSet, FeatureSet)> = (0..folds)
        .filter_map(|f| {
            let train: Vec<usize> = (0..data.len()).filter(|&i| assignment[i] != f).collect();
            let test: Vec<usize> = (0..data.len()).filter(|&i| assignment[i] == f).collect();
            (!test.is_empty()).then(|| (data.subset(&train), data.subset(&test)))
        })
        .collect();
    let fallback = data.classes()[0];
    let jobs: Vec<(f64, usize)> = grid.iter().flat_map(|&l2| (0..splits.len()).map(move |s| (l2, s))).collect();
    let run = |&(l2, s): &(f64, usize)| -> Result<f64> {
        let (train, test) = &splits[s];
        if train.classes().len() < 2 {
            // a training part with fewer than two classes predicts a constant
            let only = train.labels.first().copied().unwrap_or(fallback);
            return Ok(test.labels.iter().filter(|&&l| l != only).count() as f64 / test.len() as f64);
        }
        Ok(tissue_error(&fit_linear(train, loss, l2)?, test))
    };
    #[cfg(feature = "parallel")]
    let errors: Vec<Result<f64>> = jobs.par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let errors: Vec<Result<f64>> = jobs.iter().map(run).collect();
    let errors = errors.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(errors.chunks(splits.len()).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect())
}

/// Index of the lowest error, ties going to the larger regularization.
fn best_index(grid: &[f64], errors: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..grid.len() {
        if errors[i] < errors[best] || (errors[i] == errors[best] && grid[i] > grid[best]) {
            best = i;
        }
    }
    best
}

/// Cross-validate the regularization strength, then refit on all data.
pub fn train_linear(data: &FeatureSet, loss: LossKind, grid: &[f64], folds: usize, cv_seed: u64) -> Result<LinearModel> {
    if grid.is_empty() {
        return Err(MraiError::InvalidArgument("empty l2 grid".into()));
    }
    let errors = cross_validate(data, loss, grid, folds, cv_seed)?;
    let best = best_index(grid, &errors);
    let mut model = fit_linear(data, loss, grid[best])?;
    model.cv_errors = grid.iter().copied().zip(errors).collect();
    Ok(model)
}

/// `2 (1 - 2 e)` clamped to `[0, 2]`.
pub fn pad_from_error(e: f64) -> f64 {
    let d = 2.0 * (1.0 - 2.0 * e);
    if !(0.0..=2.0).contains(&d) {
        log::debug!("proxy A-distance {d} clamped (domain error {e})");
    }
    d.clamp(0.0, 2.0)
}

/// Proxy A-distance between two feature samples, using the cross-validated
/// error of a hinge-loss domain classifier at the best grid value.
pub fn proxy_a_distance(source: &[Vec<f64>], target: &[Vec<f64>], folds: usize, seed: u64) -> Result<f64> {
    if source.is_empty() || target.is_empty() {
        return Err(MraiError::InvalidArgument("both domain samples must be nonempty".into()));
    }
    if source[0].len() != target[0].len() {
        return Err(MraiError::Shape(format!(
            "source dimension {} vs target dimension {}",
            source[0].len(),
            target[0].len()
        )));
    }
    let mut union: Vec<(Vec<f64>, usize)> = source
        .iter()
        .map(|v| (v.clone(), 0))
        .chain(target.iter().map(|v| (v.clone(), 1)))
        .collect();
    union.sort_by(|a, b| lex(&a.0, &b.0));
    let (vectors, labels) = union.into_iter().unzip();
    let data = FeatureSet::new(vectors, labels, super::LabelSemantics::Domain)?;
    let errors = cross_validate(&data, LossKind::Hinge, &DEFAULT_L2_GRID, folds, seed)?;
    let e = errors[best_index(&DEFAULT_L2_GRID, &errors)];
    Ok(pad_from_error(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalstats::linear::tests::blobs;
    use crate::evalstats::LabelSemantics;
    use rand::seq::SliceRandom;

    #[test]
    fn pad_point_values() {
        assert_eq!(pad_from_error(0.0), 2.0);
        assert_eq!(pad_from_error(0.5), 0.0);
        assert!((pad_from_error(0.03) - 1.88).abs() < 1e-12);
        assert_eq!(pad_from_error(0.7), 0.0);
    }

    #[test]
    fn folds_are_stratified() {
        let data = blobs(53, 1.0, 2, 4);
        let a = stratified_folds(&data, 5, 9);
        for class in 0..2 {
            let mut counts = [0; 5];
            for i in 0..data.len() {
                if data.labels[i] == class {
                    counts[a[i]] += 1;
                }
            }
            assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn duplicated_data_same_choice_and_function() {
        let data = blobs(40, 0.6, 2, 5);
        let idx: Vec<usize> = (0..data.len()).flat_map(|i| [i, i]).collect();
        let doubled = data.subset(&idx);
        for loss in [LossKind::Logistic, LossKind::Hinge] {
            let a = train_linear(&data, loss, &DEFAULT_L2_GRID, 5, 3).unwrap();
            let b = train_linear(&doubled, loss, &DEFAULT_L2_GRID, 5, 3).unwrap();
            assert_eq!(a.l2, b.l2);
            for (x, y) in a.cv_errors.iter().zip(&b.cv_errors) {
                assert!((x.1 - y.1).abs() < 1e-12);
            }
            for v in &data.vectors {
                let (sa, sb) = (a.scores(v), b.scores(v));
                assert!((sa[1] - sb[1]).abs() < 1e-3 * (1.0 + sa[1].abs()), "{loss:?}: {sa:?} vs {sb:?}");
                assert_eq!(a.predict(v), b.predict(v));
            }
        }
    }

    #[test]
    fn permuted_labels_are_chance() {
        let mut total = 0.0;
        for seed in 0..20 {
            let data = blobs(50, 0.0, 2, 100 + seed);
            let mut labels = data.labels.clone();
            labels.shuffle(&mut seeds::rng(seed));
            let permuted = FeatureSet::new(data.vectors.clone(), labels, LabelSemantics::Domain).unwrap();
            let errors = cross_validate(&permuted, LossKind::Logistic, &[1.0], 5, seed).unwrap();
            total += errors[0];
        }
        let mean = total / 20.0;
        assert!((0.4..=0.6).contains(&mean), "mean CV error {mean}");
    }

    #[test]
    fn pad_symmetric_and_separable() {
        let data = blobs(60, 2.0, 3, 6);
        let (s, t): (Vec<_>, Vec<_>) = data.vectors.iter().zip(&data.labels).partition(|(_, l)| **l == 0);
        let s: Vec<Vec<f64>> = s.into_iter().map(|(v, _)| v.clone()).collect();
        let t: Vec<Vec<f64>> = t.into_iter().map(|(v, _)| v.clone()).collect();
        let ab = proxy_a_distance(&s, &t, 5, 1).unwrap();
        let ba = proxy_a_distance(&t, &s, 5, 1).unwrap();
        assert_eq!(ab, ba);
        assert!(ab >= 1.8, "{ab}");
        let same = proxy_a_distance(&s, &s.iter().map(|v| v.iter().map(|x| x + 1e-9).collect()).collect::<Vec<_>>(), 5, 1).unwrap();
        assert!(same < 0.5, "{same}");
        assert!(matches!(proxy_a_distance(&s, &[vec![0.0]], 5, 1), Err(MraiError::Shape(_))));
    }

    #[test]
    fn collapsed_point_cloud_is_indistinguishable() {
        let point = vec![vec![0.25, -1.0]; 40];
        assert_eq!(proxy_a_distance(&point, &point, 5, 3).unwrap(), 0.0);
    }
}
