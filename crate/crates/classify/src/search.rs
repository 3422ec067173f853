//! k-fold cross-validation and random hyperparameter search.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use loopgrade_core::seeding::{derive_seed, stream_rng};

use crate::{evaluate, train, ClassifyError, Hyper, Kind, Samples};

const RATES: [f64; 5] = [0.3, 0.4, 0.5, 0.6, 0.7];
const ESTIMATORS: [usize; 6] = [30, 50, 70, 100, 150, 200];
const FRACTIONS: [f64; 6] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7];
const BOOST_RATES: [f64; 6] = [0.001, 0.01, 0.1, 0.2, 0.5, 1.0];
/// Base-tree depths tried for AdaBoost.
const BOOST_DEPTHS: std::ops::RangeInclusive<usize> = 1..=6;

/// Shuffled partition of `0..n` into `k` folds; each fold is sorted.
pub fn kfold(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let k = k.clamp(1, n.max(1));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, 0));
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    folds
}

/// Mean validation accuracy over the given folds.
pub fn cross_validate(
    hyper: Hyper,
    data: &Samples,
    folds: &[Vec<usize>],
    seed: u64,
) -> Result<f64, ClassifyError> {
    let mut total = 0.0;
    for (f, held) in folds.iter().enumerate() {
        let mut mask = vec![false; data.len()];
        held.iter().for_each(|&i| mask[i] = true);
        let fit: Vec<usize> = (0..data.len()).filter(|&i| !mask[i]).collect();
        let model = train(hyper, &data.subset(&fit), derive_seed(seed, f as u64))?;
        total += evaluate(&model, &data.subset(held))?.accuracy;
    }
    Ok(total / folds.len().max(1) as f64)
}

/// One random draw from the search space of `kind`. Kinds without a
/// search space return their defaults.
pub fn sample_hyper<R: Rng>(kind: Kind, rng: &mut R) -> Hyper {
    let depth = |r: &mut R| r.random_range(4..=20usize);
    let leaf = |r: &mut R| r.random_range(4..=30usize);
    match kind {
        Kind::Gnb | Kind::Lda => Hyper::default_for(kind),
        Kind::Knn => Hyper::Knn {
            k: 2 * rng.random_range(0..15usize) + 1,
        },
        Kind::DecisionTree => Hyper::DecisionTree {
            max_depth: depth(rng),
            min_samples_leaf: leaf(rng),
        },
        Kind::RandomForest => Hyper::RandomForest {
            sampling_rate: *RATES.choose(rng).unwrap(),
            n_estimators: *ESTIMATORS.choose(rng).unwrap(),
            max_depth: depth(rng),
            min_samples_leaf: leaf(rng),
            feature_fraction: None,
        },
        Kind::AdaBoost => Hyper::AdaBoost {
            feature_fraction: *FRACTIONS.choose(rng).unwrap(),
            sampling_rate: *RATES.choose(rng).unwrap(),
            n_estimators: *ESTIMATORS.choose(rng).unwrap(),
            learning_rate: *BOOST_RATES.choose(rng).unwrap(),
            max_depth: rng.random_range(BOOST_DEPTHS),
        },
        Kind::Svm => Hyper::Svm {
            gamma: 2f64.powi(2 * rng.random_range(0..10i32) - 15),
            c: 2f64.powi(2 * rng.random_range(0..11i32) - 5),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub hyper: Hyper,
    pub cv_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub kind: Kind,
    pub best: Hyper,
    pub cv_accuracy: f64,
    pub folds: usize,
    pub seed: u64,
    /// In draw order.
    pub trials: Vec<Trial>,
}

/// Draws up to `iterations` distinct configurations and keeps the one with
/// the highest mean CV accuracy; ties go to the simpler configuration.
pub fn random_search(
    kind: Kind,
    data: &Samples,
    iterations: usize,
    folds: usize,
    seed: u64,
) -> Result<SearchResult, ClassifyError> {
    if data.is_empty() {
        return Err(ClassifyError::Empty);
    }
    let mut rng = stream_rng(seed, 1);
    let mut seen = HashSet::new();
    let mut candidates = Vec::new();
    let mut draws = 0;
    while candidates.len() < iterations.max(1) && draws < 100 * iterations.max(1) {
        draws += 1;
        let h = sample_hyper(kind, &mut rng);
        if seen.insert(format!("{h:?}")) {
            candidates.push(h);
        }
    }
    let parts = kfold(data.len(), folds, seed);
    let trials = candidates
        .par_iter()
        .map(|&hyper| {
            cross_validate(hyper, data, &parts, seed).map(|cv_accuracy| Trial { hyper, cv_accuracy })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let best = trials
        .iter()
        .reduce(|a, b| {
            let simpler = b.hyper.complexity().partial_cmp(&a.hyper.complexity()) == Some(std::cmp::Ordering::Less);
            if b.cv_accuracy > a.cv_accuracy || (b.cv_accuracy == a.cv_accuracy && simpler) {
                b
            } else {
                a
            }
        })
        .expect("at least one candidate");
    Ok(SearchResult {
        kind,
        best: best.hyper,
        cv_accuracy: best.cv_accuracy,
        folds: parts.len(),
        seed,
        trials,
    })
}
