//! Random forest: bootstrap-sampled trees with random feature subsets.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use loopgrade_core::seeding::stream_rng;

use crate::tree::{Tree, TreeParams};
use crate::{label_of, sign, Samples};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

#[derive(Debug, Clone, Copy)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub sampling_rate: f64,
    pub feature_fraction: Option<f64>,
}

/// Number of columns tried per split.
pub fn features_per_split(d: usize, fraction: Option<f64>) -> usize {
    let m = match fraction {
        Some(f) => (f * d as f64).round() as usize,
        None => (d as f64).sqrt().round() as usize,
    };
    m.clamp(1, d.max(1))
}

impl Forest {
    pub fn fit(data: &Samples, p: ForestParams, seed: u64) -> Self {
        let n = data.len();
        let draw = ((p.sampling_rate * n as f64).round() as usize).clamp(1, n.max(1));
        let w = vec![1.0; n];
        let tp = TreeParams {
            max_depth: p.max_depth,
            min_samples_leaf: p.min_samples_leaf,
            max_features: Some(features_per_split(data.dim(), p.feature_fraction)),
        };
        let trees = (0..p.n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut rng = stream_rng(seed, t as u64);
                let rows: Vec<usize> = (0..draw).map(|_| rng.random_range(0..n)).collect();
                Tree::fit(&data.x, &data.y, &w, &rows, tp, &mut rng)
            })
            .collect();
        Self { trees }
    }

    /// `(#OK votes - #NOK votes) / trees`.
    pub fn score(&self, row: &[f64]) -> f64 {
        let votes: f64 = self
            .trees
            .iter()
            .map(|t| sign(label_of(t.score(row))))
            .sum();
        votes / self.trees.len().max(1) as f64
    }

    pub fn importance(&self, d: usize) -> Vec<f64> {
        let mut acc = vec![0.0; d];
        for t in &self.trees {
            let total: f64 = t.importance.iter().sum();
            if total > 0.0 {
                for (a, v) in acc.iter_mut().zip(&t.importance) {
                    *a += v / total;
                }
            }
        }
        acc
    }
}
