//! Binary SAMME AdaBoost over shallow trees.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use loopgrade_core::seeding::stream_rng;

use crate::forest::features_per_split;
use crate::tree::{Tree, TreeParams};
use crate::{label_of, sign, Samples};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boost {
    pub trees: Vec<Tree>,
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct BoostParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub sampling_rate: f64,
    pub feature_fraction: f64,
}

const MIN_ERROR: f64 = 1e-10;

impl Boost {
    pub fn fit(data: &Samples, p: BoostParams, seed: u64) -> Self {
        let n = data.len();
        let draw = ((p.sampling_rate * n as f64).round() as usize).clamp(1, n.max(1));
        let tp = TreeParams {
            max_depth: p.max_depth.max(1),
            min_samples_leaf: 1,
            max_features: Some(features_per_split(data.dim(), Some(p.feature_fraction))),
        };
        let mut w = vec![1.0 / n.max(1) as f64; n];
        let mut trees = Vec::new();
        let mut alphas = Vec::new();
        for t in 0..p.n_estimators {
            let mut rng = stream_rng(seed, t as u64);
            let mut rows = sample(&mut rng, n, draw).into_vec();
            rows.sort_unstable();
            let tree = Tree::fit(&data.x, &data.y, &w, &rows, tp, &mut rng);
            let miss: Vec<bool> = data
                .x
                .iter()
                .zip(&data.y)
                .map(|(r, &l)| label_of(tree.score(r)) != l)
                .collect();
            let err: f64 = w.iter().zip(&miss).filter(|(_, &m)| m).map(|(w, _)| w).sum();
            if err >= 0.5 {
                if trees.is_empty() {
                    trees.push(tree);
                    alphas.push(1.0);
                }
                break;
            }
            let e = err.max(MIN_ERROR);
            let alpha = p.learning_rate * ((1.0 - e) / e).ln();
            trees.push(tree);
            alphas.push(alpha);
            if err <= 0.0 {
                break;
            }
            for (wi, &m) in w.iter_mut().zip(&miss) {
                if m {
                    *wi *= alpha.exp();
                }
            }
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|wi| *wi /= s);
        }
        Self { trees, alphas }
    }

    /// Weighted vote `sum alpha_t h_t(x)`.
    pub fn score(&self, row: &[f64]) -> f64 {
        self.trees
            .iter()
            .zip(&self.alphas)
            .map(|(t, a)| a * sign(label_of(t.score(row))))
            .sum()
    }

    /// Alpha-weighted, per-tree normalized impurity decrease.
    pub fn importance(&self, d: usize) -> Vec<f64> {
        let mut acc = vec![0.0; d];
        for (t, a) in self.trees.iter().zip(&self.alphas) {
            let total: f64 = t.importance.iter().sum();
            if total > 0.0 {
                for (x, v) in acc.iter_mut().zip(&t.importance) {
                    *x += a.abs() * v / total;
                }
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use loopgrade_core::datagen::Label;
    use rand::Rng;

    #[test]
    fn stumps_combine_into_a_diagonal_boundary() {
        let mut rng = stream_rng(5, 0);
        let x: Vec<Vec<f64>> = (0..400)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let y: Vec<Label> = x
            .iter()
            .map(|r| if r[0] + r[1] > 1.0 { Label::Ok } else { Label::Nok })
            .collect();
        let data = Samples::new(x, y);
        let p = BoostParams {
            n_estimators: 60,
            max_depth: 1,
            learning_rate: 1.0,
            sampling_rate: 1.0,
            feature_fraction: 1.0,
        };
        let b = Boost::fit(&data, p, 1);
        let single = Boost::fit(&data, BoostParams { n_estimators: 1, ..p }, 1);
        let acc = |m: &Boost| {
            data.x
                .iter()
                .zip(&data.y)
                .filter(|(r, &l)| label_of(m.score(r)) == l)
                .count() as f64
                / data.len() as f64
        };
        assert!(acc(&b) > acc(&single) + 0.1, "{} vs {}", acc(&b), acc(&single));
        assert!(acc(&b) > 0.9);
    }
}
