//! k-nearest neighbours with Euclidean distance on standardized features.

use serde::{Deserialize, Serialize};

use loopgrade_core::datagen::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Label>,
}

impl Knn {
    pub fn fit(x: Vec<Vec<f64>>, y: Vec<Label>, k: usize) -> Self {
        Self { k: k.max(1), x, y }
    }

    /// `(#OK - #NOK)` among the `k` nearest; ties in distance are resolved
    /// by training order. A zero score votes OK.
    pub fn score(&self, row: &[f64]) -> f64 {
        let mut d: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let k = self.k.min(d.len());
        if k == 0 {
            return 0.0;
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
        }
        d[..k]
            .iter()
            .map(|&(_, i)| crate::sign(self.y[i]))
            .sum()
    }
}
