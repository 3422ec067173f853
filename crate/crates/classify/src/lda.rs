//! Linear discriminant analysis with a pooled, ridge-regularized covariance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use loopgrade_core::datagen::Label;

use crate::Samples;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lda {
    /// `w` of the score `w . x + b` (positive means OK).
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Set when the pooled covariance was not positive definite and only
    /// its diagonal was used.
    pub diagonal_fallback: bool,
}

impl Lda {
    pub fn fit(data: &Samples, ridge: f64) -> Self {
        let d = data.dim();
        let mut count = [0usize; 2];
        let mut mean = [DVector::<f64>::zeros(d), DVector::<f64>::zeros(d)];
        for (row, &l) in data.x.iter().zip(&data.y) {
            let c = usize::from(l == Label::Nok);
            count[c] += 1;
            mean[c] += DVector::from_column_slice(row);
        }
        for c in 0..2 {
            mean[c] /= count[c].max(1) as f64;
        }
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for (row, &l) in data.x.iter().zip(&data.y) {
            let c = usize::from(l == Label::Nok);
            let diff = DVector::from_column_slice(row) - &mean[c];
            cov.ger(1.0, &diff, &diff, 1.0);
        }
        let dof = (data.len().saturating_sub(2)).max(1) as f64;
        cov /= dof;
        for i in 0..d {
            cov[(i, i)] += ridge;
        }
        let delta = &mean[0] - &mean[1];
        let (w, diagonal_fallback) = match cov.clone().cholesky() {
            Some(ch) => (ch.solve(&delta), false),
            None => {
                let w = DVector::from_iterator(
                    d,
                    (0..d).map(|i| delta[i] / cov[(i, i)].max(ridge)),
                );
                (w, true)
            }
        };
        let mid = (&mean[0] + &mean[1]) * 0.5;
        let prior = |k: usize| (k.max(1) as f64 / data.len().max(1) as f64).ln();
        let bias = -w.dot(&mid) + prior(count[0]) - prior(count[1]);
        Self {
            weights: w.iter().copied().collect(),
            bias,
            diagonal_fallback,
        }
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }
}
