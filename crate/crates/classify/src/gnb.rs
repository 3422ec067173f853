//! Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use loopgrade_core::datagen::Label;

use crate::Samples;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gnb {
    /// Per class (OK, NOK): log prior, means, variances.
    pub log_prior: [f64; 2],
    pub mean: [Vec<f64>; 2],
    pub var: [Vec<f64>; 2],
}

fn class_index(l: Label) -> usize {
    match l {
        Label::Ok => 0,
        Label::Nok => 1,
    }
}

impl Gnb {
    pub fn fit(data: &Samples, var_floor: f64) -> Self {
        let d = data.dim();
        let mut count = [0usize; 2];
        let mut mean = [vec![0.0; d], vec![0.0; d]];
        for (row, &l) in data.x.iter().zip(&data.y) {
            let c = class_index(l);
            count[c] += 1;
            for (m, v) in mean[c].iter_mut().zip(row) {
                *m += v;
            }
        }
        for c in 0..2 {
            let n = count[c].max(1) as f64;
            mean[c].iter_mut().for_each(|m| *m /= n);
        }
        let mut var = [vec![0.0; d], vec![0.0; d]];
        for (row, &l) in data.x.iter().zip(&data.y) {
            let c = class_index(l);
            for ((s, v), m) in var[c].iter_mut().zip(row).zip(&mean[c]) {
                *s += (v - m) * (v - m);
            }
        }
        for c in 0..2 {
            let n = count[c].max(1) as f64;
            var[c].iter_mut().for_each(|s| *s = (*s / n).max(var_floor));
        }
        let total = data.len() as f64;
        let log_prior = count.map(|k| {
            if k == 0 {
                f64::NEG_INFINITY
            } else {
                (k as f64 / total).ln()
            }
        });
        Self {
            log_prior,
            mean,
            var,
        }
    }

    fn log_joint(&self, c: usize, row: &[f64]) -> f64 {
        if self.log_prior[c] == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let ll: f64 = row
            .iter()
            .zip(self.mean[c].iter().zip(&self.var[c]))
            .map(|(x, (m, v))| -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m) * (x - m) / v))
            .sum();
        self.log_prior[c] + ll
    }

    /// Log-posterior ratio `ln p(OK|x) - ln p(NOK|x)`.
    pub fn score(&self, row: &[f64]) -> f64 {
        let (a, b) = (self.log_joint(0, row), self.log_joint(1, row));
        if a == b {
            0.0
        } else {
            a - b
        }
    }
}
