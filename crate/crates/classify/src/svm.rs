//! C-SVM with an RBF kernel, trained by SMO with second-order working-set
//! selection.

use std::collections::VecDeque;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{sign, Samples};

/// KKT violation tolerance.
pub const TOLERANCE: f64 = 1e-3;
const TAU: f64 = 1e-12;
/// Upper bound on kernel-row cache size in bytes.
const CACHE_BYTES: usize = 400 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svm {
    pub gamma: f64,
    /// Support vectors with their `alpha_i y_i`.
    pub support: Vec<Vec<f64>>,
    pub coef: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d).exp()
}

struct RowCache<'a> {
    x: &'a [Vec<f64>],
    gamma: f64,
    rows: Vec<Option<Arc<[f32]>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> RowCache<'a> {
    fn new(x: &'a [Vec<f64>], gamma: f64) -> Self {
        let n = x.len();
        let capacity = (CACHE_BYTES / (4 * n.max(1))).max(2);
        Self {
            x,
            gamma,
            rows: vec![None; n],
            order: VecDeque::new(),
            capacity,
        }
    }

    fn row(&mut self, i: usize) -> Arc<[f32]> {
        if let Some(r) = &self.rows[i] {
            return r.clone();
        }
        let xi = &self.x[i];
        let gamma = self.gamma;
        let r: Arc<[f32]> = self
            .x
            .par_iter()
            .map(|xj| rbf(xi, xj, gamma) as f32)
            .collect::<Vec<_>>()
            .into();
        if self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.rows[old] = None;
            }
        }
        self.order.push_back(i);
        self.rows[i] = Some(r.clone());
        r
    }
}

impl Svm {
    pub fn fit(data: &Samples, c: f64, gamma: f64) -> Self {
        let n = data.len();
        let y: Vec<f64> = data.y.iter().map(|&l| sign(l)).collect();
        let mut alpha = vec![0.0f64; n];
        let mut g = vec![-1.0f64; n];
        let mut cache = RowCache::new(&data.x, gamma);
        let max_iter = (100 * n).max(10_000_000);
        let up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
        let low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);
        let mut iterations = 0;
        let mut converged = n == 0;
        while iterations < max_iter && n > 0 {
            let mut gmax = f64::NEG_INFINITY;
            let mut i = usize::MAX;
            for t in 0..n {
                if up(alpha[t], y[t]) && -y[t] * g[t] >= gmax {
                    gmax = -y[t] * g[t];
                    i = t;
                }
            }
            if i == usize::MAX {
                converged = true;
                break;
            }
            let ki = cache.row(i);
            let mut gmax2 = f64::NEG_INFINITY;
            let mut best = f64::INFINITY;
            let mut j = usize::MAX;
            for t in 0..n {
                if !low(alpha[t], y[t]) {
                    continue;
                }
                let v = y[t] * g[t];
                gmax2 = gmax2.max(v);
                let b = gmax + v;
                if b > 0.0 {
                    let a = (2.0 - 2.0 * ki[t] as f64).max(TAU);
                    let obj = -b * b / a;
                    if obj <= best {
                        best = obj;
                        j = t;
                    }
                }
            }
            if gmax + gmax2 < TOLERANCE || j == usize::MAX {
                converged = true;
                break;
            }
            iterations += 1;
            let kj = cache.row(j);
            let kij = ki[j] as f64;
            let (old_i, old_j) = (alpha[i], alpha[j]);
            if y[i] != y[j] {
                let quad = (2.0 - 2.0 * kij).max(TAU);
                let delta = (-g[i] - g[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let quad = (2.0 - 2.0 * kij).max(TAU);
                let delta = (g[i] - g[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            let (si, sj) = (y[i] * di, y[j] * dj);
            for t in 0..n {
                g[t] += y[t] * (si * ki[t] as f64 + sj * kj[t] as f64);
            }
        }
        let rho = Self::rho(&alpha, &g, &y, c);
        let mut support = Vec::new();
        let mut coef = Vec::new();
        for t in 0..n {
            if alpha[t] > 0.0 {
                support.push(data.x[t].clone());
                coef.push(alpha[t] * y[t]);
            }
        }
        Self {
            gamma,
            support,
            coef,
            rho,
            iterations,
            converged,
        }
    }

    fn rho(alpha: &[f64], g: &[f64], y: &[f64], c: f64) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut free, mut sum) = (0usize, 0.0);
        for t in 0..alpha.len() {
            let yg = y[t] * g[t];
            if alpha[t] >= c {
                if y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if alpha[t] <= 0.0 {
                if y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                sum += yg;
            }
        }
        if free > 0 {
            sum / free as f64
        } else if ub.is_finite() && lb.is_finite() {
            0.5 * (ub + lb)
        } else {
            0.0
        }
    }

    /// Decision value `sum alpha_i y_i K(x_i, x) - rho`.
    pub fn score(&self, row: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, a)| a * rbf(s, row, self.gamma))
            .sum::<f64>()
            - self.rho
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use loopgrade_core::datagen::Label;

    #[test]
    fn two_points_split_at_the_midpoint() {
        let data = Samples::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![Label::Ok, Label::Nok]);
        let m = Svm::fit(&data, 10.0, 0.5);
        assert!(m.converged);
        assert!(m.score(&[0.5, 0.5]).abs() < 1e-6);
        assert!(m.score(&[0.0, 0.0]) > 0.0);
        assert!(m.score(&[1.0, 1.0]) < 0.0);
    }

    #[test]
    fn fits_a_ring() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for k in 0..120 {
            let th = k as f64 * 0.37;
            let r = if k % 2 == 0 { 0.5 } else { 2.0 };
            x.push(vec![r * th.cos(), r * th.sin()]);
            y.push(if k % 2 == 0 { Label::Ok } else { Label::Nok });
        }
        let data = Samples::new(x, y);
        let m = Svm::fit(&data, 10.0, 1.0);
        assert!(m.converged);
        for (r, &l) in data.x.iter().zip(&data.y) {
            assert_eq!(crate::label_of(m.score(r)), l);
        }
    }
}
