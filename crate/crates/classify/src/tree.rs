//! Weighted-Gini CART used directly and as the base learner of the ensembles.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use loopgrade_core::datagen::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Weighted `(OK - NOK) / total` of the training rows reaching the leaf.
    Leaf { score: f64 },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// Total weighted impurity decrease per column.
    pub importance: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Columns tried per split; `None` tries all.
    pub max_features: Option<usize>,
}

struct Builder<'a, R> {
    x: &'a [Vec<f64>],
    y: &'a [Label],
    w: &'a [f64],
    params: TreeParams,
    rng: &'a mut R,
    nodes: Vec<Node>,
    importance: Vec<f64>,
}

fn gini(ok: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = ok / total;
    2.0 * p * (1.0 - p)
}

impl<R: Rng> Builder<'_, R> {
    fn weights(&self, rows: &[usize]) -> (f64, f64) {
        rows.iter().fold((0.0, 0.0), |(ok, tot), &i| {
            let w = self.w[i];
            (ok + if self.y[i] == Label::Ok { w } else { 0.0 }, tot + w)
        })
    }

    fn leaf(&mut self, ok: f64, total: f64) -> usize {
        let score = if total > 0.0 { (2.0 * ok - total) / total } else { 0.0 };
        self.nodes.push(Node::Leaf { score });
        self.nodes.len() - 1
    }

    fn build(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let (ok, total) = self.weights(rows);
        let min_leaf = self.params.min_samples_leaf.max(1);
        let pure = ok <= 0.0 || ok >= total;
        if depth >= self.params.max_depth || rows.len() < 2 * min_leaf || pure {
            return self.leaf(ok, total);
        }
        let d = self.x[rows[0]].len();
        let candidates: Vec<usize> = match self.params.max_features {
            Some(m) if m < d => {
                let mut v = sample(self.rng, d, m.max(1)).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..d).collect(),
        };
        let parent = gini(ok, total);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<usize> = rows.to_vec();
        for &f in &candidates {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let (mut lok, mut ltot) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let i = order[k];
                ltot += self.w[i];
                if self.y[i] == Label::Ok {
                    lok += self.w[i];
                }
                let n_left = k + 1;
                if n_left < min_leaf || order.len() - n_left < min_leaf {
                    continue;
                }
                let (a, b) = (self.x[i][f], self.x[order[k + 1]][f]);
                if a >= b {
                    continue;
                }
                let (rok, rtot) = (ok - lok, total - ltot);
                let child = ltot * gini(lok, ltot) + rtot * gini(rok, rtot);
                let gain = parent * total - child;
                if best.is_none_or(|(g, _, _)| gain > g + 1e-12 * total) {
                    let mid = 0.5 * (a + b);
                    let threshold = if mid < b { mid } else { a };
                    best = Some((gain, f, threshold));
                }
            }
        }
        let Some((gain, feature, threshold)) = best else {
            return self.leaf(ok, total);
        };
        if gain <= 0.0 {
            return self.leaf(ok, total);
        }
        self.importance[feature] += gain;
        let mut split = 0;
        for k in 0..rows.len() {
            if self.x[rows[k]][feature] <= threshold {
                rows.swap(k, split);
                split += 1;
            }
        }
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { score: 0.0 });
        let (lrows, rrows) = rows.split_at_mut(split);
        let left = self.build(lrows, depth + 1);
        let right = self.build(rrows, depth + 1);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }
}

impl Tree {
    /// Grows a tree on the given rows (repeats allowed) with per-row weights.
    pub fn fit<R: Rng>(
        x: &[Vec<f64>],
        y: &[Label],
        w: &[f64],
        rows: &[usize],
        params: TreeParams,
        rng: &mut R,
    ) -> Self {
        let d = x.first().map_or(0, |r| r.len());
        let mut b = Builder {
            x,
            y,
            w,
            params,
            rng,
            nodes: Vec::new(),
            importance: vec![0.0; d],
        };
        let mut rows = rows.to_vec();
        if rows.is_empty() {
            b.leaf(0.0, 0.0);
        } else {
            b.build(&mut rows, 0);
        }
        Self {
            nodes: b.nodes,
            importance: b.importance,
        }
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { score } => return score,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}
