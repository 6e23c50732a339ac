//! Gini CART with optional per-node feature subsampling and sample weights.

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::FitDiagnostics;
use crate::seed::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Features drawn per node; `None` uses all of them.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 10,
            max_features: Some(5),
            min_samples_split: 2,
        }
    }
}

impl TreeParams {
    pub(crate) fn validate(&self) -> Result<(), String> {
        if self.max_depth == 0 {
            return Err("max_depth must be at least 1".into());
        }
        if self.max_features == Some(0) {
            return Err("max_features must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Weighted class distribution of the training rows reaching the leaf.
    Leaf { distribution: Vec<f64> },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_classes: usize,
}

/// Mutable state threaded through recursive growth.
struct Grower<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [usize],
    weights: &'a [f64],
    n_classes: usize,
    params: &'a TreeParams,
    rng: Rng,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl DecisionTree {
    /// Unweighted fit over all rows. Feature draws use stream 0 of `seed`, so a
    /// one-tree forest without bootstrap reproduces this tree.
    pub fn fit(
        x: ArrayView2<'_, f64>,
        y: &[usize],
        n_classes: usize,
        params: &TreeParams,
        seed: u64,
    ) -> (Self, FitDiagnostics) {
        let weights = vec![1.0; y.len()];
        let tree = Self::fit_weighted(x, y, &weights, n_classes, params, seed::derive(seed, 0));
        let diagnostics = FitDiagnostics {
            training_loss: tree.weighted_error(x, y, &weights),
            iterations: tree.nodes.len(),
            converged: true,
        };
        (tree, diagnostics)
    }

    /// Rows with zero weight are ignored.
    pub(crate) fn fit_weighted(
        x: ArrayView2<'_, f64>,
        y: &[usize],
        weights: &[f64],
        n_classes: usize,
        params: &TreeParams,
        rng_seed: u64,
    ) -> Self {
        let mut grower = Grower {
            x,
            y,
            weights,
            n_classes,
            params,
            rng: seed::rng(rng_seed),
            nodes: Vec::new(),
        };
        let rows: Vec<usize> = (0..y.len()).filter(|&i| weights[i] > 0.0).collect();
        grower.grow(rows, 0);
        DecisionTree {
            nodes: grower.nodes,
            n_classes,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_distribution(&self, row: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { distribution } => return distribution,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        super::argmax(self.leaf_distribution(row))
    }

    pub fn scores(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for (i, row) in x.outer_iter().enumerate() {
            let row = row.to_vec();
            for (c, &p) in self.leaf_distribution(&row).iter().enumerate() {
                out[[i, c]] = p;
            }
        }
        out
    }

    pub(crate) fn weighted_error(&self, x: ArrayView2<'_, f64>, y: &[usize], weights: &[f64]) -> f64 {
        let total: f64 = weights.iter().sum();
        let wrong: f64 = x
            .outer_iter()
            .zip(y)
            .zip(weights)
            .filter(|((row, &label), _)| self.predict_row(&row.to_vec()) != label)
            .map(|(_, w)| w)
            .sum();
        wrong / total
    }
}

impl Grower<'_> {
    fn class_weights(&self, rows: &[usize]) -> Vec<f64> {
        let mut counts = vec![0.0; self.n_classes];
        for &i in rows {
            counts[self.y[i]] += self.weights[i];
        }
        counts
    }

    fn leaf(&mut self, counts: Vec<f64>) -> usize {
        let total: f64 = counts.iter().sum();
        let distribution = counts.into_iter().map(|c| c / total).collect();
        self.nodes.push(Node::Leaf { distribution });
        self.nodes.len() - 1
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let counts = self.class_weights(&rows);
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        if pure || depth >= self.params.max_depth || rows.len() < self.params.min_samples_split.max(2) {
            return self.leaf(counts);
        }
        let Some(best) = self.best_split(&rows, &counts) else {
            return self.leaf(counts);
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.x[[i, best.feature]] <= best.threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { distribution: vec![] });
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        at
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.ncols();
        match self.params.max_features {
            Some(m) if m < d => {
                let mut f = sample(&mut self.rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    /// Maximises `Σ_c L_c²/w_L + Σ_c R_c²/w_R`, which orders splits exactly
    /// as the weighted Gini decrease does. Ties keep the first candidate in
    /// (feature, threshold) ascending order.
    fn best_split(&mut self, rows: &[usize], counts: &[f64]) -> Option<Candidate> {
        let total: f64 = counts.iter().sum();
        let parent = counts.iter().map(|c| c * c).sum::<f64>() / total;
        let tolerance = 1e-12 * total.max(1.0);
        let mut best: Option<Candidate> = None;
        let mut order = rows.to_vec();
        for feature in self.candidate_features() {
            let x = self.x;
            order.sort_by(|&a, &b| x[[a, feature]].total_cmp(&x[[b, feature]]).then(a.cmp(&b)));
            let mut left = vec![0.0; self.n_classes];
            let mut left_total = 0.0;
            for pair in order.windows(2) {
                let (i, next) = (pair[0], pair[1]);
                left[self.y[i]] += self.weights[i];
                left_total += self.weights[i];
                let (v, v_next) = (x[[i, feature]], x[[next, feature]]);
                if v == v_next {
                    continue;
                }
                let right_total = total - left_total;
                if left_total <= 0.0 || right_total <= 0.0 {
                    continue;
                }
                let mut l2 = 0.0;
                let mut r2 = 0.0;
                for c in 0..self.n_classes {
                    let r = counts[c] - left[c];
                    l2 += left[c] * left[c];
                    r2 += r * r;
                }
                let score = l2 / left_total + r2 / right_total;
                if score <= parent + tolerance {
                    continue;
                }
                if best.as_ref().map_or(true, |b| score > b.score + tolerance) {
                    let mut threshold = v + (v_next - v) / 2.0;
                    if threshold >= v_next {
                        threshold = v;
                    }
                    best = Some(Candidate {
                        feature,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }
}
