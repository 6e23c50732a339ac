//! Second-order gradient boosting of regression trees (exact greedy splits,
//! Newton leaf weights, L2 leaf penalty).

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{softmax_in_place, FitDiagnostics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GboostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// Minimum hessian sum in each child.
    pub min_child_weight: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Minimum loss reduction for a split.
    pub gamma: f64,
}

impl Default for GboostParams {
    fn default() -> Self {
        GboostParams {
            n_rounds: 100,
            learning_rate: 0.3,
            max_depth: 6,
            min_child_weight: 1.0,
            lambda: 1.0,
            gamma: 0.0,
        }
    }
}

/// Smallest split gain kept; below this the node becomes a leaf.
const MIN_GAIN: f64 = 1e-6;
const MIN_HESSIAN: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq)]
enum RegNode {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<RegNode>,
}

impl RegressionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                RegNode::Leaf(v) => return *v,
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[RegNode], at: usize) -> usize {
            match &nodes[at] {
                RegNode::Leaf(_) => 0,
                RegNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone)]
pub struct GradientBoosting {
    /// One tree per round for two classes, one per class per round otherwise.
    rounds: Vec<Vec<RegressionTree>>,
    n_classes: usize,
    loss_history: Vec<f64>,
}

#[derive(Clone, Copy)]
struct SplitChoice {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct TreeBuilder<'a> {
    x: ArrayView2<'a, f64>,
    sorted: &'a [Vec<usize>],
    params: &'a GboostParams,
}

impl TreeBuilder<'_> {
    fn leaf_weight(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.params.lambda) * self.params.learning_rate
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.params.lambda)
    }

    /// Level-wise growth; every level scans each presorted feature once.
    fn build(&self, grad: &[f64], hess: &[f64]) -> RegressionTree {
        let n = grad.len();
        let mut position = vec![0usize; n];
        let mut sums = vec![(grad.iter().sum::<f64>(), hess.iter().sum::<f64>())];
        let mut nodes = vec![RegNode::Leaf(self.leaf_weight(sums[0].0, sums[0].1))];
        let mut frontier = vec![0usize];
        let mcw = self.params.min_child_weight;

        for _ in 0..self.params.max_depth {
            if frontier.is_empty() {
                break;
            }
            let mut slot = vec![usize::MAX; nodes.len()];
            for (s, &node) in frontier.iter().enumerate() {
                slot[node] = s;
            }
            let mut best: Vec<Option<SplitChoice>> = vec![None; frontier.len()];
            let mut gl = vec![0.0; frontier.len()];
            let mut hl = vec![0.0; frontier.len()];
            let mut last = vec![f64::NAN; frontier.len()];
            for (feature, order) in self.sorted.iter().enumerate() {
                gl.iter_mut().for_each(|v| *v = 0.0);
                hl.iter_mut().for_each(|v| *v = 0.0);
                last.iter_mut().for_each(|v| *v = f64::NAN);
                for &i in order {
                    let s = slot[position[i]];
                    if s == usize::MAX {
                        continue;
                    }
                    let v = self.x[[i, feature]];
                    if !last[s].is_nan() && v != last[s] {
                        let (g, h) = sums[frontier[s]];
                        let (gr, hr) = (g - gl[s], h - hl[s]);
                        if hl[s] >= mcw && hr >= mcw {
                            let gain = 0.5 * (self.score(gl[s], hl[s]) + self.score(gr, hr) - self.score(g, h))
                                - self.params.gamma;
                            if gain > MIN_GAIN && best[s].map_or(true, |b| gain > b.gain) {
                                let mut threshold = last[s] + (v - last[s]) / 2.0;
                                if threshold >= v {
                                    threshold = last[s];
                                }
                                best[s] = Some(SplitChoice {
                                    gain,
                                    feature,
                                    threshold,
                                });
                            }
                        }
                    }
                    gl[s] += grad[i];
                    hl[s] += hess[i];
                    last[s] = v;
                }
            }

            let mut next = Vec::new();
            let mut children = vec![(0usize, 0usize); frontier.len()];
            for (s, &node) in frontier.iter().enumerate() {
                let Some(choice) = best[s] else { continue };
                let left = nodes.len();
                nodes.push(RegNode::Leaf(0.0));
                nodes.push(RegNode::Leaf(0.0));
                sums.push((0.0, 0.0));
                sums.push((0.0, 0.0));
                nodes[node] = RegNode::Split {
                    feature: choice.feature,
                    threshold: choice.threshold,
                    left,
                    right: left + 1,
                };
                children[s] = (left, left + 1);
                next.push(left);
                next.push(left + 1);
            }
            if next.is_empty() {
                break;
            }
            for i in 0..n {
                let s = slot[position[i]];
                if s == usize::MAX {
                    continue;
                }
                if let RegNode::Split { feature, threshold, .. } = nodes[position[i]] {
                    let (l, r) = children[s];
                    position[i] = if self.x[[i, feature]] <= threshold { l } else { r };
                    let sum = &mut sums[position[i]];
                    sum.0 += grad[i];
                    sum.1 += hess[i];
                }
            }
            for &node in &next {
                nodes[node] = RegNode::Leaf(self.leaf_weight(sums[node].0, sums[node].1));
            }
            frontier = next;
        }
        RegressionTree { nodes }
    }
}

fn sigmoid(m: f64) -> f64 {
    1.0 / (1.0 + (-m).exp())
}

impl GradientBoosting {
    pub fn fit(
        x: ArrayView2<'_, f64>,
        y: &[usize],
        n_classes: usize,
        params: &GboostParams,
    ) -> (Self, FitDiagnostics) {
        let n = y.len();
        let sorted: Vec<Vec<usize>> = (0..x.ncols())
            .map(|f| {
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
                order
            })
            .collect();
        let builder = TreeBuilder {
            x,
            sorted: &sorted,
            params,
        };
        let outputs = if n_classes == 2 { 1 } else { n_classes };
        let mut margins = Array2::<f64>::zeros((n, outputs));
        let mut model = GradientBoosting {
            rounds: Vec::with_capacity(params.n_rounds),
            n_classes,
            loss_history: vec![log_loss(&margins, y, n_classes)],
        };
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        let rows: Vec<Vec<f64>> = x.outer_iter().map(|r| r.to_vec()).collect();
        for _ in 0..params.n_rounds {
            let probs = probabilities(&margins, n_classes);
            let mut trees = Vec::with_capacity(outputs);
            for k in 0..outputs {
                let class = if n_classes == 2 { 1 } else { k };
                let factor = if n_classes == 2 { 1.0 } else { 2.0 };
                for i in 0..n {
                    let p = probs[[i, class]];
                    grad[i] = p - f64::from(u8::from(y[i] == class));
                    hess[i] = (factor * p * (1.0 - p)).max(MIN_HESSIAN);
                }
                trees.push(builder.build(&grad, &hess));
            }
            for (i, row) in rows.iter().enumerate() {
                for (k, tree) in trees.iter().enumerate() {
                    margins[[i, k]] += tree.predict_row(row);
                }
            }
            model.rounds.push(trees);
            model.loss_history.push(log_loss(&margins, y, n_classes));
        }
        let diagnostics = FitDiagnostics {
            training_loss: *model.loss_history.last().expect("initial loss present"),
            iterations: params.n_rounds,
            converged: true,
        };
        (model, diagnostics)
    }

    /// Mean training log-loss before the first round and after each round.
    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    pub fn max_tree_depth(&self) -> usize {
        self.rounds.iter().flatten().map(RegressionTree::depth).max().unwrap_or(0)
    }

    fn margins(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let outputs = if self.n_classes == 2 { 1 } else { self.n_classes };
        let mut margins = Array2::zeros((x.nrows(), outputs));
        for (i, row) in x.outer_iter().enumerate() {
            let row = row.to_vec();
            for trees in &self.rounds {
                for (k, tree) in trees.iter().enumerate() {
                    margins[[i, k]] += tree.predict_row(&row);
                }
            }
        }
        margins
    }

    pub fn scores(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        probabilities(&self.margins(x), self.n_classes)
    }
}

fn probabilities(margins: &Array2<f64>, n_classes: usize) -> Array2<f64> {
    let n = margins.nrows();
    let mut out = Array2::zeros((n, n_classes));
    if n_classes == 2 {
        for i in 0..n {
            let p = sigmoid(margins[[i, 0]]);
            out[[i, 0]] = 1.0 - p;
            out[[i, 1]] = p;
        }
    } else {
        out.assign(margins);
        for mut row in out.outer_iter_mut() {
            softmax_in_place(row.as_slice_mut().expect("standard layout"));
        }
    }
    out
}

fn log_loss(margins: &Array2<f64>, y: &[usize], n_classes: usize) -> f64 {
    let n = y.len() as f64;
    if n_classes == 2 {
        // log(1 + e^{-s m}) with s = ±1, computed stably.
        y.iter()
            .enumerate()
            .map(|(i, &label)| {
                let m = margins[[i, 0]] * if label == 1 { 1.0 } else { -1.0 };
                (-m).max(0.0) + (-m.abs()).exp().ln_1p()
            })
            .sum::<f64>()
            / n
    } else {
        y.iter()
            .enumerate()
            .map(|(i, &label)| {
                let row = margins.row(i);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                lse - row[label]
            })
            .sum::<f64>()
            / n
    }
}
