use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeParams};
use super::FitDiagnostics;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 10,
            max_features: Some(5),
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn tree(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            max_features: self.max_features,
            ..TreeParams::default()
        }
    }
}

/// Scores average the trees' leaf class distributions; with pure leaves
/// this is the fraction of trees voting for each class.
#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    n_classes: usize,
}

impl RandomForest {
    /// Tree `i` draws features from stream `i` of `seed`.
    pub fn fit(
        x: ArrayView2<'_, f64>,
        y: &[usize],
        n_classes: usize,
        params: &ForestParams,
        seed: u64,
    ) -> (Self, FitDiagnostics) {
        let n = y.len();
        let tree_params = params.tree();
        let trees: Vec<DecisionTree> = (0..params.n_trees)
            .map(|i| {
                let stream = seed::derive(seed, i as u64);
                let weights = if params.bootstrap {
                    let mut rng = seed::rng(seed::derive_tag(stream, "bootstrap"));
                    let mut w = vec![0.0; n];
                    for _ in 0..n {
                        w[rng.random_range(0..n)] += 1.0;
                    }
                    w
                } else {
                    vec![1.0; n]
                };
                DecisionTree::fit_weighted(x, y, &weights, n_classes, &tree_params, stream)
            })
            .collect();
        let forest = RandomForest { trees, n_classes };
        let predictions = forest.predict_rows(x);
        let wrong = predictions.iter().zip(y).filter(|(p, t)| p != t).count();
        let diagnostics = FitDiagnostics {
            training_loss: wrong as f64 / n as f64,
            iterations: params.n_trees,
            converged: true,
        };
        (forest, diagnostics)
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn scores(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        let share = 1.0 / self.trees.len() as f64;
        for (i, row) in x.outer_iter().enumerate() {
            let row = row.to_vec();
            for tree in &self.trees {
                for (c, p) in tree.leaf_distribution(&row).iter().enumerate() {
                    out[[i, c]] += share * p;
                }
            }
        }
        out
    }

    fn predict_rows(&self, x: ArrayView2<'_, f64>) -> Vec<usize> {
        self.scores(x)
            .outer_iter()
            .map(|r| super::argmax(r.as_slice().expect("standard layout")))
            .collect()
    }
}
