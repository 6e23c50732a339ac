use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::FitDiagnostics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

/// Bonus added to the class of the nearest neighbour so that vote ties
/// resolve toward it while the scores stay near the raw vote fractions.
pub const NEAREST_TIE_BONUS: f64 = 1e-6;

/// Euclidean k-nearest-neighbour vote. Equal distances are ordered by
/// training index.
#[derive(Debug, Clone)]
pub struct Knn {
    train: Array2<f64>,
    labels: Vec<usize>,
    n_classes: usize,
    k: usize,
}

impl Knn {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize, params: &KnnParams) -> (Self, FitDiagnostics) {
        let model = Knn {
            train: x.to_owned(),
            labels: y.to_vec(),
            n_classes,
            k: params.k.min(y.len()),
        };
        // The model memorises its training rows; there is no fitted objective.
        let diagnostics = FitDiagnostics {
            training_loss: 0.0,
            iterations: 0,
            converged: true,
        };
        (model, diagnostics)
    }

    /// Training indices of the `k` nearest rows, nearest first.
    pub fn neighbours(&self, query: &[f64]) -> Vec<usize> {
        let mut dist: Vec<(f64, usize)> = self
            .train
            .outer_iter()
            .enumerate()
            .map(|(i, row)| {
                let d: f64 = row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, i)
            })
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, order);
            dist.truncate(self.k);
        }
        dist.sort_by(order);
        dist.into_iter().map(|(_, i)| i).collect()
    }

    pub fn scores(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for (i, row) in x.outer_iter().enumerate() {
            let near = self.neighbours(&row.to_vec());
            let mut votes = vec![0.0; self.n_classes];
            for &j in &near {
                votes[self.labels[j]] += 1.0;
            }
            let top = votes.iter().copied().fold(0.0, f64::max);
            if votes.iter().filter(|&&v| v == top).count() > 1 {
                let first = self.labels[near[0]];
                if votes[first] == top {
                    votes[first] += NEAREST_TIE_BONUS;
                }
            }
            let total: f64 = votes.iter().sum();
            for (c, v) in votes.into_iter().enumerate() {
                out[[i, c]] = v / total;
            }
        }
        out
    }
}
