//! Multi-class AdaBoost (SAMME) over weighted decision stumps.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeParams};
use super::FitDiagnostics;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaboostParams {
    pub n_stages: usize,
    pub learning_rate: f64,
}

impl Default for AdaboostParams {
    fn default() -> Self {
        AdaboostParams {
            n_stages: 50,
            learning_rate: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Stage {
    pub stump: DecisionTree,
    pub weight: f64,
    /// Weighted training error under the sample weights of this stage.
    pub error: f64,
}

/// Scores are stage-weight-normalised votes.
#[derive(Debug, Clone)]
pub struct Adaboost {
    stages: Vec<Stage>,
    n_classes: usize,
}

impl Adaboost {
    /// Stops early when a stump is perfect (kept with weight 1) or no better
    /// than chance, `error >= 1 - 1/K` (dropped unless it is the first).
    pub fn fit(
        x: ArrayView2<'_, f64>,
        y: &[usize],
        n_classes: usize,
        params: &AdaboostParams,
        seed: u64,
    ) -> (Self, FitDiagnostics) {
        let n = y.len();
        let k = n_classes as f64;
        let chance = 1.0 - 1.0 / k;
        let stump_params = TreeParams {
            max_depth: 1,
            max_features: None,
            min_samples_split: 2,
        };
        let mut weights = vec![1.0 / n as f64; n];
        let mut stages: Vec<Stage> = Vec::new();
        let rows: Vec<Vec<f64>> = x.outer_iter().map(|r| r.to_vec()).collect();
        for m in 0..params.n_stages {
            let stump = DecisionTree::fit_weighted(
                x,
                y,
                &weights,
                n_classes,
                &stump_params,
                seed::derive(seed, m as u64),
            );
            let miss: Vec<bool> = rows.iter().zip(y).map(|(r, &t)| stump.predict_row(r) != t).collect();
            let total: f64 = weights.iter().sum();
            let error = miss.iter().zip(&weights).filter(|(m, _)| **m).map(|(_, w)| w).sum::<f64>() / total;
            if error <= 0.0 {
                stages.push(Stage {
                    stump,
                    weight: 1.0,
                    error,
                });
                break;
            }
            if error >= chance {
                if stages.is_empty() {
                    stages.push(Stage {
                        stump,
                        weight: 1.0,
                        error,
                    });
                }
                break;
            }
            let weight = params.learning_rate * (((1.0 - error) / error).ln() + (k - 1.0).ln());
            for (w, missed) in weights.iter_mut().zip(&miss) {
                if *missed {
                    *w *= weight.exp();
                }
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            stages.push(Stage { stump, weight, error });
        }
        let model = Adaboost { stages, n_classes };
        let s = model.scores(x);
        let wrong = s
            .outer_iter()
            .zip(y)
            .filter(|(r, &t)| super::argmax(r.as_slice().expect("standard layout")) != t)
            .count();
        let diagnostics = FitDiagnostics {
            training_loss: wrong as f64 / n as f64,
            iterations: model.stages.len(),
            converged: true,
        };
        (model, diagnostics)
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn scores(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let total: f64 = self.stages.iter().map(|s| s.weight).sum();
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for (i, row) in x.outer_iter().enumerate() {
            let row = row.to_vec();
            for stage in &self.stages {
                out[[i, stage.stump.predict_row(&row)]] += stage.weight / total;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stages_have_finite_weights_and_better_than_chance_error() {
        let n = 80;
        let x = Array2::from_shape_fn((n, 2), |(i, j)| ((i * (3 + j * 4)) % 13) as f64);
        let y: Vec<usize> = (0..n).map(|i| usize::from((i * 3) % 13 + (i * 7) % 13 > 12)).collect();
        let (model, _) = Adaboost::fit(x.view(), &y, 2, &AdaboostParams::default(), 0);
        assert!(!model.stages().is_empty());
        for stage in model.stages() {
            assert!(stage.weight.is_finite() && stage.weight > 0.0);
            assert!(stage.error < 0.5);
        }
        for row in model.scores(x.view()).outer_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn perfect_stump_stops_with_unit_weight() {
        let x = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let y: Vec<usize> = (0..10).map(|i| usize::from(i >= 5)).collect();
        let (model, diag) = Adaboost::fit(x.view(), &y, 2, &AdaboostParams::default(), 0);
        assert_eq!(model.stages().len(), 1);
        assert_eq!(model.stages()[0].weight, 1.0);
        assert_eq!(diag.training_loss, 0.0);
    }
}
