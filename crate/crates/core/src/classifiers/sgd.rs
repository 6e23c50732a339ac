//! Linear hinge-loss classifier trained by per-sample SGD with an L2
//! penalty and the `1 / (α (t0 + t))` step schedule. One-vs-rest for more
//! than two classes.

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::FitDiagnostics;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdParams {
    pub alpha: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub n_iter_no_change: usize,
}

impl Default for SgdParams {
    fn default() -> Self {
        SgdParams {
            alpha: 1e-4,
            max_iter: 1000,
            tol: 1e-3,
            n_iter_no_change: 5,
        }
    }
}

#[derive(Debug, Clone)]
struct BinaryLinear {
    weights: Array1<f64>,
    intercept: f64,
}

/// Scores are raw margins, `[-m, m]` for two classes.
#[derive(Debug, Clone)]
pub struct SgdLinear {
    models: Vec<BinaryLinear>,
    n_classes: usize,
}

struct BinaryFit {
    model: BinaryLinear,
    epochs: usize,
    converged: bool,
    objective: f64,
}

fn fit_binary(x: ArrayView2<'_, f64>, target: &[f64], params: &SgdParams, seed: u64) -> BinaryFit {
    let (n, d) = x.dim();
    let alpha = params.alpha;
    let typical = (1.0 / alpha.sqrt()).sqrt();
    let optimal_init = 1.0 / (typical * alpha);
    let mut w = Array1::<f64>::zeros(d);
    let mut b = 0.0;
    let mut rng = seed::rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 1.0_f64;
    let mut best_loss = f64::INFINITY;
    let mut stale = 0;
    let mut epochs = 0;
    let mut converged = false;
    let mut last_loss = 0.0;
    for _ in 0..params.max_iter {
        epochs += 1;
        order.shuffle(&mut rng);
        let mut sum_loss = 0.0;
        for &i in &order {
            let row = x.row(i);
            let y = target[i];
            let margin = row.dot(&w) + b;
            let z = margin * y;
            sum_loss += (1.0 - z).max(0.0);
            let eta = 1.0 / (alpha * (optimal_init + t - 1.0));
            w *= (1.0 - eta * alpha).max(0.0);
            if z <= 1.0 {
                w.scaled_add(eta * y, &row);
                b += eta * y;
            }
            t += 1.0;
        }
        last_loss = sum_loss;
        if sum_loss > best_loss - params.tol * n as f64 {
            stale += 1;
        } else {
            stale = 0;
        }
        if sum_loss < best_loss {
            best_loss = sum_loss;
        }
        if stale >= params.n_iter_no_change {
            converged = true;
            break;
        }
    }
    let objective = last_loss / n as f64 + 0.5 * alpha * w.dot(&w);
    BinaryFit {
        model: BinaryLinear { weights: w, intercept: b },
        epochs,
        converged,
        objective,
    }
}

impl SgdLinear {
    pub fn fit(
        x: ArrayView2<'_, f64>,
        y: &[usize],
        n_classes: usize,
        params: &SgdParams,
        seed: u64,
    ) -> (Self, FitDiagnostics) {
        let positives: Vec<usize> = if n_classes == 2 { vec![1] } else { (0..n_classes).collect() };
        let fits: Vec<BinaryFit> = positives
            .iter()
            .map(|&class| {
                let target: Vec<f64> = y.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
                fit_binary(x, &target, params, seed::derive(seed::derive_tag(seed, "sgd"), class as u64))
            })
            .collect();
        let diagnostics = FitDiagnostics {
            training_loss: fits.iter().map(|f| f.objective).sum::<f64>() / fits.len() as f64,
            iterations: fits.iter().map(|f| f.epochs).max().unwrap_or(0),
            converged: fits.iter().all(|f| f.converged),
        };
        let model = SgdLinear {
            models: fits.into_iter().map(|f| f.model).collect(),
            n_classes,
        };
        (model, diagnostics)
    }

    pub fn scores(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for (i, row) in x.outer_iter().enumerate() {
            let margins: Vec<f64> = self.models.iter().map(|m| row.dot(&m.weights) + m.intercept).collect();
            if self.n_classes == 2 {
                out[[i, 0]] = -margins[0];
                out[[i, 1]] = margins[0];
            } else {
                for (c, m) in margins.into_iter().enumerate() {
                    out[[i, c]] = m;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_binary_problem_is_learned() {
        let n = 60;
        let x = Array2::from_shape_fn((n, 2), |(i, j)| {
            let side = if i % 2 == 0 { 1.0 } else { -1.0 };
            side * (1.0 + (i % 5) as f64 * 0.1) + j as f64 * 0.01
        });
        let y: Vec<usize> = (0..n).map(|i| usize::from(i % 2 == 0)).collect();
        let (m, diag) = SgdLinear::fit(x.view(), &y, 2, &SgdParams::default(), 1);
        let s = m.scores(x.view());
        for (i, &label) in y.iter().enumerate() {
            assert_eq!(s[[i, 0]], -s[[i, 1]]);
            assert_eq!(usize::from(s[[i, 1]] > s[[i, 0]]), label);
        }
        assert!(diag.converged && diag.training_loss.is_finite());
    }
}
