use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{softmax_in_place, FitDiagnostics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NaiveBayesParams {
    /// Added to every variance, as a fraction of the largest feature variance.
    pub var_smoothing: f64,
}

impl Default for NaiveBayesParams {
    fn default() -> Self {
        NaiveBayesParams { var_smoothing: 1e-9 }
    }
}

#[derive(Debug, Clone)]
pub struct GaussianNb {
    log_priors: Vec<f64>,
    means: Array2<f64>,
    variances: Array2<f64>,
}

impl GaussianNb {
    pub fn fit(
        x: ArrayView2<'_, f64>,
        y: &[usize],
        n_classes: usize,
        params: &NaiveBayesParams,
    ) -> (Self, FitDiagnostics) {
        let (n, d) = x.dim();
        let mut counts = vec![0.0_f64; n_classes];
        let mut means = Array2::<f64>::zeros((n_classes, d));
        for (row, &c) in x.outer_iter().zip(y) {
            counts[c] += 1.0;
            let mut m = means.row_mut(c);
            m += &row;
        }
        for c in 0..n_classes {
            let mut m = means.row_mut(c);
            m /= counts[c].max(1.0);
        }
        let mut variances = Array2::<f64>::zeros((n_classes, d));
        for (row, &c) in x.outer_iter().zip(y) {
            for j in 0..d {
                let diff = row[j] - means[[c, j]];
                variances[[c, j]] += diff * diff;
            }
        }
        let max_var = (0..d)
            .map(|j| {
                let col = x.column(j);
                let mean = col.sum() / n as f64;
                col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64
            })
            .fold(0.0, f64::max);
        // Strictly positive even when every feature is constant.
        let epsilon = (params.var_smoothing * max_var).max(f64::MIN_POSITIVE);
        for c in 0..n_classes {
            for j in 0..d {
                variances[[c, j]] = variances[[c, j]] / counts[c].max(1.0) + epsilon;
            }
        }
        let log_priors = counts.iter().map(|c| (c / n as f64).ln()).collect();
        let model = GaussianNb {
            log_priors,
            means,
            variances,
        };
        let probs = model.scores(x);
        let nll = y.iter().enumerate().map(|(i, &c)| -probs[[i, c]].max(1e-300).ln()).sum::<f64>() / n as f64;
        let diagnostics = FitDiagnostics {
            training_loss: nll,
            iterations: 1,
            converged: true,
        };
        (model, diagnostics)
    }

    pub fn scores(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let k = self.log_priors.len();
        let mut out = Array2::zeros((x.nrows(), k));
        for (i, row) in x.outer_iter().enumerate() {
            for c in 0..k {
                let mut log_joint = self.log_priors[c];
                for (j, &v) in row.iter().enumerate() {
                    let var = self.variances[[c, j]];
                    let diff = v - self.means[[c, j]];
                    log_joint -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + diff * diff / var);
                }
                out[[i, c]] = log_joint;
            }
            softmax_in_place(out.row_mut(i).into_slice().expect("standard layout"));
        }
        out
    }
}
