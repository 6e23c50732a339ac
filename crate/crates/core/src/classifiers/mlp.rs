//! Feed-forward ReLU network with a softmax output, trained on mean
//! cross-entropy plus an L2 weight penalty by mini-batch Adam.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{softmax_in_place, FitDiagnostics};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// L2 penalty on weights (biases unpenalised).
    pub alpha: f64,
    /// Training stops once the epoch loss fails to improve by `tol` for
    /// more than `n_iter_no_change` consecutive epochs.
    pub tol: f64,
    pub n_iter_no_change: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![16],
            max_epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            alpha: 1e-4,
            tol: 1e-4,
            n_iter_no_change: 10,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    /// `[fan_in × fan_out]`.
    weights: Array2<f64>,
    bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    loss_curve: Vec<f64>,
}

/// Gradients in the same shapes as the layers.
struct Gradients {
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

impl Network {
    /// Glorot-uniform initialisation of weights and biases.
    pub fn new(n_inputs: usize, hidden: &[usize], n_classes: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed::derive_tag(seed, "mlp-init"));
        let mut sizes = vec![n_inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(n_classes);
        let layers = sizes
            .windows(2)
            .map(|pair| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut draw = || rng.random_range(-bound..bound);
                let weights = Array2::from_shape_simple_fn((fan_in, fan_out), &mut draw);
                let bias = Array1::from_shape_simple_fn(fan_out, &mut draw);
                Layer { weights, bias }
            })
            .collect();
        Network {
            layers,
            loss_curve: Vec::new(),
        }
    }

    /// Input width, hidden widths, output width.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].weights.nrows()];
        sizes.extend(self.layers.iter().map(|l| l.weights.ncols()));
        sizes
    }

    /// Zeroes the output layer; the network then predicts the uniform distribution.
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.last_mut().expect("at least one layer");
        last.weights.fill(0.0);
        last.bias.fill(0.0);
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flattened parameters: per layer, weights row-major then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "parameter count");
        let mut at = 0;
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *v = flat[at];
                at += 1;
            }
        }
    }

    /// Epoch-mean training loss, one entry per completed epoch.
    pub fn loss_curve(&self) -> &[f64] {
        &self.loss_curve
    }

    /// Pre-activations of every layer for a batch.
    fn forward(&self, x: ArrayView2<'_, f64>) -> Vec<Array2<f64>> {
        let mut outputs: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = match i {
                0 => x.dot(&layer.weights),
                _ => outputs[i - 1].dot(&layer.weights),
            };
            z += &layer.bias;
            if i + 1 < self.layers.len() {
                z.mapv_inplace(|v| v.max(0.0));
            } else {
                for mut row in z.outer_iter_mut() {
                    softmax_in_place(row.as_slice_mut().expect("standard layout"));
                }
            }
            outputs.push(z);
        }
        outputs
    }

    pub fn scores(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.forward(x).pop().expect("at least one layer")
    }

    fn penalty(&self) -> f64 {
        self.layers.iter().map(|l| l.weights.iter().map(|w| w * w).sum::<f64>()).sum()
    }

    /// Batch loss `mean CE + α‖W‖² / (2 n)` and its gradient.
    fn backprop(&self, x: ArrayView2<'_, f64>, y: &[usize], alpha: f64) -> (f64, Gradients) {
        let n = y.len() as f64;
        let outputs = self.forward(x);
        let probs = outputs.last().expect("at least one layer");
        let ce: f64 = y.iter().enumerate().map(|(i, &c)| -probs[[i, c]].max(1e-300).ln()).sum::<f64>() / n;
        let loss = ce + 0.5 * alpha * self.penalty() / n;

        let mut delta = probs.clone();
        for (i, &c) in y.iter().enumerate() {
            delta[[i, c]] -= 1.0;
        }
        delta /= n;
        let depth = self.layers.len();
        let mut gw = Vec::with_capacity(depth);
        let mut gb = Vec::with_capacity(depth);
        for l in (0..depth).rev() {
            let input = if l == 0 { x } else { outputs[l - 1].view() };
            let mut w_grad = input.t().dot(&delta);
            w_grad.scaled_add(alpha / n, &self.layers[l].weights);
            gw.push(w_grad);
            gb.push(delta.sum_axis(Axis(0)));
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].weights.t());
                ndarray::Zip::from(&mut back)
                    .and(&outputs[l - 1])
                    .for_each(|d, &a| if a <= 0.0 { *d = 0.0 });
                delta = back;
            }
        }
        gw.reverse();
        gb.reverse();
        (loss, Gradients { weights: gw, biases: gb })
    }

    /// Batch loss and flattened gradient (same order as [`params`](Self::params)).
    pub fn loss_and_gradient(&self, x: ArrayView2<'_, f64>, y: &[usize], alpha: f64) -> (f64, Vec<f64>) {
        let (loss, grads) = self.backprop(x, y, alpha);
        let mut flat = Vec::with_capacity(self.n_params());
        for (w, b) in grads.weights.iter().zip(&grads.biases) {
            flat.extend(w.iter());
            flat.extend(b.iter());
        }
        (loss, flat)
    }

    /// Batch loss only.
    pub fn loss(&self, x: ArrayView2<'_, f64>, y: &[usize], alpha: f64) -> f64 {
        let n = y.len() as f64;
        let probs = self.scores(x);
        let ce: f64 = y.iter().enumerate().map(|(i, &c)| -probs[[i, c]].max(1e-300).ln()).sum::<f64>() / n;
        ce + 0.5 * alpha * self.penalty() / n
    }

    pub fn fit(
        x: ArrayView2<'_, f64>,
        y: &[usize],
        n_classes: usize,
        params: &MlpParams,
        seed: u64,
    ) -> (Self, FitDiagnostics) {
        let n = y.len();
        let mut net = Network::new(x.ncols(), &params.hidden, n_classes, seed);
        let mut rng = seed::rng(seed::derive_tag(seed, "mlp-shuffle"));
        let mut m_w: Vec<Array2<f64>> = net.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect();
        let mut v_w = m_w.clone();
        let mut m_b: Vec<Array1<f64>> = net.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect();
        let mut v_b = m_b.clone();
        let mut order: Vec<usize> = (0..n).collect();
        let mut step = 0i32;
        let mut best = f64::INFINITY;
        let mut stale = 0;
        let mut converged = false;
        let (b1, b2) = (params.beta1, params.beta2);
        for _ in 0..params.max_epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(params.batch_size) {
                let xb = x.select(Axis(0), batch);
                let yb: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
                let (loss, grads) = net.backprop(xb.view(), &yb, params.alpha);
                epoch_loss += loss * batch.len() as f64;
                step += 1;
                let lr = params.learning_rate * (1.0 - b2.powi(step)).sqrt() / (1.0 - b1.powi(step));
                let eps = params.epsilon;
                for (l, layer) in net.layers.iter_mut().enumerate() {
                    ndarray::Zip::from(&mut layer.weights)
                        .and(&mut m_w[l])
                        .and(&mut v_w[l])
                        .and(&grads.weights[l])
                        .for_each(|p, m, v, &g| {
                            *m = b1 * *m + (1.0 - b1) * g;
                            *v = b2 * *v + (1.0 - b2) * g * g;
                            *p -= lr * *m / (v.sqrt() + eps);
                        });
                    ndarray::Zip::from(&mut layer.bias)
                        .and(&mut m_b[l])
                        .and(&mut v_b[l])
                        .and(&grads.biases[l])
                        .for_each(|p, m, v, &g| {
                            *m = b1 * *m + (1.0 - b1) * g;
                            *v = b2 * *v + (1.0 - b2) * g * g;
                            *p -= lr * *m / (v.sqrt() + eps);
                        });
                }
            }
            let epoch_loss = epoch_loss / n as f64;
            net.loss_curve.push(epoch_loss);
            if epoch_loss > best - params.tol {
                stale += 1;
            } else {
                stale = 0;
            }
            if epoch_loss < best {
                best = epoch_loss;
            }
            if stale > params.n_iter_no_change {
                converged = true;
                break;
            }
        }
        let diagnostics = FitDiagnostics {
            training_loss: net.loss_curve.last().copied().unwrap_or_else(|| net.loss(x, y, params.alpha)),
            iterations: net.loss_curve.len(),
            converged,
        };
        (net, diagnostics)
    }
}
