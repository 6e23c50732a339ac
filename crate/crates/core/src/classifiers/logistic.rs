//! Multinomial logistic regression with an L2 penalty on the weights (not the
//! intercepts), minimised by L-BFGS.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{softmax_in_place, FitDiagnostics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    /// Inverse penalty strength, `λ = 1 / C`.
    pub c: f64,
    /// Gradient infinity-norm at which the solver stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            c: 1.0,
            tol: 1e-6,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogisticRegression {
    /// `[n_classes × n_features]`.
    weights: Array2<f64>,
    intercepts: Array1<f64>,
}

pub(crate) struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Limited-memory BFGS with Armijo backtracking. `objective` writes the
/// gradient into its second argument and returns the value.
pub(crate) fn lbfgs(
    mut objective: impl FnMut(&[f64], &mut [f64]) -> f64,
    x0: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> LbfgsResult {
    const MEMORY: usize = 10;
    const ARMIJO: f64 = 1e-4;
    let ftol = 64.0 * f64::EPSILON;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let inf_norm = |a: &[f64]| a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));

    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g);
    let mut history: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    for iter in 0..max_iter {
        if inf_norm(&g) <= tol {
            return LbfgsResult {
                x,
                value: f,
                iterations: iter,
                converged: true,
            };
        }
        let mut dir: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &dir);
            dir.iter_mut().zip(y).for_each(|(d, yi)| *d -= a * yi);
            alphas.push(a);
        }
        let gamma = history
            .back()
            .map_or(1.0 / inf_norm(&g).max(1.0), |(s, y, _)| dot(s, y) / dot(y, y));
        dir.iter_mut().for_each(|d| *d *= gamma);
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &dir);
            dir.iter_mut().zip(s).for_each(|(d, si)| *d += (a - b) * si);
        }
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            history.clear();
            dir = g.iter().map(|v| -v / inf_norm(&g).max(1.0)).collect();
            slope = dot(&g, &dir);
        }
        let mut step = 1.0;
        let mut f_new;
        loop {
            x_new.iter_mut().zip(&x).zip(&dir).for_each(|((xn, xi), d)| *xn = xi + step * d);
            f_new = objective(&x_new, &mut g_new);
            if f_new <= f + ARMIJO * step * slope || step < 1e-20 {
                break;
            }
            step *= 0.5;
        }
        if f_new > f {
            return LbfgsResult {
                x,
                value: f,
                iterations: iter + 1,
                converged: false,
            };
        }
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let relative_drop = (f - f_new) / f.abs().max(f_new.abs()).max(1.0);
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        if relative_drop <= ftol {
            return LbfgsResult {
                x,
                value: f,
                iterations: iter + 1,
                converged: true,
            };
        }
    }
    let converged = inf_norm(&g) <= tol;
    LbfgsResult {
        x,
        value: f,
        iterations: max_iter,
        converged,
    }
}

/// Mean cross-entropy plus `‖W‖² / (2 C n)`; gradient written to `grad`.
fn objective(
    x: ArrayView2<'_, f64>,
    onehot: &Array2<f64>,
    params: &[f64],
    grad: &mut [f64],
    n_classes: usize,
    c: f64,
) -> f64 {
    let (n, d) = x.dim();
    let (w, b) = unpack(params, n_classes, d);
    let mut probs = x.dot(&w.t());
    probs += &b;
    let mut loss = 0.0;
    for (mut row, target) in probs.outer_iter_mut().zip(onehot.outer_iter()) {
        let slice = row.as_slice_mut().expect("standard layout");
        let max = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + slice.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - slice.iter().zip(target).map(|(z, t)| z * t).sum::<f64>();
        softmax_in_place(slice);
    }
    let nf = n as f64;
    let penalty = 1.0 / (c * nf);
    let delta = (probs - onehot) / nf;
    let gw = delta.t().dot(&x) + &w * penalty;
    let gb = delta.sum_axis(Axis(0));
    grad[..n_classes * d].copy_from_slice(gw.as_slice().expect("standard layout"));
    grad[n_classes * d..].copy_from_slice(gb.as_slice().expect("standard layout"));
    loss / nf + 0.5 * penalty * w.iter().map(|v| v * v).sum::<f64>()
}

fn unpack(params: &[f64], k: usize, d: usize) -> (Array2<f64>, Array1<f64>) {
    let w = Array2::from_shape_vec((k, d), params[..k * d].to_vec()).expect("sized");
    let b = Array1::from_vec(params[k * d..].to_vec());
    (w, b)
}

impl LogisticRegression {
    pub fn fit(
        x: ArrayView2<'_, f64>,
        y: &[usize],
        n_classes: usize,
        params: &LogisticParams,
    ) -> (Self, FitDiagnostics) {
        let d = x.ncols();
        let onehot = Array2::from_shape_fn((y.len(), n_classes), |(i, c)| f64::from(u8::from(y[i] == c)));
        let result = lbfgs(
            |p, g| objective(x, &onehot, p, g, n_classes, params.c),
            vec![0.0; n_classes * (d + 1)],
            params.tol,
            params.max_iter,
        );
        let (weights, intercepts) = unpack(&result.x, n_classes, d);
        let diagnostics = FitDiagnostics {
            training_loss: result.value,
            iterations: result.iterations,
            converged: result.converged,
        };
        (LogisticRegression { weights, intercepts }, diagnostics)
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn scores(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights.t());
        z += &self.intercepts;
        for mut row in z.outer_iter_mut() {
            softmax_in_place(row.as_slice_mut().expect("standard layout"));
        }
        z
    }
}
