use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::optim::{self, LbfgsOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticParams {
    /// L2 penalty strength on the weights (not the bias); 0 disables it.
    pub l2: f64,
    pub max_iter: usize,
    /// Gradient infinity-norm tolerance.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            l2: 0.0,
            max_iter: 10_000,
            tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticModel {
    pub fn decision(&self, row: ArrayView1<f64>) -> f64 {
        self.bias + row.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>()
    }

    pub fn score(&self, row: ArrayView1<f64>) -> f64 {
        sigmoid(self.decision(row))
    }

    /// Mean log-loss plus the L2 term, and its gradient (weights, then bias).
    pub fn objective(params: &[f64], x: ArrayView2<f64>, y: &[bool], l2: f64, grad: &mut [f64]) -> f64 {
        let (n, d) = x.dim();
        let (w, b) = (&params[..d], params[d]);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for (row, &label) in x.rows().into_iter().zip(y) {
            let z = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
            let t = if label { 1.0 } else { 0.0 };
            loss += softplus(z) - t * z;
            let r = sigmoid(z) - t;
            for (g, xv) in grad[..d].iter_mut().zip(row.iter()) {
                *g += r * xv;
            }
            grad[d] += r;
        }
        let inv = 1.0 / n as f64;
        grad.iter_mut().for_each(|g| *g *= inv);
        let mut penalty = 0.0;
        for j in 0..d {
            penalty += w[j] * w[j];
            grad[j] += l2 * w[j];
        }
        loss * inv + 0.5 * l2 * penalty
    }

    pub fn fit(x: ArrayView2<f64>, y: &[bool], params: &LogisticParams) -> Self {
        let d = x.ncols();
        let opts = LbfgsOptions {
            max_iter: params.max_iter,
            grad_tol: params.tol,
            ..Default::default()
        };
        let res = optim::minimize(
            |p, g| Self::objective(p, x, y, params.l2, g),
            vec![0.0; d + 1],
            &opts,
        );
        LogisticModel {
            weights: res.x[..d].to_vec(),
            bias: res.x[d],
        }
    }
}
