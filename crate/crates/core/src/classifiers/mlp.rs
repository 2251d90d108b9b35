//! Feed-forward network with rectifier hidden layers and a single sigmoid
//! output, trained full-batch with L-BFGS on the penalized log-loss.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logistic::{sigmoid, softplus};
use super::optim::{self, LbfgsOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub max_iter: usize,
    /// L2 penalty strength; the penalty is `alpha / (2 n) * sum(W^2)`.
    pub alpha: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![20, 10],
            max_iter: 3000,
            alpha: 1e-4,
            tol: 1e-4,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// fan_in x fan_out
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
}

/// Layer widths from input to output.
pub fn layer_sizes(n_inputs: usize, hidden: &[usize]) -> Vec<usize> {
    let mut sizes = vec![n_inputs];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    sizes
}

pub fn n_params(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn unpack(params: &[f64], sizes: &[usize]) -> Vec<Layer> {
    let mut offset = 0;
    sizes
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = Array2::from_shape_vec(
                (fan_in, fan_out),
                params[offset..offset + fan_in * fan_out].to_vec(),
            )
            .expect("sizes agree");
            offset += fan_in * fan_out;
            let bias = Array1::from(params[offset..offset + fan_out].to_vec());
            offset += fan_out;
            Layer { weights, bias }
        })
        .collect()
}

/// Glorot-uniform initialization; the sigmoid output layer uses the narrower
/// `sqrt(2 / (fan_in + fan_out))` bound.
pub fn initial_params(sizes: &[usize], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_params(sizes));
    let last = sizes.len() - 2;
    for (l, w) in sizes.windows(2).enumerate() {
        let factor = if l == last { 2.0 } else { 6.0 };
        let bound = (factor / (w[0] + w[1]) as f64).sqrt();
        for _ in 0..(w[0] * w[1] + w[1]) {
            out.push(rng.random_range(-bound..bound));
        }
    }
    out
}

/// Penalized mean log-loss and its gradient with respect to the flattened
/// parameters.
pub fn loss_and_gradient(
    params: &[f64],
    sizes: &[usize],
    x: ArrayView2<f64>,
    y: &[bool],
    alpha: f64,
    grad: &mut [f64],
) -> f64 {
    let n = x.nrows() as f64;
    let layers = unpack(params, sizes);
    let mut pre = Vec::with_capacity(layers.len());
    let mut acts: Vec<Array2<f64>> = vec![x.to_owned()];
    for (l, layer) in layers.iter().enumerate() {
        let z = acts[l].dot(&layer.weights) + &layer.bias;
        let a = if l + 1 == layers.len() {
            z.clone()
        } else {
            z.mapv(|v| v.max(0.0))
        };
        pre.push(z);
        acts.push(a);
    }
    let logits = acts.last().expect("output layer").column(0).to_owned();
    let mut loss = 0.0;
    let mut delta = Array2::zeros((x.nrows(), 1));
    for (i, (&z, &label)) in logits.iter().zip(y).enumerate() {
        let t = if label { 1.0 } else { 0.0 };
        loss += softplus(z) - t * z;
        delta[[i, 0]] = (sigmoid(z) - t) / n;
    }
    loss /= n;

    let mut grads: Vec<(Array2<f64>, Array1<f64>)> = Vec::with_capacity(layers.len());
    for l in (0..layers.len()).rev() {
        let gw = acts[l].t().dot(&delta) + &(&layers[l].weights * (alpha / n));
        let gb = delta.sum_axis(Axis(0));
        loss += 0.5 * alpha / n * layers[l].weights.iter().map(|w| w * w).sum::<f64>();
        if l > 0 {
            let back = delta.dot(&layers[l].weights.t());
            delta = back * &pre[l - 1].mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        }
        grads.push((gw, gb));
    }
    grads.reverse();
    let mut offset = 0;
    for (gw, gb) in grads {
        for v in gw.iter().chain(gb.iter()) {
            grad[offset] = *v;
            offset += 1;
        }
    }
    loss
}

impl MlpModel {
    pub fn fit(x: ArrayView2<f64>, y: &[bool], params: &MlpParams) -> Self {
        let sizes = layer_sizes(x.ncols(), &params.hidden);
        let opts = LbfgsOptions {
            max_iter: params.max_iter,
            grad_tol: params.tol,
            ..Default::default()
        };
        let res = optim::minimize(
            |p, g| loss_and_gradient(p, &sizes, x, y, params.alpha, g),
            initial_params(&sizes, params.seed),
            &opts,
        );
        MlpModel {
            layers: unpack(&res.x, &sizes),
        }
    }

    pub fn score(&self, row: ArrayView1<f64>) -> f64 {
        let mut a = row.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = a.dot(&layer.weights) + &layer.bias;
            a = if l + 1 == self.layers.len() {
                z
            } else {
                z.mapv(|v| v.max(0.0))
            };
        }
        sigmoid(a[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sizes = layer_sizes(4, &[5, 3]);
        let x = Array2::from_shape_fn((9, 4), |_| StandardNormal.sample(&mut rng));
        let y: Vec<bool> = (0..9).map(|i| i % 3 == 0).collect();
        for trial in 0..5 {
            let p = initial_params(&sizes, 100 + trial);
            let mut g = vec![0.0; p.len()];
            loss_and_gradient(&p, &sizes, x.view(), &y, 0.3, &mut g);
            let h = 1e-6;
            let mut scratch = vec![0.0; p.len()];
            for k in 0..p.len() {
                let mut up = p.clone();
                let mut dn = p.clone();
                up[k] += h;
                dn[k] -= h;
                let fd = (loss_and_gradient(&up, &sizes, x.view(), &y, 0.3, &mut scratch)
                    - loss_and_gradient(&dn, &sizes, x.view(), &y, 0.3, &mut scratch))
                    / (2.0 * h);
                let rel = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-4);
                assert!(rel < 1e-5, "param {k}: fd {fd} analytic {}", g[k]);
            }
        }
    }

    #[test]
    fn learns_xor() {
        let x = ndarray::array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let y = [false, true, true, false];
        let m = MlpModel::fit(x.view(), &y, &MlpParams { hidden: vec![8, 4], ..Default::default() });
        for (row, &label) in x.rows().into_iter().zip(&y) {
            assert_eq!(m.score(row) > 0.5, label);
        }
    }

    #[test]
    fn score_agrees_with_batch_forward() {
        let sizes = layer_sizes(3, &[4]);
        let p = initial_params(&sizes, 9);
        let model = MlpModel { layers: unpack(&p, &sizes) };
        let x = ndarray::array![[0.5, -1.0, 2.0]];
        let mut g = vec![0.0; p.len()];
        let loss = loss_and_gradient(&p, &sizes, x.view(), &[true], 0.0, &mut g);
        // loss for one positive sample is -ln(score)
        assert!((loss + model.score(x.row(0)).ln()).abs() < 1e-12);
    }
}
