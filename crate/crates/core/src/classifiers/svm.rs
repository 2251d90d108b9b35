//! Soft-margin SVM with a radial basis kernel, solved by sequential minimal
//! optimization with second-order working-set selection.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::logistic::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    /// Kernel width; `None` means `1 / (d * var(X))` of the training matrix.
    pub gamma: Option<f64>,
    pub max_iter: Option<usize>,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1000.0,
            tol: 1e-3,
            gamma: None,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub gamma: f64,
    pub support_vectors: Array2<f64>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
}

pub fn default_gamma(x: ArrayView2<f64>) -> f64 {
    let var = x.var(0.0);
    if var > 0.0 {
        1.0 / (x.ncols() as f64 * var)
    } else {
        1.0
    }
}

fn rbf(a: ArrayView1<f64>, b: ArrayView1<f64>, gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b.iter()).map(|(p, q)| (p - q) * (p - q)).sum();
    (-gamma * d2).exp()
}

const TAU: f64 = 1e-12;

impl SvmModel {
    pub fn fit(x: ArrayView2<f64>, y: &[bool], params: &SvmParams) -> Self {
        let n = x.nrows();
        let gamma = params.gamma.unwrap_or_else(|| default_gamma(x));
        let c = params.c;
        let ys: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
        let mut k = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v = rbf(x.row(i), x.row(j), gamma);
                k[[i, j]] = v;
                k[[j, i]] = v;
            }
        }
        let q = |i: usize, j: usize| ys[i] * ys[j] * k[[i, j]];

        let mut alpha = vec![0.0; n];
        let mut grad = vec![-1.0; n];
        let max_iter = params.max_iter.unwrap_or_else(|| (100 * n).max(10_000_000));
        let up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
        let low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

        let mut iterations = 0;
        while iterations < max_iter {
            let mut i = usize::MAX;
            let mut gmax = f64::NEG_INFINITY;
            for t in 0..n {
                if up(alpha[t], ys[t]) && -ys[t] * grad[t] > gmax {
                    gmax = -ys[t] * grad[t];
                    i = t;
                }
            }
            let mut j = usize::MAX;
            let mut gmin = f64::INFINITY;
            let mut best = f64::INFINITY;
            for t in 0..n {
                if !low(alpha[t], ys[t]) {
                    continue;
                }
                let v = -ys[t] * grad[t];
                gmin = gmin.min(v);
                if i != usize::MAX && v < gmax {
                    let b = gmax - v;
                    let a = k[[i, i]] + k[[t, t]] - 2.0 * k[[i, t]];
                    let obj = -b * b / if a > 0.0 { a } else { TAU };
                    if obj < best {
                        best = obj;
                        j = t;
                    }
                }
            }
            if i == usize::MAX || j == usize::MAX || gmax - gmin < params.tol {
                break;
            }
            iterations += 1;

            let (old_i, old_j) = (alpha[i], alpha[j]);
            let quad = {
                let a = k[[i, i]] + k[[j, j]] - 2.0 * k[[i, j]];
                if a > 0.0 {
                    a
                } else {
                    TAU
                }
            };
            if ys[i] != ys[j] {
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for t in 0..n {
                grad[t] += q(t, i) * di + q(t, j) * dj;
            }
        }

        // offset from free vectors, else the midpoint of the feasible interval
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut free_sum, mut n_free) = (0.0, 0usize);
        for t in 0..n {
            let yg = ys[t] * grad[t];
            if alpha[t] >= c {
                if ys[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if alpha[t] <= 0.0 {
                if ys[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free_sum += yg;
                n_free += 1;
            }
        }
        let rho = if n_free > 0 {
            free_sum / n_free as f64
        } else {
            (ub + lb) / 2.0
        };

        let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
        let mut support_vectors = Array2::zeros((sv.len(), x.ncols()));
        for (r, &t) in sv.iter().enumerate() {
            support_vectors.row_mut(r).assign(&x.row(t));
        }
        SvmModel {
            gamma,
            support_vectors,
            dual_coef: sv.iter().map(|&t| alpha[t] * ys[t]).collect(),
            rho,
            iterations,
        }
    }

    pub fn decision(&self, row: ArrayView1<f64>) -> f64 {
        self.support_vectors
            .rows()
            .into_iter()
            .zip(&self.dual_coef)
            .map(|(sv, a)| a * rbf(sv, row, self.gamma))
            .sum::<f64>()
            - self.rho
    }

    /// Logistic squashing of the decision value.
    pub fn score(&self, row: ArrayView1<f64>) -> f64 {
        sigmoid(self.decision(row))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn blobs() -> (Array2<f64>, Vec<bool>) {
        let x = Array2::from_shape_fn((30, 2), |(i, j)| {
            let centre = if i < 15 { -1.5 } else { 1.5 };
            centre + (((i * 13 + j * 7) % 11) as f64 - 5.0) * 0.08
        });
        (x, (0..30).map(|i| i >= 15).collect())
    }

    #[test]
    fn separable_data_has_no_training_errors_or_margin_violations() {
        let (x, y) = blobs();
        let loose = SvmModel::fit(x.view(), &y, &SvmParams::default());
        // the margin bound needs the solver run well past its default tolerance
        let tight = SvmModel::fit(x.view(), &y, &SvmParams { tol: 1e-10, ..Default::default() });
        for (row, &label) in x.rows().into_iter().zip(&y) {
            let sign = if label { 1.0 } else { -1.0 };
            assert!(sign * loose.decision(row) > 0.0);
            let margin = sign * tight.decision(row);
            assert!(1.0 - margin <= 1e-6, "margin {margin}");
        }
    }

    #[test]
    fn dual_coefficients_balance() {
        let (x, y) = blobs();
        let m = SvmModel::fit(x.view(), &y, &SvmParams::default());
        assert!(m.dual_coef.iter().sum::<f64>().abs() < 1e-9);
        assert!(m.dual_coef.iter().all(|a| a.abs() <= 1000.0 + 1e-9));
    }

    #[test]
    fn xor_with_rbf() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let y = [false, true, true, false];
        let m = SvmModel::fit(x.view(), &y, &SvmParams { gamma: Some(2.0), ..Default::default() });
        for (row, &label) in x.rows().into_iter().zip(&y) {
            assert_eq!(m.score(row) > 0.5, label);
        }
    }

    #[test]
    fn default_gamma_of_unit_variance_data() {
        let x = array![[1.0, -1.0], [-1.0, 1.0]];
        assert!((default_gamma(x.view()) - 0.5).abs() < 1e-15);
    }
}
