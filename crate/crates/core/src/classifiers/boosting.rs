//! Gradient boosting of depth-limited regression trees on the logistic loss.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::logistic::{sigmoid, softplus};
use super::tree::{Criterion, Node, Tree, TreeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradientBoostingParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for GradientBoostingParams {
    fn default() -> Self {
        GradientBoostingParams {
            n_estimators: 100,
            learning_rate: 1.0,
            max_depth: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoostingModel {
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    /// Mean training log-loss after the initial guess and after each stage.
    pub train_loss: Vec<f64>,
}

fn log_loss(f: f64, label: bool) -> f64 {
    softplus(f) - if label { f } else { 0.0 }
}

fn mean_loss(f: &[f64], y: &[bool]) -> f64 {
    f.iter().zip(y).map(|(&v, &l)| log_loss(v, l)).sum::<f64>() / f.len() as f64
}

impl GradientBoostingModel {
    /// Each stage fits a regression tree to the residuals `y - p`, then sets
    /// every leaf to a Newton step. A leaf step that would raise that leaf's
    /// loss is halved until it does not, so the training loss never rises.
    pub fn fit(x: ArrayView2<f64>, y: &[bool], params: &GradientBoostingParams) -> Self {
        let n = x.nrows();
        let pos = y.iter().filter(|&&b| b).count() as f64;
        let prior = (pos / n as f64).clamp(1e-12, 1.0 - 1e-12);
        let init = (prior / (1.0 - prior)).ln();
        let mut f = vec![init; n];
        let rows: Vec<usize> = (0..n).collect();
        let tp = TreeParams {
            criterion: Criterion::Mse,
            min_samples_split: 2,
            max_depth: Some(params.max_depth),
            max_features: None,
        };
        let lr = params.learning_rate;
        let mut trees = Vec::with_capacity(params.n_estimators);
        let mut train_loss = vec![mean_loss(&f, y)];
        for _ in 0..params.n_estimators {
            let residual: Vec<f64> = f
                .iter()
                .zip(y)
                .map(|(&v, &l)| f64::from(u8::from(l)) - sigmoid(v))
                .collect();
            let mut tree = Tree::fit::<rand_chacha::ChaCha8Rng>(x, &residual, &rows, tp, None);
            let leaf_of: Vec<usize> = x.rows().into_iter().map(|r| tree.leaf_index(r)).collect();
            for leaf in 0..tree.nodes.len() {
                if !matches!(tree.nodes[leaf], Node::Leaf { .. }) {
                    continue;
                }
                let members: Vec<usize> = (0..n).filter(|&i| leaf_of[i] == leaf).collect();
                let (mut num, mut den) = (0.0, 0.0);
                for &i in &members {
                    let p = sigmoid(f[i]);
                    num += residual[i];
                    den += p * (1.0 - p);
                }
                let mut gamma = if den.abs() < 1e-150 { 0.0 } else { num / den };
                let before: f64 = members.iter().map(|&i| log_loss(f[i], y[i])).sum();
                for _ in 0..60 {
                    let after: f64 = members.iter().map(|&i| log_loss(f[i] + lr * gamma, y[i])).sum();
                    if after <= before {
                        break;
                    }
                    gamma *= 0.5;
                }
                let after: f64 = members.iter().map(|&i| log_loss(f[i] + lr * gamma, y[i])).sum();
                if after > before {
                    gamma = 0.0;
                }
                tree.set_leaf_value(leaf, gamma);
            }
            for i in 0..n {
                f[i] += lr * tree.predict(x.row(i));
            }
            train_loss.push(mean_loss(&f, y));
            trees.push(tree);
        }
        GradientBoostingModel {
            init,
            learning_rate: lr,
            trees,
            train_loss,
        }
    }

    pub fn decision(&self, row: ArrayView1<f64>) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn score(&self, row: ArrayView1<f64>) -> f64 {
        sigmoid(self.decision(row))
    }
}
