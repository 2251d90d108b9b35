use ndarray::{ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{Criterion, Tree, TreeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomForestParams {
    pub n_trees: usize,
    pub max_features: usize,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl Default for RandomForestParams {
    fn default() -> Self {
        RandomForestParams {
            n_trees: 10,
            max_features: 4,
            min_samples_split: 2,
            seed: 0,
        }
    }
}

/// Bagged entropy trees with per-split feature subsampling. The score is the
/// fraction of trees whose leaf votes positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<Tree>,
}

impl RandomForestModel {
    pub fn fit(x: ArrayView2<f64>, y: &[bool], params: &RandomForestParams) -> Self {
        let n = x.nrows();
        let target: Vec<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let tp = TreeParams {
            criterion: Criterion::Entropy,
            min_samples_split: params.min_samples_split,
            max_depth: None,
            max_features: Some(params.max_features),
        };
        let trees = (0..params.n_trees)
            .map(|_| {
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                Tree::fit(x, &target, &rows, tp, Some(&mut rng))
            })
            .collect();
        RandomForestModel { trees }
    }

    pub fn score(&self, row: ArrayView1<f64>) -> f64 {
        if self.trees.is_empty() {
            return 0.5;
        }
        let votes = self.trees.iter().filter(|t| t.predict(row) > 0.5).count();
        votes as f64 / self.trees.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn data() -> (Array2<f64>, Vec<bool>) {
        let x = Array2::from_shape_fn((60, 5), |(i, j)| ((i * (2 * j + 3) + j) % 17) as f64);
        let y = x.rows().into_iter().map(|r| r[0] + r[2] > 15.0).collect();
        (x, y)
    }

    #[test]
    fn identical_trees_give_unanimous_scores() {
        let (x, y) = data();
        let m = RandomForestModel::fit(x.view(), &y, &RandomForestParams { n_trees: 1, ..Default::default() });
        let cloned = RandomForestModel {
            trees: vec![m.trees[0].clone(); 10],
        };
        for row in x.rows() {
            let s = cloned.score(row);
            assert!(s == 0.0 || s == 1.0);
        }
    }

    #[test]
    fn seed_determines_forest() {
        let (x, y) = data();
        let p = RandomForestParams::default();
        assert_eq!(RandomForestModel::fit(x.view(), &y, &p), RandomForestModel::fit(x.view(), &y, &p));
        let q = RandomForestParams { seed: 9, ..p };
        assert_ne!(RandomForestModel::fit(x.view(), &y, &p), RandomForestModel::fit(x.view(), &y, &q));
    }

    #[test]
    fn mostly_fits_training_data() {
        let (x, y) = data();
        let m = RandomForestModel::fit(x.view(), &y, &RandomForestParams::default());
        let correct = x.rows().into_iter().zip(&y).filter(|(r, &l)| (m.score(*r) > 0.5) == l).count();
        assert!(correct >= 54, "{correct}");
    }
}
