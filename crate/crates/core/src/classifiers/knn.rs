use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 2 }
    }
}

/// Euclidean nearest neighbours; the score is the positive share among the
/// `k` closest training rows. Equal distances keep training order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub x: Array2<f64>,
    pub y: Vec<bool>,
}

impl KnnModel {
    pub fn fit(x: ArrayView2<f64>, y: &[bool], params: &KnnParams) -> Self {
        KnnModel {
            k: params.k.max(1),
            x: x.to_owned(),
            y: y.to_vec(),
        }
    }

    /// Indices of the `k` nearest training rows, closest first.
    pub fn neighbors(&self, row: ArrayView1<f64>) -> Vec<usize> {
        let mut dist: Vec<(f64, usize)> = self
            .x
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let d2: f64 = r.iter().zip(row.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        let k = self.k.min(dist.len());
        if k < dist.len() {
            dist.select_nth_unstable_by(k, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist.truncate(k);
        }
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        dist.into_iter().map(|(_, i)| i).collect()
    }

    pub fn score(&self, row: ArrayView1<f64>) -> f64 {
        let nb = self.neighbors(row);
        if nb.is_empty() {
            return 0.0;
        }
        nb.iter().filter(|&&i| self.y[i]).count() as f64 / nb.len() as f64
    }

    pub fn nearest_is_positive(&self, row: ArrayView1<f64>) -> bool {
        self.neighbors(row).first().is_some_and(|&i| self.y[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn duplicated_point_scores_one() {
        let x = array![[1.0, 1.0], [1.0, 1.0], [5.0, 5.0], [6.0, 5.0]];
        let m = KnnModel::fit(x.view(), &[true, true, false, false], &KnnParams::default());
        assert_eq!(m.score(array![1.0, 1.0].view()), 1.0);
    }

    #[test]
    fn split_vote_and_nearest() {
        let x = array![[0.0], [3.0], [10.0]];
        let m = KnnModel::fit(x.view(), &[false, true, true], &KnnParams::default());
        let q = array![1.0];
        assert_eq!(m.score(q.view()), 0.5);
        assert!(!m.nearest_is_positive(q.view()));
        assert_eq!(m.neighbors(q.view()), vec![0, 1]);
    }

    #[test]
    fn equal_distances_keep_training_order() {
        let x = array![[1.0], [-1.0], [1.0]];
        let m = KnnModel::fit(x.view(), &[true, false, false], &KnnParams::default());
        assert_eq!(m.neighbors(array![0.0].view()), vec![0, 1]);
    }
}
