//! Exact Shapley values and permutation feature importance.
//!
//! Shapley values use the interventional value function: `v(S)` is the mean
//! model output over a background sample, with the features in `S` taken
//! from the explained record and the rest from each background row. All
//! `2^d` coalitions are enumerated.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bisgaard::BisgaardClass;
use crate::classifiers::TrainedModel;
use crate::error::{Error, Result};
use crate::metrics;

/// Enumeration becomes impractical beyond this many features.
pub const MAX_EXACT_FEATURES: usize = 16;

pub const DEFAULT_BACKGROUND_SIZE: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapExplanation {
    /// Mean model output over the background.
    pub base_value: f64,
    /// records x features
    pub values: Array2<f64>,
    /// Model output for each explained record.
    pub outputs: Array1<f64>,
    pub feature_values: Array2<f64>,
}

impl ShapExplanation {
    /// Largest per-record gap between `base + sum(values)` and the output.
    pub fn additivity_error(&self) -> f64 {
        self.values
            .rows()
            .into_iter()
            .zip(self.outputs.iter())
            .map(|(row, out)| (self.base_value + row.sum() - out).abs())
            .fold(0.0, f64::max)
    }
}

/// `|S|! (d - |S| - 1)! / d!` for every coalition size.
fn coalition_weights(d: usize) -> Vec<f64> {
    let mut ln_fact = vec![0.0f64; d + 1];
    for k in 1..=d {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    (0..d)
        .map(|s| (ln_fact[s] + ln_fact[d - s - 1] - ln_fact[d]).exp())
        .collect()
}

/// Exact Shapley values of every output column of `f`, one explanation per
/// output. `f` maps an m x d batch to an m x outputs matrix.
pub fn exact_shapley_multi<F>(f: F, records: ArrayView2<f64>, background: ArrayView2<f64>) -> Result<Vec<ShapExplanation>>
where
    F: Fn(ArrayView2<f64>) -> Result<Array2<f64>>,
{
    let d = records.ncols();
    let nb = background.nrows();
    if nb == 0 {
        return Err(Error::Config("background set is empty".into()));
    }
    if background.ncols() != d {
        return Err(Error::Shape(format!(
            "records have {d} columns but background has {}",
            background.ncols()
        )));
    }
    if d == 0 || d > MAX_EXACT_FEATURES {
        return Err(Error::Config(format!(
            "exact enumeration supports 1..={MAX_EXACT_FEATURES} features, got {d}"
        )));
    }
    let n_masks = 1usize << d;
    let weights = coalition_weights(d);
    let base_out = f(background)?;
    let n_out = base_out.ncols();
    let base: Array1<f64> = base_out.mean_axis(Axis(0)).expect("background non-empty");

    let mut values: Vec<Array2<f64>> = (0..n_out).map(|_| Array2::zeros(records.dim())).collect();
    let mut outputs: Vec<Array1<f64>> = (0..n_out).map(|_| Array1::zeros(records.nrows())).collect();
    let chunk = (65_536 / nb).clamp(1, n_masks);
    let mut v = Array2::<f64>::zeros((n_masks, n_out));
    let mut batch = Array2::<f64>::zeros((chunk * nb, d));
    for (r, record) in records.rows().into_iter().enumerate() {
        let mut start = 0;
        while start < n_masks {
            let end = (start + chunk).min(n_masks);
            let rows = (end - start) * nb;
            for mask in start..end {
                for b in 0..nb {
                    let mut out = batch.row_mut((mask - start) * nb + b);
                    for j in 0..d {
                        out[j] = if mask >> j & 1 == 1 { record[j] } else { background[[b, j]] };
                    }
                }
            }
            let preds = f(batch.slice(ndarray::s![..rows, ..]))?;
            if preds.dim() != (rows, n_out) {
                return Err(Error::Shape(format!(
                    "model returned {:?} for a batch of {rows} rows and {n_out} outputs",
                    preds.dim()
                )));
            }
            for mask in start..end {
                let block = preds.slice(ndarray::s![(mask - start) * nb..(mask - start + 1) * nb, ..]);
                v.row_mut(mask).assign(&block.mean_axis(Axis(0)).expect("nb > 0"));
            }
            start = end;
        }
        for o in 0..n_out {
            outputs[o][r] = v[[n_masks - 1, o]];
            for j in 0..d {
                let bit = 1usize << j;
                let mut phi = 0.0;
                for mask in 0..n_masks {
                    if mask & bit == 0 {
                        let s = mask.count_ones() as usize;
                        phi += weights[s] * (v[[mask | bit, o]] - v[[mask, o]]);
                    }
                }
                values[o][[r, j]] = phi;
            }
        }
    }
    Ok(values
        .into_iter()
        .zip(outputs)
        .enumerate()
        .map(|(o, (values, outputs))| ShapExplanation {
            base_value: base[o],
            values,
            outputs,
            feature_values: records.to_owned(),
        })
        .collect())
}

/// Exact Shapley values of a scalar output function.
pub fn exact_shapley<F>(f: F, records: ArrayView2<f64>, background: ArrayView2<f64>) -> Result<ShapExplanation>
where
    F: Fn(ArrayView1<f64>) -> f64,
{
    let wrapped = |batch: ArrayView2<f64>| -> Result<Array2<f64>> {
        let col: Array1<f64> = batch.rows().into_iter().map(&f).collect();
        Ok(col.insert_axis(Axis(1)))
    };
    Ok(exact_shapley_multi(wrapped, records, background)?.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAgnosticShap {
    pub classes: Vec<BisgaardClass>,
    pub per_class: Vec<ShapExplanation>,
    /// Per-feature values, base and outputs averaged across classes.
    pub mean: ShapExplanation,
}

/// Averages explanations of several outputs of the same records.
pub fn average_explanations(parts: &[ShapExplanation]) -> Result<ShapExplanation> {
    let first = parts.first().ok_or_else(|| Error::Config("nothing to average".into()))?;
    let k = parts.len() as f64;
    let mut values = Array2::zeros(first.values.dim());
    let mut outputs = Array1::zeros(first.outputs.len());
    let mut base = 0.0;
    for p in parts {
        values += &p.values;
        outputs += &p.outputs;
        base += p.base_value;
    }
    Ok(ShapExplanation {
        base_value: base / k,
        values: values / k,
        outputs: outputs / k,
        feature_values: first.feature_values.clone(),
    })
}

/// Shapley values of every one-vs-rest class score, and their class mean.
pub fn class_agnostic_shapley(
    model: &TrainedModel,
    records: ArrayView2<f64>,
    background: ArrayView2<f64>,
) -> Result<ClassAgnosticShap> {
    let per_class = exact_shapley_multi(|batch| model.predict_proba(batch), records, background)?;
    let mean = average_explanations(&per_class)?;
    Ok(ClassAgnosticShap {
        classes: model.classes.clone(),
        per_class,
        mean,
    })
}

/// Seeded choice of `size` row indices out of `n` without replacement, in
/// ascending order. Returns every index when `size >= n`.
pub fn sample_rows(n: usize, size: usize, seed: u64) -> Vec<usize> {
    if size >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, n, size).into_vec();
    picked.sort_unstable();
    picked
}

/// Rows picked by [`sample_rows`].
pub fn background_sample(x: ArrayView2<f64>, size: usize, seed: u64) -> Array2<f64> {
    x.select(Axis(0), &sample_rows(x.nrows(), size, seed))
}

/// Feature indices ordered by mean absolute Shapley value, largest first.
/// Ties are broken by feature name.
pub fn feature_ranking(values: ArrayView2<f64>, names: &[&str]) -> Vec<usize> {
    let n = values.nrows().max(1) as f64;
    let score: Vec<f64> = values
        .columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>() / n)
        .collect();
    let mut order: Vec<usize> = (0..values.ncols()).collect();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then_with(|| names[a].cmp(names[b])));
    order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmRow {
    pub record_id: String,
    pub feature: String,
    pub shap_value: f64,
    pub feature_value: f64,
    /// 1 for the most important feature.
    pub rank: usize,
}

/// One row per record and feature, grouped by feature in rank order.
pub fn beeswarm_export(expl: &ShapExplanation, record_ids: &[String], names: &[&str]) -> Result<Vec<BeeswarmRow>> {
    let (n, d) = expl.values.dim();
    if record_ids.len() != n || names.len() != d {
        return Err(Error::Shape(format!(
            "{n} x {d} explanation with {} ids and {} names",
            record_ids.len(),
            names.len()
        )));
    }
    let order = feature_ranking(expl.values.view(), names);
    let mut rows = Vec::with_capacity(n * d);
    for (rank, &j) in order.iter().enumerate() {
        for (i, id) in record_ids.iter().enumerate() {
            rows.push(BeeswarmRow {
                record_id: id.clone(),
                feature: names[j].to_string(),
                shap_value: expl.values[[i, j]],
                feature_value: expl.feature_values[[i, j]],
                rank: rank + 1,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMetric {
    #[default]
    BalancedAccuracy,
    Accuracy,
}

impl ImportanceMetric {
    pub fn evaluate<T: PartialEq>(self, y_true: &[T], y_pred: &[T], classes: &[T]) -> f64 {
        match self {
            ImportanceMetric::BalancedAccuracy => metrics::balanced_accuracy(y_true, y_pred, classes),
            ImportanceMetric::Accuracy => metrics::accuracy(y_true, y_pred),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PermutationConfig {
    pub repeats: usize,
    pub seed: u64,
    pub metric: ImportanceMetric,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        PermutationConfig {
            repeats: 10,
            seed: 0,
            metric: ImportanceMetric::BalancedAccuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationImportance {
    pub baseline: f64,
    /// features x repeats; baseline minus the score with that column shuffled.
    pub decreases: Array2<f64>,
}

impl PermutationImportance {
    pub fn medians(&self) -> Vec<f64> {
        self.decreases.rows().into_iter().map(|r| median(r.to_vec())).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.decreases
            .rows()
            .into_iter()
            .map(|r| r.mean().unwrap_or(0.0))
            .collect()
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Permutation importance with a caller-chosen permutation for each
/// (feature, repeat) pair.
pub fn permutation_importance_with<T, P, G>(
    predict: P,
    x: ArrayView2<f64>,
    y: &[T],
    classes: &[T],
    metric: ImportanceMetric,
    repeats: usize,
    mut permutation: G,
) -> Result<PermutationImportance>
where
    T: PartialEq,
    P: Fn(ArrayView2<f64>) -> Result<Vec<T>>,
    G: FnMut(usize, usize) -> Vec<usize>,
{
    let (n, d) = x.dim();
    if y.len() != n {
        return Err(Error::Shape(format!("{n} rows but {} labels", y.len())));
    }
    let baseline = metric.evaluate(y, &predict(x)?, classes);
    let mut decreases = Array2::zeros((d, repeats));
    let mut shuffled = x.to_owned();
    for j in 0..d {
        for r in 0..repeats {
            let perm = permutation(j, r);
            if perm.len() != n {
                return Err(Error::Shape(format!("permutation of length {} for {n} rows", perm.len())));
            }
            for (i, &p) in perm.iter().enumerate() {
                shuffled[[i, j]] = x[[p, j]];
            }
            decreases[[j, r]] = baseline - metric.evaluate(y, &predict(shuffled.view())?, classes);
        }
        shuffled.column_mut(j).assign(&x.column(j));
    }
    Ok(PermutationImportance { baseline, decreases })
}

/// Seeded shuffles; feature `j` draws from its own stream so results do not
/// depend on evaluation order.
pub fn permutation_importance(
    model: &TrainedModel,
    x: ArrayView2<f64>,
    y: &[BisgaardClass],
    cfg: &PermutationConfig,
) -> Result<PermutationImportance> {
    let n = x.nrows();
    permutation_importance_with(
        |batch| model.predict(batch),
        x,
        y,
        &model.classes,
        cfg.metric,
        cfg.repeats,
        |j, r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream((j * cfg.repeats.max(1) + r) as u64);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            perm
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn weights_sum_to_one_per_player() {
        // sum over coalitions not containing a given player
        let d = 12;
        let w = coalition_weights(d);
        let mut binom = 1.0;
        let mut total = 0.0;
        for s in 0..d {
            total += binom * w[s];
            binom = binom * (d - 1 - s) as f64 / (s + 1) as f64;
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_model_closed_form() {
        let w = [0.5, -1.0, 2.0, 0.0, 3.0];
        let f = |r: ArrayView1<f64>| 0.7 + r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let bg = gaussian(20, 5, 1);
        let rec = gaussian(3, 5, 2);
        let e = exact_shapley(f, rec.view(), bg.view()).unwrap();
        let mean = bg.mean_axis(Axis(0)).unwrap();
        for i in 0..3 {
            for j in 0..5 {
                assert!((e.values[[i, j]] - w[j] * (rec[[i, j]] - mean[j])).abs() < 1e-9);
            }
        }
        assert_eq!(e.values.column(3).iter().filter(|v| **v != 0.0).count(), 0);
        assert!(e.additivity_error() < 1e-9);
    }

    #[test]
    fn interacting_model_is_additive_and_symmetric() {
        let f = |r: ArrayView1<f64>| (r[0] * r[1]).tanh() + r[2].powi(2) * r[3] + (r[0] + r[1]).sin();
        let bg = gaussian(15, 4, 3);
        let mut rec = gaussian(4, 4, 4);
        let c0 = rec.column(0).to_owned();
        rec.column_mut(1).assign(&c0);
        let e = exact_shapley(f, rec.view(), bg.view()).unwrap();
        assert!(e.additivity_error() < 1e-9);
        let mut sym = bg.clone();
        sym.column_mut(1).assign(&bg.column(0).to_owned());
        let e2 = exact_shapley(f, rec.view(), sym.view()).unwrap();
        for i in 0..4 {
            assert!((e2.values[[i, 0]] - e2.values[[i, 1]]).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_background_is_rejected() {
        let f = |r: ArrayView1<f64>| r.sum();
        let r = exact_shapley(f, array![[1.0]].view(), Array2::zeros((0, 1)).view());
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn opposite_classes_average_to_zero() {
        let rec = gaussian(2, 3, 5);
        let bg = gaussian(5, 3, 6);
        let e = exact_shapley_multi(
            |b| {
                Ok(Array2::from_shape_fn((b.nrows(), 2), |(i, o)| {
                    let s = b[[i, 0]] * 2.0 - b[[i, 2]];
                    if o == 0 {
                        s
                    } else {
                        -s
                    }
                }))
            },
            rec.view(),
            bg.view(),
        )
        .unwrap();
        let avg = average_explanations(&e).unwrap();
        assert!(avg.values.iter().all(|v| v.abs() < 1e-12));
        assert!(avg.additivity_error() < 1e-12);
    }

    #[test]
    fn ranking_and_export() {
        let values = array![[0.0, 1.0, -1.0], [0.0, -1.0, 1.0]];
        let names = ["b", "c", "a"];
        assert_eq!(feature_ranking(values.view(), &names), vec![2, 1, 0]);
        let e = ShapExplanation {
            base_value: 0.0,
            values,
            outputs: array![0.0, 0.0],
            feature_values: Array2::zeros((2, 3)),
        };
        let rows = beeswarm_export(&e, &["r1".into(), "r2".into()], &names).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!((rows[0].feature.as_str(), rows[0].rank), ("a", 1));
        assert_eq!((rows[5].feature.as_str(), rows[5].rank), ("b", 3));
    }

    #[test]
    fn identity_permutation_changes_nothing() {
        let x = gaussian(30, 3, 7);
        let y: Vec<bool> = x.column(0).iter().map(|v| *v > 0.0).collect();
        let rep = permutation_importance_with(
            |b: ArrayView2<f64>| Ok(b.column(0).iter().map(|v| *v > 0.0).collect()),
            x.view(),
            &y,
            &[false, true],
            ImportanceMetric::BalancedAccuracy,
            4,
            |_, _| (0..30).collect(),
        )
        .unwrap();
        assert_eq!(rep.baseline, 1.0);
        assert!(rep.decreases.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
