//! Classification metrics: balanced accuracy, F1, precision/recall, ROC and
//! precision-recall curves with micro-averaging, confusion matrices, and the
//! paired t-test used to compare classifiers across folds.
//!
//! Ratios with a zero denominator are defined as 0; each such event bumps a
//! process-wide counter readable through [`degenerate_ratio_count`].

use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

static DEGENERATE_RATIOS: AtomicUsize = AtomicUsize::new(0);

pub fn degenerate_ratio_count() -> usize {
    DEGENERATE_RATIOS.load(Ordering::Relaxed)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        DEGENERATE_RATIOS.fetch_add(1, Ordering::Relaxed);
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl BinaryCounts {
    /// Counts with `positive` as the positive class.
    pub fn from_labels<T: PartialEq>(y_true: &[T], y_pred: &[T], positive: &T) -> Self {
        let mut c = BinaryCounts::default();
        for (t, p) in y_true.iter().zip(y_pred) {
            match (t == positive, p == positive) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// Sensitivity.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    /// Two-class balanced accuracy: mean of sensitivity and specificity.
    pub fn balanced_accuracy(&self) -> f64 {
        0.5 * (self.recall() + self.specificity())
    }
}

pub fn precision(c: &BinaryCounts) -> f64 {
    c.precision()
}

pub fn recall(c: &BinaryCounts) -> f64 {
    c.recall()
}

/// Macro-averaged recall over `classes`. Classes with no true instances are
/// skipped; if none has support the result is 0.
pub fn balanced_accuracy<T: PartialEq>(y_true: &[T], y_pred: &[T], classes: &[T]) -> f64 {
    let mut sum = 0.0;
    let mut used = 0;
    for c in classes {
        let counts = BinaryCounts::from_labels(y_true, y_pred, c);
        if counts.tp + counts.fn_ == 0 {
            DEGENERATE_RATIOS.fetch_add(1, Ordering::Relaxed);
            continue;
        }
        sum += counts.recall();
        used += 1;
    }
    if used == 0 {
        0.0
    } else {
        sum / used as f64
    }
}

/// Fraction of exact matches.
pub fn accuracy<T: PartialEq>(y_true: &[T], y_pred: &[T]) -> f64 {
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    ratio(hits, y_true.len())
}

pub fn f1_per_class<T: PartialEq>(y_true: &[T], y_pred: &[T], class: &T) -> f64 {
    BinaryCounts::from_labels(y_true, y_pred, class).f1()
}

/// Per-class F1 averaged with weights equal to each class's true-instance
/// count.
pub fn weighted_f1<T: PartialEq>(y_true: &[T], y_pred: &[T], classes: &[T]) -> f64 {
    let n = y_true.len();
    if n == 0 {
        return 0.0;
    }
    classes
        .iter()
        .map(|c| {
            let support = y_true.iter().filter(|t| *t == c).count();
            if support == 0 {
                0.0
            } else {
                support as f64 / n as f64 * f1_per_class(y_true, y_pred, c)
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Roc,
    PrecisionRecall,
}

/// Points of a ROC curve (x = 1 - specificity, y = sensitivity) or PR curve
/// (x = recall, y = precision), one per threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoints {
    pub kind: CurveKind,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub thresholds: Vec<f64>,
}

/// Cumulative (tp, fp) after each distinct score, scanning scores in
/// descending order.
fn threshold_sweep(y_true: &[bool], scores: &[f64]) -> Result<Vec<(f64, usize, usize)>> {
    if y_true.len() != scores.len() {
        return Err(Error::Shape(format!(
            "{} labels but {} scores",
            y_true.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Data("scores contain NaN".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (pos, &i) in order.iter().enumerate() {
        if y_true[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_run = pos + 1 == order.len() || scores[order[pos + 1]] != scores[i];
        if last_of_run {
            out.push((scores[i], tp, fp));
        }
    }
    Ok(out)
}

/// ROC curve over all distinct scores plus a leading `+inf` threshold, and its
/// trapezoidal area.
pub fn roc_curve(y_true: &[bool], scores: &[f64]) -> Result<(CurvePoints, f64)> {
    let sweep = threshold_sweep(y_true, scores)?;
    let pos = y_true.iter().filter(|&&b| b).count();
    let neg = y_true.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Undefined(
            "ROC AUC is undefined when only one class is present".into(),
        ));
    }
    let mut curve = CurvePoints {
        kind: CurveKind::Roc,
        x: vec![0.0],
        y: vec![0.0],
        thresholds: vec![f64::INFINITY],
    };
    for (t, tp, fp) in sweep {
        curve.x.push(fp as f64 / neg as f64);
        curve.y.push(tp as f64 / pos as f64);
        curve.thresholds.push(t);
    }
    let auc = curve
        .x
        .windows(2)
        .zip(curve.y.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[1] + y[0]) / 2.0)
        .sum();
    Ok((curve, auc))
}

/// Precision-recall curve and average precision as the step sum
/// `sum_n (R_n - R_{n-1}) P_n` over descending thresholds.
pub fn pr_curve(y_true: &[bool], scores: &[f64]) -> Result<(CurvePoints, f64)> {
    let sweep = threshold_sweep(y_true, scores)?;
    let pos = y_true.iter().filter(|&&b| b).count();
    if pos == 0 {
        return Err(Error::Undefined(
            "average precision is undefined without positive instances".into(),
        ));
    }
    let mut curve = CurvePoints {
        kind: CurveKind::PrecisionRecall,
        x: Vec::with_capacity(sweep.len()),
        y: Vec::with_capacity(sweep.len()),
        thresholds: Vec::with_capacity(sweep.len()),
    };
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (t, tp, fp) in sweep {
        let r = tp as f64 / pos as f64;
        let p = tp as f64 / (tp + fp) as f64;
        ap += (r - prev_recall) * p;
        prev_recall = r;
        curve.x.push(r);
        curve.y.push(p);
        curve.thresholds.push(t);
    }
    Ok((curve, ap))
}

pub fn curve(kind: CurveKind, y_true: &[bool], scores: &[f64]) -> Result<(CurvePoints, f64)> {
    match kind {
        CurveKind::Roc => roc_curve(y_true, scores),
        CurveKind::PrecisionRecall => pr_curve(y_true, scores),
    }
}

/// Pools every (instance, class) decision of a binary indicator matrix into
/// one binary problem.
pub fn micro_average(
    indicators: ArrayView2<bool>,
    scores: ArrayView2<f64>,
    kind: CurveKind,
) -> Result<(CurvePoints, f64)> {
    if indicators.dim() != scores.dim() {
        return Err(Error::Shape(format!(
            "indicator matrix {:?} vs score matrix {:?}",
            indicators.dim(),
            scores.dim()
        )));
    }
    let labels: Vec<bool> = indicators.iter().copied().collect();
    let flat: Vec<f64> = scores.iter().copied().collect();
    curve(kind, &labels, &flat)
}

/// Micro-average over one-vs-rest columns. `y_true` holds class indices into
/// the columns of `probabilities`.
pub fn micro_average_ovr(
    y_true: &[usize],
    probabilities: ArrayView2<f64>,
    kind: CurveKind,
) -> Result<(CurvePoints, f64)> {
    let (n, c) = probabilities.dim();
    if y_true.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} probability rows", y_true.len())));
    }
    if let Some(&bad) = y_true.iter().find(|&&k| k >= c) {
        return Err(Error::Shape(format!("class index {bad} outside {c} columns")));
    }
    let indicators = Array2::from_shape_fn((n, c), |(i, j)| y_true[i] == j);
    micro_average(indicators.view(), probabilities, kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalize {
    None,
    /// Each column (predicted class) scaled to sum to 1.
    ByPredicted,
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Array2<u64>,
    pub values: Array2<f64>,
    pub normalize: Normalize,
}

pub fn confusion<T: PartialEq>(
    y_true: &[T],
    y_pred: &[T],
    classes: &[T],
    normalize: Normalize,
) -> Result<ConfusionMatrix> {
    let c = classes.len();
    let index = |v: &T| {
        classes
            .iter()
            .position(|k| k == v)
            .ok_or_else(|| Error::Data("label outside the class set".into()))
    };
    let mut counts = Array2::<u64>::zeros((c, c));
    for (t, p) in y_true.iter().zip(y_pred) {
        counts[[index(t)?, index(p)?]] += 1;
    }
    let mut values = counts.mapv(|v| v as f64);
    if normalize == Normalize::ByPredicted {
        for mut col in values.columns_mut() {
            let sum: f64 = col.sum();
            if sum > 0.0 {
                col /= sum;
            }
        }
    }
    Ok(ConfusionMatrix {
        counts,
        values,
        normalize,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub df: f64,
    /// Set when the differences have zero variance but a nonzero mean; `t` is
    /// then infinite and `p` its limit 0.
    pub degenerate: bool,
}

/// Paired t-test on fold-wise score differences.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} vs {} paired scores", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Config("paired t-test needs at least 2 pairs".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let df = n as f64 - 1.0;
    if mean == 0.0 {
        return Ok(TTest {
            t: 0.0,
            p: 1.0,
            df,
            degenerate: false,
        });
    }
    if var == 0.0 {
        return Ok(TTest {
            t: f64::INFINITY.copysign(mean),
            p: 0.0,
            df,
            degenerate: true,
        });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Undefined(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest {
        t,
        p,
        df,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn binary_balanced_accuracy() {
        let c = BinaryCounts { tp: 50, fn_: 50, tn: 90, fp: 10 };
        assert!((c.balanced_accuracy() - 0.7).abs() < 1e-15);
        let mut y_true = vec![1; 100];
        y_true.extend(vec![0; 100]);
        let mut y_pred = vec![1; 50];
        y_pred.extend(vec![0; 50]);
        y_pred.extend(vec![1; 10]);
        y_pred.extend(vec![0; 90]);
        assert!((balanced_accuracy(&y_true, &y_pred, &[0, 1]) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn multiclass_balanced_accuracy() {
        let y: Vec<u8> = (0..60).map(|i| i % 6).collect();
        assert_eq!(balanced_accuracy(&y, &y, &[0, 1, 2, 3, 4, 5]), 1.0);
        let constant = vec![2u8; 60];
        let ba = balanced_accuracy(&y, &constant, &[0, 1, 2, 3, 4, 5]);
        assert!((ba - 1.0 / 6.0).abs() < 1e-15);
        // class 9 has no support and is skipped
        assert_eq!(balanced_accuracy(&y, &y, &[0, 1, 2, 3, 4, 5, 9]), 1.0);
    }

    #[test]
    fn f1_values() {
        let c = BinaryCounts { tp: 2, fp: 1, fn_: 1, tn: 0 };
        assert!((c.f1() - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(f1_per_class(&[1, 2, 1], &[1, 2, 1], &1), 1.0);
        assert_eq!(f1_per_class(&[1, 2, 1], &[1, 2, 1], &7), 0.0);
    }

    #[test]
    fn weighted_f1_values() {
        // class 0: support 3, all right; class 1: support 1, never predicted
        let y_true = [0, 0, 0, 1];
        let y_pred = [0, 0, 0, 0];
        let f0 = f1_per_class(&y_true, &y_pred, &0);
        assert!((f0 - 6.0 / 7.0).abs() < 1e-15);
        let w = weighted_f1(&y_true, &y_pred, &[0, 1]);
        assert!((w - 0.75 * f0).abs() < 1e-15);

        let y_true = ['a', 'a', 'a', 'b'];
        let y_pred = ['a', 'a', 'a', 'b'];
        assert_eq!(weighted_f1(&y_true, &y_pred, &['a', 'b']), 1.0);
        assert_eq!(weighted_f1(&['a'; 4], &['a'; 4], &['a']), 1.0);
    }

    #[test]
    fn precision_recall_conventions() {
        assert_eq!(precision(&BinaryCounts { tp: 3, fp: 1, ..Default::default() }), 0.75);
        assert_eq!(recall(&BinaryCounts { tp: 3, fn_: 0, ..Default::default() }), 1.0);
        let before = degenerate_ratio_count();
        assert_eq!(precision(&BinaryCounts::default()), 0.0);
        assert!(degenerate_ratio_count() > before);
    }

    #[test]
    fn roc_examples() {
        let (_, auc) = roc_curve(&[false, false, true, true], &[0.1, 0.4, 0.35, 0.8]).unwrap();
        assert!((auc - 0.75).abs() < 1e-15);
        let (c, auc) = roc_curve(&[false, true, true], &[0.1, 0.5, 0.9]).unwrap();
        assert_eq!(auc, 1.0);
        assert_eq!((c.x[0], c.y[0]), (0.0, 0.0));
        assert_eq!((*c.x.last().unwrap(), *c.y.last().unwrap()), (1.0, 1.0));
        assert_eq!(c.thresholds[0], f64::INFINITY);
        let (_, auc) = roc_curve(&[false, true, true, false], &[0.3; 4]).unwrap();
        assert_eq!(auc, 0.5);
        assert!(matches!(roc_curve(&[true, true], &[0.1, 0.2]), Err(Error::Undefined(_))));
    }

    #[test]
    fn ap_examples() {
        let (_, ap) = pr_curve(&[true, false, true], &[0.9, 0.8, 0.7]).unwrap();
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);
        let (_, ap) = pr_curve(&[true, true, false], &[0.9, 0.8, 0.7]).unwrap();
        assert_eq!(ap, 1.0);
        let (_, ap) = pr_curve(&[true, false, false, false, true], &[0.2; 5]).unwrap();
        assert!((ap - 0.4).abs() < 1e-15);
        assert!(matches!(pr_curve(&[false], &[0.2]), Err(Error::Undefined(_))));
    }

    #[test]
    fn micro_average_examples() {
        let labels = [true, false, true, false, false, true];
        let scores = [0.9, 0.8, 0.4, 0.35, 0.1, 0.6];
        let (_, single_auc) = roc_curve(&labels, &scores).unwrap();
        let (_, single_ap) = pr_curve(&labels, &scores).unwrap();
        let copies = 4;
        let ind = Array2::from_shape_fn((6, copies), |(i, _)| labels[i]);
        let sc = Array2::from_shape_fn((6, copies), |(i, _)| scores[i]);
        let (_, auc) = micro_average(ind.view(), sc.view(), CurveKind::Roc).unwrap();
        let (_, ap) = micro_average(ind.view(), sc.view(), CurveKind::PrecisionRecall).unwrap();
        assert!((auc - single_auc).abs() < 1e-12);
        assert!((ap - single_ap).abs() < 1e-12);

        let perfect = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        let (_, auc) = micro_average_ovr(&[0, 1, 2, 0], perfect.view(), CurveKind::Roc).unwrap();
        assert_eq!(auc, 1.0);
        let (_, ap) =
            micro_average_ovr(&[0, 1, 2, 0], perfect.view(), CurveKind::PrecisionRecall).unwrap();
        assert_eq!(ap, 1.0);
        assert!(micro_average_ovr(&[3], array![[0.5, 0.5]].view(), CurveKind::Roc).is_err());
    }

    #[test]
    fn confusion_examples() {
        let m = confusion(&['a', 'a', 'b'], &['a', 'b', 'b'], &['a', 'b'], Normalize::None).unwrap();
        assert_eq!(m.counts, array![[1, 1], [0, 1]]);
        let n = confusion(&['a', 'a', 'b'], &['a', 'b', 'b'], &['a', 'b'], Normalize::ByPredicted)
            .unwrap();
        assert_eq!(n.values, array![[1.0, 0.5], [0.0, 0.5]]);
        let p = confusion(&[0, 1, 1, 2], &[0, 1, 1, 2], &[0, 1, 2, 3], Normalize::ByPredicted).unwrap();
        assert_eq!(p.counts.diag().to_vec(), vec![1, 2, 1, 0]);
        assert_eq!(p.values.column(3).sum(), 0.0);
        assert!(confusion(&[5], &[5], &[0, 1], Normalize::None).is_err());
    }

    #[test]
    fn t_test_conventions() {
        let a = [0.5, 0.6, 0.7];
        let t = paired_t_test(&a, &a).unwrap();
        assert_eq!((t.t, t.p, t.degenerate), (0.0, 1.0, false));
        let t = paired_t_test(&[2.0, 3.0, 4.0, 5.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(t.degenerate && t.p == 0.0 && t.t.is_infinite());
        let t = paired_t_test(&[1.0, -1.0, 1.0, -1.0, 1.0, -1.0], &[0.0; 6]).unwrap();
        assert_eq!((t.t, t.p), (0.0, 1.0));
        assert!(paired_t_test(&[1.0], &[0.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn t_test_reference_value() {
        // d = [1, 2, 3, 4]: mean 2.5, sd sqrt(5/3), t = 2.5 / (sd / 2) = 3.8729833
        let t = paired_t_test(&[1.0, 2.0, 3.0, 4.0], &[0.0; 4]).unwrap();
        assert!((t.t - 3.872983346207417).abs() < 1e-12);
        // two-sided tail of t(3) at 3.8729833, from the closed-form t(3) CDF
        let x: f64 = t.t;
        let s3 = 3f64.sqrt();
        let cdf = 0.5
            + ((x / s3).atan() + (x / s3) / (1.0 + x * x / 3.0)) / std::f64::consts::PI;
        assert!((t.p - 2.0 * (1.0 - cdf)).abs() < 1e-10);
    }
}
