//! Cross-validated evaluation of several classifiers on a shared fold plan,
//! the calibration-offset sweep, and the files both of them export.

use std::collections::HashMap;
use std::fs;
use std::hash::Hash;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bisgaard::BisgaardClass;
use crate::classifiers::{ClassifierSpec, TrainedModel, Variant};
use crate::data_pipeline::{apply_roving, LabeledDataset, LabeledRecord, RovingConfig};
use crate::error::{Error, Result};
use crate::explain::{self, PermutationConfig, PermutationImportance};
use crate::loudness_model::FEATURE_NAMES;
use crate::metrics::{self, ConfusionMatrix, CurveKind, CurvePoints, Normalize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub stratified: bool,
    pub seed: u64,
    /// Fold index of every record.
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Assigns each record to one of `k` folds. With stratification each class
/// is shuffled separately and the classes are dealt out in turn, so both the
/// fold sizes and the per-class counts differ by at most one.
pub fn kfold_split<T: Eq + Hash + Clone>(labels: &[T], k: usize, stratified: bool, seed: u64) -> Result<FoldPlan> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::Config(format!("{n} records cannot fill {k} folds")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order: Vec<usize> = if stratified {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot: HashMap<&T, usize> = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            let g = *slot.entry(l).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push(i);
        }
        groups
            .into_iter()
            .flat_map(|mut g| {
                g.shuffle(&mut rng);
                g
            })
            .collect()
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        all
    };
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % k;
    }
    Ok(FoldPlan {
        k,
        stratified,
        seed,
        assignment,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub classifiers: Vec<ClassifierSpec>,
    pub folds: usize,
    pub stratified: bool,
    /// Number of cross-validation repetitions, each with a fresh fold plan.
    pub repeats: usize,
    pub seed: u64,
    /// Classifier whose pooled out-of-fold predictions feed the confusion
    /// matrix and the curves.
    pub designated: Variant,
    pub roving: RovingConfig,
    /// Permutation importance of the designated classifier on every fold.
    pub permutation: Option<PermutationConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            classifiers: Variant::ALL.into_iter().map(ClassifierSpec::default_for).collect(),
            folds: 10,
            stratified: true,
            repeats: 1,
            seed: 0,
            designated: Variant::Lr,
            roving: RovingConfig::none(),
            permutation: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation across folds.
    pub sd: f64,
}

pub fn summarize(v: &[f64]) -> Summary {
    let n = v.len() as f64;
    if v.is_empty() {
        return Summary { mean: 0.0, sd: 0.0 };
    }
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Summary { mean, sd }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifierReport {
    pub name: String,
    pub spec: ClassifierSpec,
    pub train_balanced_accuracy: Vec<f64>,
    pub test_balanced_accuracy: Vec<f64>,
    pub train_weighted_f1: Vec<f64>,
    pub test_weighted_f1: Vec<f64>,
    pub train_balanced_accuracy_summary: Summary,
    pub test_balanced_accuracy_summary: Summary,
    pub train_weighted_f1_summary: Summary,
    pub test_weighted_f1_summary: Summary,
    /// folds x classes, test split.
    pub test_f1_per_class: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassCurves {
    pub class: String,
    pub roc: CurvePoints,
    pub auc: f64,
    pub pr: CurvePoints,
    pub average_precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignatedReport {
    pub name: String,
    /// Out-of-fold predictions of the first repetition.
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassCurves>,
    pub micro_roc: CurvePoints,
    pub micro_auc: f64,
    pub micro_pr: CurvePoints,
    pub micro_average_precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PValueMatrix {
    pub names: Vec<String>,
    pub p: Vec<Vec<f64>>,
    pub degenerate: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldImportance {
    pub train: PermutationImportance,
    pub test: PermutationImportance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub version: String,
    pub seed: u64,
    pub n_records: usize,
    pub classes: Vec<BisgaardClass>,
    pub folds: usize,
    pub repeats: usize,
    pub fold_sizes: Vec<usize>,
    pub roving: RovingConfig,
    pub classifiers: Vec<ClassifierReport>,
    pub ttest_balanced_accuracy: PValueMatrix,
    pub ttest_weighted_f1: PValueMatrix,
    pub designated: Option<DesignatedReport>,
    /// Decreases averaged over folds, for the designated classifier.
    pub permutation_importance: Option<FoldImportance>,
}

fn classifier_names(specs: &[ClassifierSpec]) -> Vec<String> {
    let mut seen: HashMap<Variant, usize> = HashMap::new();
    specs
        .iter()
        .map(|s| {
            let count = seen.entry(s.variant()).or_insert(0);
            *count += 1;
            if *count == 1 {
                s.variant().to_string()
            } else {
                format!("{}#{}", s.variant(), count)
            }
        })
        .collect()
}

fn p_matrix(names: &[String], scores: &[&Vec<f64>]) -> Result<PValueMatrix> {
    let c = scores.len();
    let mut p = vec![vec![1.0; c]; c];
    let mut degenerate = vec![vec![false; c]; c];
    for a in 0..c {
        for b in 0..c {
            if a != b {
                let t = metrics::paired_t_test(scores[a], scores[b])?;
                p[a][b] = t.p;
                degenerate[a][b] = t.degenerate;
            }
        }
    }
    Ok(PValueMatrix {
        names: names.to_vec(),
        p,
        degenerate,
    })
}

fn average_importance(parts: &[PermutationImportance]) -> PermutationImportance {
    let k = parts.len() as f64;
    let mut decreases = Array2::zeros(parts[0].decreases.dim());
    let mut baseline = 0.0;
    for p in parts {
        decreases += &p.decreases;
        baseline += p.baseline;
    }
    PermutationImportance {
        baseline: baseline / k,
        decreases: decreases / k,
    }
}

/// Runs k-fold cross-validation of every configured classifier on one fold
/// plan per repetition.
pub fn run_experiment(records: &[LabeledRecord], cfg: &ExperimentConfig) -> Result<MetricsReport> {
    if cfg.classifiers.is_empty() {
        return Err(Error::Config("no classifiers configured".into()));
    }
    if cfg.repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let roved = apply_roving(records, &cfg.roving).map_err(|e| e.in_stage("roving"))?;
    let data = LabeledDataset::from_records(&roved);
    if data.classes.len() < 2 {
        return Err(Error::DegenerateLabels(
            data.classes.first().map(|c| c.to_string()).unwrap_or_else(|| "none".into()),
        )
        .in_stage("cross-validation"));
    }
    let classes = data.classes.clone();
    let names = classifier_names(&cfg.classifiers);
    let designated = cfg.classifiers.iter().position(|s| s.variant() == cfg.designated);

    let n_class = classes.len();
    let mut reports: Vec<ClassifierReport> = cfg
        .classifiers
        .iter()
        .zip(&names)
        .map(|(spec, name)| ClassifierReport {
            name: name.clone(),
            spec: spec.clone(),
            train_balanced_accuracy: Vec::new(),
            test_balanced_accuracy: Vec::new(),
            train_weighted_f1: Vec::new(),
            test_weighted_f1: Vec::new(),
            train_balanced_accuracy_summary: summarize(&[]),
            test_balanced_accuracy_summary: summarize(&[]),
            train_weighted_f1_summary: summarize(&[]),
            test_weighted_f1_summary: summarize(&[]),
            test_f1_per_class: Vec::new(),
        })
        .collect();
    let mut oof_proba = Array2::<f64>::zeros((data.len(), n_class));
    let mut oof_pred: Vec<BisgaardClass> = data.labels.clone();
    let mut imp_train = Vec::new();
    let mut imp_test = Vec::new();
    let mut fold_sizes = Vec::new();

    for rep in 0..cfg.repeats {
        let plan = kfold_split(&data.labels, cfg.folds, cfg.stratified, cfg.seed.wrapping_add(rep as u64))
            .map_err(|e| e.in_stage("fold plan"))?;
        if rep == 0 {
            fold_sizes = plan.fold_sizes();
        }
        for fold in 0..cfg.folds {
            let train = plan.train_indices(fold);
            let test = plan.test_indices(fold);
            let x_train = data.features.select(Axis(0), &train);
            let x_test = data.features.select(Axis(0), &test);
            let y_train: Vec<BisgaardClass> = train.iter().map(|&i| data.labels[i]).collect();
            let y_test: Vec<BisgaardClass> = test.iter().map(|&i| data.labels[i]).collect();
            for (c, spec) in cfg.classifiers.iter().enumerate() {
                let stage = format!("fold {fold}, classifier {}", names[c]);
                let model = TrainedModel::fit_with_classes(spec, x_train.view(), &y_train, &classes)
                    .map_err(|e| e.in_stage(stage.clone()))?;
                let pred_train = model.predict(x_train.view())?;
                let proba_test = model.predict_proba(x_test.view())?;
                let pred_test = model.predict(x_test.view())?;
                let r = &mut reports[c];
                r.train_balanced_accuracy.push(metrics::balanced_accuracy(&y_train, &pred_train, &classes));
                r.test_balanced_accuracy.push(metrics::balanced_accuracy(&y_test, &pred_test, &classes));
                r.train_weighted_f1.push(metrics::weighted_f1(&y_train, &pred_train, &classes));
                r.test_weighted_f1.push(metrics::weighted_f1(&y_test, &pred_test, &classes));
                r.test_f1_per_class.push(
                    classes
                        .iter()
                        .map(|k| metrics::f1_per_class(&y_test, &pred_test, k))
                        .collect(),
                );
                if Some(c) == designated {
                    if rep == 0 {
                        for (row, &i) in test.iter().enumerate() {
                            oof_proba.row_mut(i).assign(&proba_test.row(row));
                            oof_pred[i] = pred_test[row];
                        }
                    }
                    if let Some(pc) = &cfg.permutation {
                        let pc = PermutationConfig {
                            seed: pc.seed.wrapping_add((rep * cfg.folds + fold) as u64),
                            ..*pc
                        };
                        imp_train.push(explain::permutation_importance(&model, x_train.view(), &y_train, &pc)?);
                        imp_test.push(explain::permutation_importance(&model, x_test.view(), &y_test, &pc)?);
                    }
                }
            }
        }
    }

    for r in &mut reports {
        r.train_balanced_accuracy_summary = summarize(&r.train_balanced_accuracy);
        r.test_balanced_accuracy_summary = summarize(&r.test_balanced_accuracy);
        r.train_weighted_f1_summary = summarize(&r.train_weighted_f1);
        r.test_weighted_f1_summary = summarize(&r.test_weighted_f1);
    }
    let ba: Vec<&Vec<f64>> = reports.iter().map(|r| &r.test_balanced_accuracy).collect();
    let wf: Vec<&Vec<f64>> = reports.iter().map(|r| &r.test_weighted_f1).collect();
    let ttest_balanced_accuracy = p_matrix(&names, &ba)?;
    let ttest_weighted_f1 = p_matrix(&names, &wf)?;

    let designated_report = match designated {
        Some(c) => Some(designated_curves(&names[c], &data.labels, &oof_pred, oof_proba.view(), &classes)?),
        None => None,
    };
    let permutation_importance = if imp_test.is_empty() {
        None
    } else {
        Some(FoldImportance {
            train: average_importance(&imp_train),
            test: average_importance(&imp_test),
        })
    };

    Ok(MetricsReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        n_records: data.len(),
        classes,
        folds: cfg.folds,
        repeats: cfg.repeats,
        fold_sizes,
        roving: cfg.roving,
        classifiers: reports,
        ttest_balanced_accuracy,
        ttest_weighted_f1,
        designated: designated_report,
        permutation_importance,
    })
}

fn designated_curves(
    name: &str,
    y: &[BisgaardClass],
    pred: &[BisgaardClass],
    proba: ndarray::ArrayView2<f64>,
    classes: &[BisgaardClass],
) -> Result<DesignatedReport> {
    let confusion = metrics::confusion(y, pred, classes, Normalize::ByPredicted)?;
    let mut per_class = Vec::new();
    for (c, class) in classes.iter().enumerate() {
        let truth: Vec<bool> = y.iter().map(|l| l == class).collect();
        let scores = proba.column(c).to_vec();
        let (roc, auc) = metrics::roc_curve(&truth, &scores)?;
        let (pr, ap) = metrics::pr_curve(&truth, &scores)?;
        per_class.push(ClassCurves {
            class: class.to_string(),
            roc,
            auc,
            pr,
            average_precision: ap,
        });
    }
    let idx: Vec<usize> = y
        .iter()
        .map(|l| classes.iter().position(|c| c == l).expect("label in class list"))
        .collect();
    let (micro_roc, micro_auc) = metrics::micro_average_ovr(&idx, proba, CurveKind::Roc)?;
    let (micro_pr, micro_ap) = metrics::micro_average_ovr(&idx, proba, CurveKind::PrecisionRecall)?;
    Ok(DesignatedReport {
        name: name.to_string(),
        confusion,
        per_class,
        micro_roc,
        micro_auc,
        micro_pr,
        micro_average_precision: micro_ap,
    })
}

/// The five calibration-offset conditions as (mean, sd) in dB.
pub const SWEEP_CONDITIONS: [(f64, f64); 5] = [(0.0, 0.0), (5.0, 5.0), (5.0, 10.0), (10.0, 5.0), (10.0, 10.0)];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCondition {
    pub mean: f64,
    pub sd: f64,
    pub report: MetricsReport,
}

impl SweepCondition {
    pub fn label(&self) -> String {
        condition_label(self.mean, self.sd)
    }
}

pub fn condition_label(mean: f64, sd: f64) -> String {
    format!("mean{mean}_sd{sd}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub conditions: Vec<SweepCondition>,
}

/// Reruns the experiment once per condition. Only the roving mean and sd
/// change; the data, seeds and fold plans stay the same.
pub fn roving_sweep(records: &[LabeledRecord], cfg: &ExperimentConfig, conditions: &[(f64, f64)]) -> Result<SweepReport> {
    let mut out = Vec::with_capacity(conditions.len());
    for &(mean, sd) in conditions {
        let run_cfg = ExperimentConfig {
            roving: RovingConfig {
                mean,
                sd,
                seed: cfg.roving.seed,
            },
            ..cfg.clone()
        };
        let report = run_experiment(records, &run_cfg).map_err(|e| e.in_stage(condition_label(mean, sd)))?;
        out.push(SweepCondition { mean, sd, report });
    }
    Ok(SweepReport { conditions: out })
}

/// Compact per-condition results used to build the figure tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub classifier: String,
    pub conditions: Vec<SweepSummaryCondition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummaryCondition {
    pub mean: f64,
    pub sd: f64,
    pub micro_auc: f64,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub features: Vec<String>,
    /// features x repeats, test split.
    pub importance_test: Vec<Vec<f64>>,
    pub importance_train: Vec<Vec<f64>>,
}

impl SweepReport {
    pub fn summary(&self) -> Result<SweepSummary> {
        let mut conditions = Vec::new();
        let mut classifier = String::new();
        for c in &self.conditions {
            let d = c
                .report
                .designated
                .as_ref()
                .ok_or_else(|| Error::Config("sweep needs the designated classifier in the classifier list".into()))?;
            classifier = d.name.clone();
            let rows = |p: Option<&PermutationImportance>| -> Vec<Vec<f64>> {
                p.map(|p| p.decreases.rows().into_iter().map(|r| r.to_vec()).collect())
                    .unwrap_or_default()
            };
            let imp = c.report.permutation_importance.as_ref();
            conditions.push(SweepSummaryCondition {
                mean: c.mean,
                sd: c.sd,
                micro_auc: d.micro_auc,
                fpr: d.micro_roc.x.clone(),
                tpr: d.micro_roc.y.clone(),
                features: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
                importance_test: rows(imp.map(|i| &i.test)),
                importance_train: rows(imp.map(|i| &i.train)),
            });
        }
        Ok(SweepSummary { classifier, conditions })
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn write_curve(path: &Path, curve: &CurvePoints) -> Result<()> {
    let mut w = csv_writer(path)?;
    let (xn, yn) = match curve.kind {
        CurveKind::Roc => ("fpr", "tpr"),
        CurveKind::PrecisionRecall => ("recall", "precision"),
    };
    w.write_record(["threshold", xn, yn])?;
    for ((t, x), y) in curve.thresholds.iter().zip(&curve.x).zip(&curve.y) {
        w.write_record([t.to_string(), x.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_importance_csv(path: &Path, imp: &FoldImportance) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["feature", "split", "repeat", "decrease"])?;
    for (split, p) in [("train", &imp.train), ("test", &imp.test)] {
        for (j, row) in p.decreases.rows().into_iter().enumerate() {
            for (r, v) in row.iter().enumerate() {
                w.write_record([FEATURE_NAMES[j].to_string(), split.to_string(), r.to_string(), v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes report.json, per_class_f1.csv and, when present, the designated
/// classifier's confusion matrix, curves and permutation importance.
pub fn write_experiment_outputs(report: &MetricsReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("report.json"), report)?;

    let mut w = csv_writer(&dir.join("per_class_f1.csv"))?;
    w.write_record(["classifier", "fold", "class", "f1"])?;
    for r in &report.classifiers {
        for (fold, row) in r.test_f1_per_class.iter().enumerate() {
            for (class, f1) in report.classes.iter().zip(row) {
                w.write_record([r.name.clone(), fold.to_string(), class.to_string(), f1.to_string()])?;
            }
        }
    }
    w.flush()?;

    if let Some(d) = &report.designated {
        let mut w = csv_writer(&dir.join("confusion.csv"))?;
        let mut header = vec!["true".to_string()];
        header.extend(report.classes.iter().map(|c| c.to_string()));
        w.write_record(&header)?;
        for (i, class) in report.classes.iter().enumerate() {
            let mut row = vec![class.to_string()];
            row.extend(d.confusion.values.row(i).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        for c in &d.per_class {
            write_curve(&dir.join(format!("roc_{}.csv", c.class)), &c.roc)?;
            write_curve(&dir.join(format!("pr_{}.csv", c.class)), &c.pr)?;
        }
        write_curve(&dir.join("roc_micro.csv"), &d.micro_roc)?;
        write_curve(&dir.join("pr_micro.csv"), &d.micro_pr)?;
    }
    if let Some(imp) = &report.permutation_importance {
        write_importance_csv(&dir.join("perm_importance.csv"), imp)?;
    }
    Ok(())
}

/// Writes each condition under `dir/<label>/` plus `dir/summary.json`.
pub fn write_sweep_outputs(sweep: &SweepReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for c in &sweep.conditions {
        write_experiment_outputs(&c.report, &dir.join(c.label()))?;
    }
    write_json(&dir.join("summary.json"), &sweep.summary()?)
}

/// Figure tables from a sweep summary: micro-average ROC curves with their
/// AUC per condition, and test-split permutation importance per condition.
pub fn write_figure_tables(summary: &SweepSummary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv_writer(&dir.join("fig_a1_roc.csv"))?;
    w.write_record(["condition", "mean", "sd", "auc", "fpr", "tpr"])?;
    for c in &summary.conditions {
        for (x, y) in c.fpr.iter().zip(&c.tpr) {
            w.write_record([
                condition_label(c.mean, c.sd),
                c.mean.to_string(),
                c.sd.to_string(),
                c.micro_auc.to_string(),
                x.to_string(),
                y.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("fig_a2_importance.csv"))?;
    w.write_record(["condition", "mean", "sd", "feature", "repeat", "decrease"])?;
    for c in &summary.conditions {
        for (feature, row) in c.features.iter().zip(&c.importance_test) {
            for (r, v) in row.iter().enumerate() {
                w.write_record([
                    condition_label(c.mean, c.sd),
                    c.mean.to_string(),
                    c.sd.to_string(),
                    feature.clone(),
                    r.to_string(),
                    v.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_sizes_for_847() {
        let labels: Vec<u8> = (0..847).map(|i| (i % 6) as u8).collect();
        let plan = kfold_split(&labels, 10, true, 3).unwrap();
        let mut sizes = plan.fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, [84, 84, 84, 85, 85, 85, 85, 85, 85, 85]);
    }

    #[test]
    fn stratified_counts_differ_by_one() {
        let labels: Vec<u8> = (0..233).map(|i| [0, 0, 0, 1, 1, 2, 3][i % 7]).collect();
        let plan = kfold_split(&labels, 10, true, 11).unwrap();
        for class in 0..4u8 {
            let counts: Vec<usize> = (0..10)
                .map(|f| plan.test_indices(f).iter().filter(|&&i| labels[i] == class).count())
                .collect();
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            assert!(hi - lo <= 1, "class {class}: {counts:?}");
        }
    }

    #[test]
    fn singleton_folds_and_errors() {
        let labels: Vec<u8> = (0..10).collect();
        let plan = kfold_split(&labels, 10, false, 0).unwrap();
        assert!(plan.fold_sizes().iter().all(|&s| s == 1));
        assert!(matches!(kfold_split(&labels[..9], 10, false, 0), Err(Error::Config(_))));
    }

    #[test]
    fn sample_sd() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
