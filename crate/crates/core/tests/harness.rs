use loudclass::bisgaard::{BisgaardClass, ProfileSet};
use loudclass::classifiers::{ClassifierSpec, Variant};
use loudclass::data_pipeline::{generate_synthetic, LabeledRecord, RovingConfig, SyntheticConfig};
use loudclass::explain::PermutationConfig;
use loudclass::harness::{
    kfold_split, roving_sweep, run_experiment, write_experiment_outputs, write_figure_tables, write_sweep_outputs,
    ExperimentConfig,
};

fn records(per_class: usize) -> Vec<LabeledRecord> {
    let cfg = SyntheticConfig {
        records_per_class: per_class,
        seed: 8,
        ..Default::default()
    };
    generate_synthetic(&cfg, &ProfileSet::bisgaard()).unwrap()
}

fn quick_config() -> ExperimentConfig {
    ExperimentConfig {
        classifiers: vec![
            ClassifierSpec::default_for(Variant::Lr),
            ClassifierSpec::default_for(Variant::Dt),
            ClassifierSpec::default_for(Variant::Lr),
        ],
        folds: 5,
        seed: 4,
        ..Default::default()
    }
}

#[test]
fn classifiers_share_one_fold_plan() {
    let data = records(30);
    let cfg = quick_config();
    let report = run_experiment(&data, &cfg).unwrap();
    let labels: Vec<BisgaardClass> = data.iter().map(|r| r.label).collect();
    let plan = kfold_split(&labels, 5, true, 4).unwrap();
    assert_eq!(report.fold_sizes, plan.fold_sizes());
    for r in &report.classifiers {
        assert_eq!(r.test_balanced_accuracy.len(), 5);
    }
    assert_eq!(report.classifiers[0].name, "lr");
    assert_eq!(report.classifiers[2].name, "lr#2");
    // identical specs see identical folds, so every fold score matches
    assert_eq!(report.classifiers[0].test_balanced_accuracy, report.classifiers[2].test_balanced_accuracy);
    assert_eq!(report.ttest_balanced_accuracy.p[0][2], 1.0);
    assert_eq!(report.ttest_balanced_accuracy.p[2][0], 1.0);
    assert!(!report.ttest_balanced_accuracy.degenerate[0][2]);
}

#[test]
fn repeats_multiply_fold_scores() {
    let data = records(20);
    let cfg = ExperimentConfig {
        classifiers: vec![ClassifierSpec::default_for(Variant::Knn)],
        folds: 4,
        repeats: 3,
        ..Default::default()
    };
    let report = run_experiment(&data, &cfg).unwrap();
    assert_eq!(report.classifiers[0].test_balanced_accuracy.len(), 12);
}

#[test]
fn zero_roving_condition_equals_a_plain_run() {
    let data = records(20);
    let cfg = ExperimentConfig {
        classifiers: vec![ClassifierSpec::default_for(Variant::Lr)],
        folds: 4,
        permutation: Some(PermutationConfig {
            repeats: 3,
            ..Default::default()
        }),
        ..Default::default()
    };
    let plain = run_experiment(&data, &cfg).unwrap();
    let sweep = roving_sweep(&data, &cfg, &[(0.0, 0.0), (10.0, 5.0)]).unwrap();
    assert_eq!(
        serde_json::to_string(&sweep.conditions[0].report).unwrap(),
        serde_json::to_string(&plain).unwrap()
    );
    assert_eq!(sweep.conditions[1].report.roving, RovingConfig { mean: 10.0, sd: 5.0, seed: 0 });
}

#[test]
fn writers_produce_the_expected_files() {
    let data = records(20);
    let cfg = ExperimentConfig {
        classifiers: vec![ClassifierSpec::default_for(Variant::Lr), ClassifierSpec::default_for(Variant::Knn)],
        folds: 4,
        permutation: Some(PermutationConfig {
            repeats: 2,
            ..Default::default()
        }),
        ..Default::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&data, &cfg).unwrap();
    write_experiment_outputs(&report, dir.path()).unwrap();
    let mut expected = vec![
        "report.json".to_string(),
        "per_class_f1.csv".into(),
        "confusion.csv".into(),
        "roc_micro.csv".into(),
        "pr_micro.csv".into(),
        "perm_importance.csv".into(),
    ];
    for c in &report.classes {
        expected.push(format!("roc_{c}.csv"));
        expected.push(format!("pr_{c}.csv"));
    }
    for f in &expected {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let confusion = std::fs::read_to_string(dir.path().join("confusion.csv")).unwrap();
    assert_eq!(confusion.lines().count(), report.classes.len() + 1);

    let sweep = roving_sweep(&data, &cfg, &[(0.0, 0.0), (5.0, 5.0)]).unwrap();
    let sweep_dir = dir.path().join("sweep");
    write_sweep_outputs(&sweep, &sweep_dir).unwrap();
    assert!(sweep_dir.join("mean0_sd0/report.json").is_file());
    assert!(sweep_dir.join("mean5_sd5/report.json").is_file());
    assert!(sweep_dir.join("summary.json").is_file());
    write_figure_tables(&sweep.summary().unwrap(), &dir.path().join("fig")).unwrap();
    let roc = std::fs::read_to_string(dir.path().join("fig/fig_a1_roc.csv")).unwrap();
    assert!(roc.lines().next().unwrap().starts_with("condition,mean,sd,auc"));
    assert!(dir.path().join("fig/fig_a2_importance.csv").is_file());
}

#[test]
fn too_many_folds_is_a_config_error() {
    let data = records(2);
    let cfg = ExperimentConfig {
        folds: 50,
        ..Default::default()
    };
    let err = run_experiment(&data, &cfg).unwrap_err();
    assert_eq!(err.kind(), loudclass::ErrorKind::Config);
}
