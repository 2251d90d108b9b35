use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use loudclass::bisgaard::{parse_class_list, ProfileSet};
use loudclass::classifiers::{ClassifierSpec, TrainedModel, Variant};
use loudclass::data_pipeline::{
    apply_roving, generate_synthetic, load_csv, preprocess, read_labeled_json, to_participants, write_csv,
    write_labeled_json, LabeledDataset, LabeledRecord, PreprocessConfig, RovingConfig, SyntheticConfig,
};
use loudclass::explain::{self, PermutationConfig};
use loudclass::harness::{
    self, condition_label, roving_sweep, run_experiment, write_experiment_outputs, write_figure_tables,
    write_sweep_outputs, ExperimentConfig, MetricsReport, SweepSummary, SWEEP_CONDITIONS,
};
use loudclass::loudness_model::FEATURE_NAMES;
use loudclass::pca::PcaModel;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::args::{
    config_section, overlay, Command, DataArgs, EvaluateArgs, ExplainArgs, GenerateArgs, PcaArgs, PreprocessArgs,
    ReportArgs, RoveArgs, SweepArgs, TrainArgs,
};
use crate::manifest;
use crate::CliError;

const DEFAULT_OUT: &str = "out";
const DEFAULT_PERMUTATION_REPEATS: usize = 10;
const DEFAULT_EXPLAINED_RECORDS: usize = 200;

/// Files a command read and wrote. Outputs are relative to `out`.
pub struct RunFiles {
    pub out: PathBuf,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

pub fn run(command: Command, config: Option<&PathBuf>) -> Result<(), CliError> {
    let name = command.name();
    let section = match config {
        Some(p) => config_section(p, name)?,
        None => None,
    };
    let args = match command {
        Command::Generate(a) => merged(&a, section)?,
        Command::Preprocess(a) => merged(&a, section)?,
        Command::Rove(a) => merged(&a, section)?,
        Command::Pca(a) => merged(&a, section)?,
        Command::Train(a) => merged(&a, section)?,
        Command::Evaluate(a) => merged(&a, section)?,
        Command::Explain(a) => merged(&a, section)?,
        Command::Sweep(a) => merged(&a, section)?,
        Command::Report(a) => merged(&a, section)?,
        Command::Replay(_) => unreachable!("replay is dispatched separately"),
    };
    let files = execute(name, &args)?;
    manifest::write(name, args, &files)?;
    Ok(())
}

fn merged<T: Serialize + DeserializeOwned + Default>(cli: &T, section: Option<toml::Table>) -> Result<Value, CliError> {
    let args = overlay(cli, section)?;
    Ok(serde_json::to_value(args).expect("serializable"))
}

fn parse<T: DeserializeOwned>(args: &Value) -> Result<T, CliError> {
    serde_json::from_value(args.clone()).map_err(|e| CliError::usage(e.to_string()))
}

/// Runs a subcommand from its merged arguments.
pub fn execute(name: &str, args: &Value) -> Result<RunFiles, CliError> {
    match name {
        "generate" => generate(&parse(args)?),
        "preprocess" => preprocess_cmd(&parse(args)?),
        "rove" => rove(&parse(args)?),
        "pca" => pca(&parse(args)?),
        "train" => train(&parse(args)?),
        "evaluate" => evaluate(&parse(args)?),
        "explain" => explain_cmd(&parse(args)?),
        "sweep" => sweep(&parse(args)?),
        "report" => report(&parse(args)?),
        other => Err(CliError::usage(format!("unknown command {other:?}"))),
    }
}

fn out_dir(out: &Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn stage(name: &str) -> impl Fn(loudclass::Error) -> CliError + '_ {
    move |e| e.in_stage(name).into()
}

fn preprocess_config(d: &DataArgs) -> PreprocessConfig {
    let base = PreprocessConfig::default();
    PreprocessConfig {
        min_pta: d.min_pta.unwrap_or(base.min_pta),
        min_class_fraction: d.min_class_fraction.unwrap_or(base.min_class_fraction),
        min_class_count: d.min_class_count.unwrap_or(base.min_class_count),
    }
}

fn require_input(d: &Option<PathBuf>) -> Result<PathBuf, CliError> {
    d.clone().ok_or_else(|| CliError::usage("--input is required"))
}

fn load_records(d: &DataArgs) -> Result<(Vec<LabeledRecord>, PathBuf), CliError> {
    let input = require_input(&d.input)?;
    let is_json = input.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let records = if is_json {
        read_labeled_json(&input).map_err(stage("load"))?
    } else {
        let participants = load_csv(&input).map_err(stage("load"))?;
        preprocess(&participants, &ProfileSet::bisgaard(), &preprocess_config(d))
            .map_err(stage("preprocess"))?
            .records
    };
    if records.is_empty() {
        return Err(CliError::data(format!("{}: no usable records", input.display())));
    }
    Ok((records, input))
}

fn parse_variant(s: &str) -> Result<Variant, CliError> {
    Variant::from_str(s).map_err(CliError::from)
}

/// Default specs for the named variants with `variant.key=value` overrides
/// applied.
fn build_specs(names: &[String], overrides: &[String]) -> Result<Vec<ClassifierSpec>, CliError> {
    let mut specs = names
        .iter()
        .map(|n| parse_variant(n).map(ClassifierSpec::default_for))
        .collect::<Result<Vec<_>, _>>()?;
    if specs.is_empty() {
        return Err(CliError::usage("no classifiers selected"));
    }
    for o in overrides {
        let (target, value) = o
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("override {o:?} is not variant.key=value")))?;
        let (variant, key) = target
            .split_once('.')
            .ok_or_else(|| CliError::usage(format!("override {o:?} is not variant.key=value")))?;
        let variant = parse_variant(variant)?;
        let value: Value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        let mut hit = false;
        for spec in specs.iter_mut().filter(|s| s.variant() == variant) {
            let mut v = serde_json::to_value(&*spec).expect("serializable");
            v[key] = value.clone();
            *spec = serde_json::from_value(v).map_err(|e| CliError::usage(format!("override {o:?}: {e}")))?;
            hit = true;
        }
        if !hit {
            return Err(CliError::usage(format!("override {o:?} names a classifier that is not selected")));
        }
    }
    Ok(specs)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    harness::write_json(path, value).map_err(CliError::from)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::data(e.to_string())
}

fn generate(a: &GenerateArgs) -> Result<RunFiles, CliError> {
    let base = SyntheticConfig::default();
    let classes = match &a.classes {
        Some(s) => parse_class_list(s).map_err(|e| CliError::usage(e.to_string()))?,
        None => base.classes.clone(),
    };
    let cfg = SyntheticConfig {
        records_per_class: a.per_class.unwrap_or(base.records_per_class),
        classes,
        jitter_sd: a.jitter_sd.unwrap_or(base.jitter_sd),
        l2_5_offset_mean: a.l2_5_offset_mean.unwrap_or(base.l2_5_offset_mean),
        l2_5_offset_sd: a.l2_5_offset_sd.unwrap_or(base.l2_5_offset_sd),
        lcut_noise_sd: a.lcut_noise_sd.unwrap_or(base.lcut_noise_sd),
        rule: base.rule,
        seed: a.seed.unwrap_or(0),
    };
    let records = generate_synthetic(&cfg, &ProfileSet::bisgaard()).map_err(stage("generate"))?;
    let out = out_dir(&a.out)?;
    write_csv(&to_participants(&records), &out.join("records.csv")).map_err(stage("write"))?;
    Ok(RunFiles {
        out,
        inputs: vec![],
        outputs: vec!["records.csv".into()],
    })
}

fn preprocess_cmd(a: &PreprocessArgs) -> Result<RunFiles, CliError> {
    let input = require_input(&a.data.input)?;
    let participants = load_csv(&input).map_err(stage("load"))?;
    let result = preprocess(&participants, &ProfileSet::bisgaard(), &preprocess_config(&a.data))
        .map_err(stage("preprocess"))?;
    let out = out_dir(&a.out)?;
    write_labeled_json(&result.records, &out.join("records.json")).map_err(stage("write"))?;
    write_json(
        &out.join("counts.json"),
        &serde_json::json!({ "counts": result.counts, "classes": result.classes }),
    )?;
    Ok(RunFiles {
        out,
        inputs: vec![input],
        outputs: vec!["records.json".into(), "counts.json".into()],
    })
}

fn rove(a: &RoveArgs) -> Result<RunFiles, CliError> {
    let (records, input) = load_records(&a.data)?;
    let cfg = RovingConfig {
        mean: a.mean.unwrap_or(0.0),
        sd: a.sd.unwrap_or(0.0),
        seed: a.seed.unwrap_or(0),
    };
    let roved = apply_roving(&records, &cfg).map_err(stage("rove"))?;
    let out = out_dir(&a.out)?;
    write_labeled_json(&roved, &out.join("records.json")).map_err(stage("write"))?;
    Ok(RunFiles {
        out,
        inputs: vec![input],
        outputs: vec!["records.json".into()],
    })
}

fn pca(a: &PcaArgs) -> Result<RunFiles, CliError> {
    let (records, input) = load_records(&a.data)?;
    let ds = LabeledDataset::from_records(&records);
    let k = a.components.unwrap_or(FEATURE_NAMES.len());
    let model = PcaModel::fit(ds.features.view(), k).map_err(stage("pca"))?;
    let scores = model.transform(ds.features.view()).map_err(stage("pca"))?;
    let out = out_dir(&a.out)?;
    let pcs: Vec<String> = (1..=k).map(|i| format!("PC{i}")).collect();

    let mut w = csv::Writer::from_path(out.join("pca_loadings.csv")).map_err(csv_err)?;
    let mut header = vec!["feature".to_string()];
    header.extend(pcs.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (j, name) in FEATURE_NAMES.iter().enumerate() {
        let mut row = vec![name.to_string()];
        row.extend(model.loadings.row(j).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("pca_scores.csv")).map_err(csv_err)?;
    let mut header = vec!["participant_id".to_string(), "ear".into(), "label".into()];
    header.extend(pcs.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (i, r) in records.iter().enumerate() {
        let mut row = vec![r.participant_id.clone(), r.ear.as_str().to_string(), r.label.to_string()];
        row.extend(scores.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;

    write_json(
        &out.join("explained_variance.json"),
        &serde_json::json!({
            "components": pcs,
            "explained_variance": model.explained_variance.to_vec(),
            "explained_variance_ratio": model.explained_variance_ratio.to_vec(),
        }),
    )?;
    Ok(RunFiles {
        out,
        inputs: vec![input],
        outputs: vec!["pca_loadings.csv".into(), "pca_scores.csv".into(), "explained_variance.json".into()],
    })
}

fn single_spec(classifier: &Option<String>, set: &Option<Vec<String>>, command: &str) -> Result<ClassifierSpec, CliError> {
    let name = classifier
        .clone()
        .ok_or_else(|| CliError::usage(format!("{command} needs --classifier {{dt,gb,knn,lr,nn,rf,svm}}")))?;
    Ok(build_specs(&[name], set.as_deref().unwrap_or_default())?.remove(0))
}

fn train(a: &TrainArgs) -> Result<RunFiles, CliError> {
    let mut spec = single_spec(&a.classifier, &a.set, "train")?;
    if let Some(seed) = a.seed {
        spec = spec.with_seed(seed);
    }
    let (records, input) = load_records(&a.data)?;
    let ds = LabeledDataset::from_records(&records);
    let model = TrainedModel::fit(&spec, ds.features.view(), &ds.labels).map_err(stage("train"))?;
    let out = out_dir(&a.out)?;
    let mut text = model.to_json().map_err(stage("write"))?;
    text.push('\n');
    write_text(&out.join("model.json"), &text)?;
    Ok(RunFiles {
        out,
        inputs: vec![input],
        outputs: vec!["model.json".into()],
    })
}

struct CvArgs<'a> {
    classifiers: &'a Option<Vec<String>>,
    set: &'a Option<Vec<String>>,
    folds: Option<usize>,
    repeats: Option<usize>,
    stratified: Option<bool>,
    seed: Option<u64>,
    designated: &'a Option<String>,
    roving: RovingConfig,
    permutation_repeats: Option<usize>,
}

fn experiment_config(a: CvArgs) -> Result<ExperimentConfig, CliError> {
    let base = ExperimentConfig::default();
    let names: Vec<String> = match a.classifiers {
        Some(v) => v.clone(),
        None => Variant::ALL.iter().map(|v| v.as_str().to_string()).collect(),
    };
    let classifiers = build_specs(&names, a.set.as_deref().unwrap_or_default())?;
    let designated = match a.designated {
        Some(d) => parse_variant(d)?,
        None if classifiers.iter().any(|s| s.variant() == base.designated) => base.designated,
        None => classifiers[0].variant(),
    };
    let seed = a.seed.unwrap_or(base.seed);
    let repeats = a.permutation_repeats.unwrap_or(DEFAULT_PERMUTATION_REPEATS);
    Ok(ExperimentConfig {
        classifiers,
        folds: a.folds.unwrap_or(base.folds),
        stratified: a.stratified.unwrap_or(base.stratified),
        repeats: a.repeats.unwrap_or(base.repeats),
        seed,
        designated,
        roving: a.roving,
        permutation: (repeats > 0).then(|| PermutationConfig {
            repeats,
            seed,
            ..Default::default()
        }),
    })
}

/// Files written by `write_experiment_outputs` for this report.
fn experiment_files(report: &MetricsReport, prefix: &Path) -> Vec<PathBuf> {
    let mut files = vec!["report.json".to_string(), "per_class_f1.csv".into()];
    if let Some(d) = &report.designated {
        files.push("confusion.csv".into());
        for c in &d.per_class {
            files.push(format!("roc_{}.csv", c.class));
            files.push(format!("pr_{}.csv", c.class));
        }
        files.push("roc_micro.csv".into());
        files.push("pr_micro.csv".into());
    }
    if report.permutation_importance.is_some() {
        files.push("perm_importance.csv".into());
    }
    files.into_iter().map(|f| prefix.join(f)).collect()
}

fn evaluate(a: &EvaluateArgs) -> Result<RunFiles, CliError> {
    let seed = a.seed.unwrap_or(0);
    let cfg = experiment_config(CvArgs {
        classifiers: &a.classifiers,
        set: &a.set,
        folds: a.folds,
        repeats: a.repeats,
        stratified: a.stratified,
        seed: a.seed,
        designated: &a.designated,
        roving: RovingConfig {
            mean: a.rove_mean.unwrap_or(0.0),
            sd: a.rove_sd.unwrap_or(0.0),
            seed: a.rove_seed.unwrap_or(seed),
        },
        permutation_repeats: a.permutation_repeats,
    })?;
    let (records, input) = load_records(&a.data)?;
    let report = run_experiment(&records, &cfg).map_err(stage("evaluate"))?;
    let out = out_dir(&a.out)?;
    write_experiment_outputs(&report, &out).map_err(stage("write"))?;
    Ok(RunFiles {
        outputs: experiment_files(&report, Path::new("")),
        out,
        inputs: vec![input],
    })
}

#[derive(Serialize)]
struct BeeswarmCsvRow<'a> {
    record_id: &'a str,
    feature: &'a str,
    shap_value: f64,
    feature_value: f64,
    rank: usize,
}

fn explain_cmd(a: &ExplainArgs) -> Result<RunFiles, CliError> {
    let spec = single_spec(&a.classifier, &a.set, "explain")?;
    let seed = a.seed.unwrap_or(0);
    let (records, input) = load_records(&a.data)?;
    let ds = LabeledDataset::from_records(&records);
    let model = TrainedModel::fit(&spec, ds.features.view(), &ds.labels).map_err(stage("train"))?;

    let background =
        explain::background_sample(ds.features.view(), a.background.unwrap_or(explain::DEFAULT_BACKGROUND_SIZE), seed);
    let picked = explain::sample_rows(
        ds.len(),
        a.records.unwrap_or(DEFAULT_EXPLAINED_RECORDS),
        seed.wrapping_add(1),
    );
    let x = ds.features.select(ndarray::Axis(0), &picked);
    let shap = explain::class_agnostic_shapley(&model, x.view(), background.view()).map_err(stage("shapley"))?;
    let ids: Vec<String> = picked
        .iter()
        .map(|&i| format!("{}:{}", ds.participant_ids[i], ds.ears[i].as_str()))
        .collect();
    let rows = explain::beeswarm_export(&shap.mean, &ids, &FEATURE_NAMES).map_err(stage("shapley"))?;
    let out = out_dir(&a.out)?;
    let mut w = csv::Writer::from_path(out.join("shap_beeswarm.csv")).map_err(csv_err)?;
    for r in &rows {
        w.serialize(BeeswarmCsvRow {
            record_id: &r.record_id,
            feature: &r.feature,
            shap_value: r.shap_value,
            feature_value: r.feature_value,
            rank: r.rank,
        })
        .map_err(csv_err)?;
    }
    w.flush()?;

    let cfg = ExperimentConfig {
        classifiers: vec![spec.clone()],
        folds: a.folds.unwrap_or(ExperimentConfig::default().folds),
        stratified: a.stratified.unwrap_or(true),
        seed,
        designated: spec.variant(),
        permutation: Some(PermutationConfig {
            repeats: a.permutation_repeats.unwrap_or(DEFAULT_PERMUTATION_REPEATS).max(1),
            seed,
            ..Default::default()
        }),
        ..Default::default()
    };
    let report = run_experiment(&records, &cfg).map_err(stage("permutation importance"))?;
    let imp = report.permutation_importance.as_ref().expect("permutation requested");
    harness::write_importance_csv(&out.join("perm_importance.csv"), imp).map_err(stage("write"))?;
    Ok(RunFiles {
        out,
        inputs: vec![input],
        outputs: vec!["shap_beeswarm.csv".into(), "perm_importance.csv".into()],
    })
}

fn parse_conditions(v: &Option<Vec<String>>) -> Result<Vec<(f64, f64)>, CliError> {
    let Some(v) = v else {
        return Ok(SWEEP_CONDITIONS.to_vec());
    };
    v.iter()
        .map(|c| {
            let parsed = c
                .split_once(':')
                .and_then(|(m, s)| Some((m.trim().parse().ok()?, s.trim().parse().ok()?)));
            parsed.ok_or_else(|| CliError::usage(format!("condition {c:?} is not mean:sd")))
        })
        .collect()
}

fn sweep(a: &SweepArgs) -> Result<RunFiles, CliError> {
    let seed = a.seed.unwrap_or(0);
    let conditions = parse_conditions(&a.conditions)?;
    let cfg = experiment_config(CvArgs {
        classifiers: &a.classifiers,
        set: &a.set,
        folds: a.folds,
        repeats: a.repeats,
        stratified: a.stratified,
        seed: a.seed,
        designated: &a.designated,
        roving: RovingConfig {
            mean: 0.0,
            sd: 0.0,
            seed: a.rove_seed.unwrap_or(seed),
        },
        permutation_repeats: a.permutation_repeats,
    })?;
    let (records, input) = load_records(&a.data)?;
    let result = roving_sweep(&records, &cfg, &conditions).map_err(stage("sweep"))?;
    let out = out_dir(&a.out)?;
    write_sweep_outputs(&result, &out).map_err(stage("write"))?;
    let mut outputs = Vec::new();
    for c in &result.conditions {
        outputs.extend(experiment_files(&c.report, Path::new(&condition_label(c.mean, c.sd))));
    }
    outputs.push("summary.json".into());
    Ok(RunFiles {
        out,
        inputs: vec![input],
        outputs,
    })
}

fn report(a: &ReportArgs) -> Result<RunFiles, CliError> {
    let dir = require_input(&a.input)?;
    let path = dir.join("summary.json");
    let text = fs::read_to_string(&path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let summary: SweepSummary =
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let out = out_dir(&a.out)?;
    write_figure_tables(&summary, &out).map_err(stage("write"))?;
    Ok(RunFiles {
        out,
        inputs: vec![path],
        outputs: vec!["fig_a1_roc.csv".into(), "fig_a2_importance.csv".into()],
    })
}
