use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "loudclass", version, about = "Bisgaard class prediction from loudness scaling features")]
pub struct Cli {
    /// TOML file with one table per subcommand; flags given on the command
    /// line take precedence over its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw synthetic participants around the Bisgaard profiles.
    Generate(GenerateArgs),
    /// Run the cleaning and labeling cascade on a participant CSV.
    Preprocess(PreprocessArgs),
    /// Add a per-participant calibration offset to the level features.
    Rove(RoveArgs),
    /// Principal components of the standardized features.
    Pca(PcaArgs),
    /// Fit one classifier on all records and save it as JSON.
    Train(TrainArgs),
    /// Cross-validate classifiers and export metrics.
    Evaluate(EvaluateArgs),
    /// Shapley values and permutation importance for one classifier.
    Explain(ExplainArgs),
    /// Repeat the evaluation under several roving conditions.
    Sweep(SweepArgs),
    /// Figure tables from a sweep directory.
    Report(ReportArgs),
    /// Rerun the command recorded in a manifest and compare its outputs.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Preprocess(_) => "preprocess",
            Command::Rove(_) => "rove",
            Command::Pca(_) => "pca",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Explain(_) => "explain",
            Command::Sweep(_) => "sweep",
            Command::Report(_) => "report",
            Command::Replay(_) => "replay",
        }
    }
}

/// Where labeled records come from. A `.json` input is read as labeled
/// records; anything else is a participant CSV that goes through the
/// preprocessing cascade first.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct DataArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub min_pta: Option<f64>,
    #[arg(long)]
    pub min_class_fraction: Option<f64>,
    #[arg(long)]
    pub min_class_count: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated class list, e.g. N2,N3,S1.
    #[arg(long)]
    pub classes: Option<String>,
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jitter_sd: Option<f64>,
    #[arg(long)]
    pub l2_5_offset_mean: Option<f64>,
    #[arg(long)]
    pub l2_5_offset_sd: Option<f64>,
    #[arg(long)]
    pub lcut_noise_sd: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct PreprocessArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct RoveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub mean: Option<f64>,
    #[arg(long)]
    pub sd: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct PcaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub components: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// One of dt, gb, knn, lr, nn, rf, svm.
    #[arg(long)]
    pub classifier: Option<String>,
    /// Hyperparameter override `variant.key=value`, repeatable.
    #[arg(long = "set")]
    pub set: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated variants; all seven by default.
    #[arg(long, value_delimiter = ',')]
    pub classifiers: Option<Vec<String>>,
    #[arg(long = "set")]
    pub set: Option<Vec<String>>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub stratified: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Classifier that gets the confusion matrix and curves.
    #[arg(long)]
    pub designated: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub rove_mean: Option<f64>,
    #[arg(long)]
    pub rove_sd: Option<f64>,
    #[arg(long)]
    pub rove_seed: Option<u64>,
    /// Permutation-importance repeats for the designated classifier; 0 skips it.
    #[arg(long)]
    pub permutation_repeats: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ExplainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub classifier: Option<String>,
    #[arg(long = "set")]
    pub set: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Background rows for the Shapley value function.
    #[arg(long)]
    pub background: Option<usize>,
    /// Number of records to explain.
    #[arg(long)]
    pub records: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub stratified: Option<bool>,
    #[arg(long)]
    pub permutation_repeats: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub classifiers: Option<Vec<String>>,
    #[arg(long = "set")]
    pub set: Option<Vec<String>>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub stratified: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub designated: Option<String>,
    #[arg(long)]
    pub rove_seed: Option<u64>,
    /// Roving conditions as `mean:sd`, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub conditions: Option<Vec<String>>,
    #[arg(long)]
    pub permutation_repeats: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ReportArgs {
    /// Directory written by `sweep`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for the replayed outputs.
    #[arg(long)]
    pub out: PathBuf,
}

/// Reads the config file and returns the table for `command`, if any.
pub fn config_section(path: &PathBuf, command: &str) -> Result<Option<toml::Table>, CliError> {
    const SECTIONS: [&str; 9] = [
        "generate",
        "preprocess",
        "rove",
        "pca",
        "train",
        "evaluate",
        "explain",
        "sweep",
        "report",
    ];
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
    if let Some(bad) = table.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
        return Err(CliError::usage(format!("config {}: unknown section [{bad}]", path.display())));
    }
    match table.remove(command) {
        None => Ok(None),
        Some(toml::Value::Table(t)) => Ok(Some(t)),
        Some(_) => Err(CliError::usage(format!("config {}: [{command}] must be a table", path.display()))),
    }
}

/// Layers command-line values over config values. Keys the argument struct
/// does not know are rejected.
pub fn overlay<T>(cli: &T, file: Option<toml::Table>) -> Result<T, CliError>
where
    T: Serialize + DeserializeOwned + Default,
{
    let known: BTreeSet<String> = match serde_json::to_value(T::default()).expect("serializable") {
        Value::Object(m) => m.keys().cloned().collect(),
        _ => BTreeSet::new(),
    };
    let mut merged = Map::new();
    if let Some(table) = file {
        let value = serde_json::to_value(table).map_err(|e| CliError::usage(e.to_string()))?;
        if let Value::Object(m) = value {
            for (k, v) in m {
                if !known.contains(&k) {
                    return Err(CliError::usage(format!("unknown config key {k:?}")));
                }
                merged.insert(k, v);
            }
        }
    }
    if let Value::Object(m) = serde_json::to_value(cli).expect("serializable") {
        for (k, v) in m {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::usage(format!("config: {e}")))
}
