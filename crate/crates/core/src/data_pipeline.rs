//! Record ingestion, synthetic data, the preprocessing cascade, and the
//! calibration-offset (roving) simulation.
//!
//! The cascade runs in a fixed order:
//! split ears -> drop incomplete -> merge -> label -> PTA filter -> rare-class
//! pruning, optionally followed by roving.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bisgaard::{Audiogram, BisgaardClass, ProfileSet, CLINICAL_GRID};
use crate::error::{Error, Result};
use crate::loudness_model::{
    validate_features, FrequencyFeatures, LoudnessFeatureVector, LoudnessFunction, FEATURE_NAMES,
    N_FEATURES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ear {
    Left,
    Right,
}

impl Ear {
    pub fn as_str(self) -> &'static str {
        match self {
            Ear::Left => "left",
            Ear::Right => "right",
        }
    }

    fn parse(s: &str) -> Option<Ear> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Some(Ear::Left),
            "right" | "r" => Some(Ear::Right),
            _ => None,
        }
    }
}

pub type Thresholds = Vec<Option<f64>>;
pub type RawFeatures = [Option<f64>; N_FEATURES];

/// What was measured on one ear. Either part may be absent (the audiogram and
/// loudness data come from separate sources) or have individual gaps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EarMeasurements {
    /// Thresholds on [`CLINICAL_GRID`].
    pub thresholds: Option<Thresholds>,
    pub features: Option<RawFeatures>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub participant_id: String,
    pub left: Option<EarMeasurements>,
    pub right: Option<EarMeasurements>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarRecord {
    pub participant_id: String,
    pub ear: Ear,
    pub measurements: EarMeasurements,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Audiogram,
    Loudness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedRecord {
    pub participant_id: String,
    pub ear: Ear,
    pub audiogram: Audiogram,
    pub features: LoudnessFeatureVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub participant_id: String,
    pub ear: Ear,
    pub features: LoudnessFeatureVector,
    pub label: BisgaardClass,
    pub pta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audiogram: Option<Audiogram>,
}

pub fn split_ears(records: &[ParticipantRecord]) -> Vec<EarRecord> {
    let mut out = Vec::new();
    for r in records {
        for (ear, m) in [(Ear::Left, &r.left), (Ear::Right, &r.right)] {
            if let Some(m) = m {
                out.push(EarRecord {
                    participant_id: r.participant_id.clone(),
                    ear,
                    measurements: m.clone(),
                });
            }
        }
    }
    out
}

/// Ear records that belong to the given source data set (the part is present,
/// possibly with gaps).
pub fn source_records(records: &[EarRecord], part: Part) -> Vec<EarRecord> {
    records
        .iter()
        .filter(|r| match part {
            Part::Audiogram => r.measurements.thresholds.is_some(),
            Part::Loudness => r.measurements.features.is_some(),
        })
        .cloned()
        .collect()
}

fn part_complete(m: &EarMeasurements, part: Part) -> bool {
    match part {
        Part::Audiogram => m
            .thresholds
            .as_ref()
            .is_some_and(|t| t.len() == CLINICAL_GRID.len() && t.iter().all(|v| v.is_some())),
        Part::Loudness => m
            .features
            .as_ref()
            .is_some_and(|f| f.iter().all(|v| v.is_some())),
    }
}

/// Removes records whose `part` is absent or has any missing value.
pub fn drop_incomplete(records: Vec<EarRecord>, part: Part) -> Vec<EarRecord> {
    records
        .into_iter()
        .filter(|r| part_complete(&r.measurements, part))
        .collect()
}

type Key = (String, Ear);

fn index_unique<'a>(records: &'a [EarRecord], side: &str) -> Result<HashMap<Key, &'a EarRecord>> {
    let mut map = HashMap::with_capacity(records.len());
    for r in records {
        let key = (r.participant_id.clone(), r.ear);
        if map.insert(key, r).is_some() {
            return Err(Error::Data(format!(
                "duplicate key ({}, {}) in {side} records",
                r.participant_id,
                r.ear.as_str()
            )));
        }
    }
    Ok(map)
}

/// Inner join on (participant, ear). Both sides must already be complete.
pub fn merge_by_id_ear(
    audiogram_records: &[EarRecord],
    loudness_records: &[EarRecord],
) -> Result<Vec<MergedRecord>> {
    index_unique(audiogram_records, "audiogram")?;
    let loudness = index_unique(loudness_records, "loudness")?;
    let mut out = Vec::new();
    for a in audiogram_records {
        let Some(l) = loudness.get(&(a.participant_id.clone(), a.ear)) else {
            continue;
        };
        let thresholds = a
            .measurements
            .thresholds
            .as_ref()
            .and_then(|t| t.iter().copied().collect::<Option<Vec<f64>>>())
            .ok_or_else(|| Error::Data(format!("incomplete audiogram for {}", a.participant_id)))?;
        let raw = l
            .measurements
            .features
            .as_ref()
            .and_then(|f| f.iter().copied().collect::<Option<Vec<f64>>>())
            .ok_or_else(|| Error::Data(format!("incomplete features for {}", l.participant_id)))?;
        let mut values = [0.0; N_FEATURES];
        values.copy_from_slice(&raw);
        out.push(MergedRecord {
            participant_id: a.participant_id.clone(),
            ear: a.ear,
            audiogram: Audiogram::new(CLINICAL_GRID.to_vec(), thresholds)?,
            features: LoudnessFeatureVector::from_array(&values),
        });
    }
    Ok(out)
}

/// Assigns each merged record its nearest Bisgaard class and its PTA.
pub fn label_records(records: Vec<MergedRecord>, profiles: &ProfileSet) -> Result<Vec<LabeledRecord>> {
    records
        .into_iter()
        .map(|m| {
            let violations = validate_features(&m.features);
            if let Some(v) = violations.first() {
                return Err(Error::Data(format!(
                    "{} ({}): {v}",
                    m.participant_id,
                    m.ear.as_str()
                )));
            }
            let (label, _) = profiles.classify(&m.audiogram)?;
            let pta = m.audiogram.pta()?;
            Ok(LabeledRecord {
                participant_id: m.participant_id,
                ear: m.ear,
                features: m.features,
                label,
                pta,
                audiogram: Some(m.audiogram),
            })
        })
        .collect()
}

pub const DEFAULT_MIN_PTA: f64 = 20.0;
pub const DEFAULT_MIN_CLASS_FRACTION: f64 = 0.05;
pub const DEFAULT_MIN_CLASS_COUNT: usize = 35;

/// Keeps records with `pta >= min_pta`.
pub fn filter_pta(records: Vec<LabeledRecord>, min_pta: f64) -> Vec<LabeledRecord> {
    records.into_iter().filter(|r| r.pta >= min_pta).collect()
}

/// Removes, in a single pass, every class holding less than `min_fraction` of
/// the records or fewer than `min_count` records. Returns the survivors and
/// the surviving classes in canonical order.
pub fn filter_rare_classes(
    records: Vec<LabeledRecord>,
    min_fraction: f64,
    min_count: usize,
) -> (Vec<LabeledRecord>, Vec<BisgaardClass>) {
    let n = records.len() as f64;
    let mut counts: HashMap<BisgaardClass, usize> = HashMap::new();
    for r in &records {
        *counts.entry(r.label).or_default() += 1;
    }
    let active: Vec<BisgaardClass> = BisgaardClass::ALL
        .into_iter()
        .filter(|c| {
            let count = counts.get(c).copied().unwrap_or(0);
            count > 0 && count >= min_count && (count as f64) / n >= min_fraction
        })
        .collect();
    let keep: HashSet<BisgaardClass> = active.iter().copied().collect();
    let records = records.into_iter().filter(|r| keep.contains(&r.label)).collect();
    (records, active)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub min_pta: f64,
    pub min_class_fraction: f64,
    pub min_class_count: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            min_pta: DEFAULT_MIN_PTA,
            min_class_fraction: DEFAULT_MIN_CLASS_FRACTION,
            min_class_count: DEFAULT_MIN_CLASS_COUNT,
        }
    }
}

/// Record counts after each stage of [`preprocess`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub audiogram_ears: usize,
    pub loudness_ears: usize,
    pub audiogram_complete: usize,
    pub loudness_complete: usize,
    pub merged: usize,
    pub after_pta: usize,
    pub after_rare_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessed {
    pub records: Vec<LabeledRecord>,
    pub classes: Vec<BisgaardClass>,
    pub counts: StageCounts,
}

pub fn preprocess(
    participants: &[ParticipantRecord],
    profiles: &ProfileSet,
    cfg: &PreprocessConfig,
) -> Result<Preprocessed> {
    let ears = split_ears(participants);
    let audiogram = source_records(&ears, Part::Audiogram);
    let loudness = source_records(&ears, Part::Loudness);
    let mut counts = StageCounts {
        audiogram_ears: audiogram.len(),
        loudness_ears: loudness.len(),
        ..Default::default()
    };
    let audiogram = drop_incomplete(audiogram, Part::Audiogram);
    let loudness = drop_incomplete(loudness, Part::Loudness);
    counts.audiogram_complete = audiogram.len();
    counts.loudness_complete = loudness.len();
    let merged = merge_by_id_ear(&audiogram, &loudness).map_err(|e| e.in_stage("merge"))?;
    counts.merged = merged.len();
    let labeled = label_records(merged, profiles).map_err(|e| e.in_stage("label"))?;
    let labeled = filter_pta(labeled, cfg.min_pta);
    counts.after_pta = labeled.len();
    let (records, classes) =
        filter_rare_classes(labeled, cfg.min_class_fraction, cfg.min_class_count);
    counts.after_rare_classes = records.len();
    Ok(Preprocessed {
        records,
        classes,
        counts,
    })
}

/// Participant-level calibration offset drawn from Normal(mean, sd).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RovingConfig {
    pub mean: f64,
    pub sd: f64,
    pub seed: u64,
}

impl RovingConfig {
    pub fn none() -> Self {
        RovingConfig {
            mean: 0.0,
            sd: 0.0,
            seed: 0,
        }
    }

    pub fn is_noop(&self) -> bool {
        self.mean == 0.0 && self.sd == 0.0
    }

    /// Offset for one participant. Depends only on the seed and the id, so it
    /// is unaffected by record order.
    pub fn offset_for(&self, participant_id: &str) -> Result<f64> {
        if !(self.sd >= 0.0) || !self.mean.is_finite() || !self.sd.is_finite() {
            return Err(Error::Config(format!(
                "roving needs finite mean and sd >= 0, got mean {} sd {}",
                self.mean, self.sd
            )));
        }
        if self.sd == 0.0 {
            return Ok(self.mean);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, participant_id));
        let normal = Normal::new(self.mean, self.sd).map_err(|e| Error::Config(e.to_string()))?;
        Ok(normal.sample(&mut rng))
    }
}

/// FNV-1a over the id, folded with the seed.
pub(crate) fn mix_seed(seed: u64, key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in key.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Adds one offset per participant to every level feature of both ears.
/// Slopes are left untouched.
pub fn apply_roving(records: &[LabeledRecord], cfg: &RovingConfig) -> Result<Vec<LabeledRecord>> {
    let mut offsets: HashMap<&str, f64> = HashMap::new();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let offset = match offsets.get(r.participant_id.as_str()) {
            Some(&o) => o,
            None => {
                let o = cfg.offset_for(&r.participant_id)?;
                offsets.insert(&r.participant_id, o);
                o
            }
        };
        let mut roved = r.clone();
        if offset != 0.0 {
            roved.features = r.features.shifted(offset);
        }
        out.push(roved);
    }
    Ok(out)
}

/// Constants of the rule mapping a threshold to loudness-function parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerativeRule {
    pub m_low_intercept: f64,
    pub m_low_per_db: f64,
    pub m_low_range: (f64, f64),
    pub m_high_intercept: f64,
    pub m_high_per_db: f64,
    pub m_high_range: (f64, f64),
}

impl Default for GenerativeRule {
    fn default() -> Self {
        GenerativeRule {
            m_low_intercept: 0.9,
            m_low_per_db: -0.006,
            m_low_range: (0.25, 0.9),
            m_high_intercept: 0.8,
            m_high_per_db: 0.02,
            m_high_range: (0.8, 3.5),
        }
    }
}

impl GenerativeRule {
    /// Loudness recruitment: the lower slope flattens and the upper slope
    /// steepens as the threshold rises.
    pub fn slopes(&self, threshold: f64) -> (f64, f64) {
        let m_low = (self.m_low_intercept + self.m_low_per_db * threshold)
            .clamp(self.m_low_range.0, self.m_low_range.1);
        let m_high = (self.m_high_intercept + self.m_high_per_db * threshold)
            .clamp(self.m_high_range.0, self.m_high_range.1);
        (m_low, m_high)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub records_per_class: usize,
    pub classes: Vec<BisgaardClass>,
    /// Per-frequency audiogram jitter, dB.
    pub jitter_sd: f64,
    /// Distance of L2.5 above the threshold, dB.
    pub l2_5_offset_mean: f64,
    pub l2_5_offset_sd: f64,
    /// Noise separating the reported L_cut from L25, dB.
    pub lcut_noise_sd: f64,
    pub rule: GenerativeRule,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            records_per_class: 150,
            classes: BisgaardClass::STUDY_SIX.to_vec(),
            jitter_sd: 4.0,
            l2_5_offset_mean: 5.0,
            l2_5_offset_sd: 3.0,
            lcut_noise_sd: 2.0,
            rule: GenerativeRule::default(),
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    /// Every record of a class is the class profile verbatim.
    pub fn noiseless(records_per_class: usize, classes: Vec<BisgaardClass>, seed: u64) -> Self {
        SyntheticConfig {
            records_per_class,
            classes,
            jitter_sd: 0.0,
            l2_5_offset_sd: 0.0,
            lcut_noise_sd: 0.0,
            seed,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.records_per_class == 0 {
            return Err(Error::Config("records_per_class must be at least 1".into()));
        }
        if self.classes.is_empty() {
            return Err(Error::Config("synthetic class set is empty".into()));
        }
        for sd in [self.jitter_sd, self.l2_5_offset_sd, self.lcut_noise_sd] {
            if !(sd >= 0.0 && sd.is_finite()) {
                return Err(Error::Config(format!("noise sd {sd} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

fn gaussian(sd: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sd).map_err(|e| Error::Config(e.to_string()))
}

/// Draws labeled records around the Bisgaard profiles. Consecutive replicates
/// of a class are paired into the left and right ear of one participant.
pub fn generate_synthetic(cfg: &SyntheticConfig, profiles: &ProfileSet) -> Result<Vec<LabeledRecord>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jitter = gaussian(cfg.jitter_sd)?;
    let l2_5_noise = gaussian(cfg.l2_5_offset_sd)?;
    let lcut_noise = gaussian(cfg.lcut_noise_sd)?;
    let grid = profiles.grid();
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);

    let mut out = Vec::with_capacity(cfg.records_per_class * cfg.classes.len());
    for &class in &cfg.classes {
        let profile = profiles.get(class).as_audiogram();
        for replicate in 0..cfg.records_per_class {
            let thresholds = CLINICAL_GRID
                .iter()
                .map(|&f| Ok(profile.threshold_at(f.clamp(lo, hi))? + jitter.sample(&mut rng)))
                .collect::<Result<Vec<_>>>()?;
            let audiogram = Audiogram::new(CLINICAL_GRID.to_vec(), thresholds)?;
            let (label, _) = profiles.classify(&audiogram)?;
            let pta = audiogram.pta()?;

            let mut blocks = [None, None];
            for (slot, freq) in blocks.iter_mut().zip([1500.0, 4000.0]) {
                let threshold = audiogram.threshold_at(freq)?;
                let (m_low, m_high) = cfg.rule.slopes(threshold);
                let l2_5 = threshold + cfg.l2_5_offset_mean + l2_5_noise.sample(&mut rng);
                let l_cut = l2_5 + (25.0 - 2.5) / m_low;
                let function = LoudnessFunction::new(l_cut, m_low, m_high)?;
                let mut block = FrequencyFeatures::from_function(&function)?;
                block.l_cut += lcut_noise.sample(&mut rng);
                *slot = Some(block);
            }
            let features = LoudnessFeatureVector {
                f1500: blocks[0].expect("filled"),
                f4000: blocks[1].expect("filled"),
            };
            out.push(LabeledRecord {
                participant_id: format!("{class}-{:04}", replicate / 2),
                ear: if replicate % 2 == 0 { Ear::Left } else { Ear::Right },
                features,
                label,
                pta,
                audiogram: Some(audiogram),
            });
        }
    }
    Ok(out)
}

/// Regroups ear-level records into participants, for CSV export. Records
/// without an audiogram get an absent audiogram block.
pub fn to_participants(records: &[LabeledRecord]) -> Vec<ParticipantRecord> {
    let mut order: Vec<String> = Vec::new();
    let mut by_id: HashMap<String, ParticipantRecord> = HashMap::new();
    for r in records {
        let entry = by_id.entry(r.participant_id.clone()).or_insert_with(|| {
            order.push(r.participant_id.clone());
            ParticipantRecord {
                participant_id: r.participant_id.clone(),
                left: None,
                right: None,
            }
        });
        let thresholds = r.audiogram.as_ref().map(|a| {
            CLINICAL_GRID
                .iter()
                .map(|&f| a.threshold_at(f).ok())
                .collect::<Vec<_>>()
        });
        let m = EarMeasurements {
            thresholds,
            features: Some(r.features.to_array().map(Some)),
        };
        match r.ear {
            Ear::Left => entry.left = Some(m),
            Ear::Right => entry.right = Some(m),
        }
    }
    order.into_iter().map(|id| by_id.remove(&id).expect("present")).collect()
}

/// Labeled records as a feature matrix with aligned labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Array2<f64>,
    pub labels: Vec<BisgaardClass>,
    pub participant_ids: Vec<String>,
    pub ears: Vec<Ear>,
    /// Active classes in canonical order.
    pub classes: Vec<BisgaardClass>,
}

impl LabeledDataset {
    pub fn from_records(records: &[LabeledRecord]) -> Self {
        let mut features = Array2::zeros((records.len(), N_FEATURES));
        for (i, r) in records.iter().enumerate() {
            for (j, v) in r.features.to_array().into_iter().enumerate() {
                features[[i, j]] = v;
            }
        }
        let present: HashSet<BisgaardClass> = records.iter().map(|r| r.label).collect();
        LabeledDataset {
            features,
            labels: records.iter().map(|r| r.label).collect(),
            participant_ids: records.iter().map(|r| r.participant_id.clone()).collect(),
            ears: records.iter().map(|r| r.ear).collect(),
            classes: BisgaardClass::ALL
                .into_iter()
                .filter(|c| present.contains(c))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn threshold_column(freq: f64) -> String {
    format!("f{}", freq as u32)
}

pub fn csv_header() -> Vec<String> {
    let mut header = vec!["id".to_string(), "ear".to_string()];
    header.extend(CLINICAL_GRID.iter().map(|&f| threshold_column(f)));
    header.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
    header
}

fn format_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv_to<W: Write>(records: &[ParticipantRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(csv_header())?;
    for r in records {
        for (ear, m) in [(Ear::Left, &r.left), (Ear::Right, &r.right)] {
            let Some(m) = m else { continue };
            let mut row = vec![r.participant_id.clone(), ear.as_str().to_string()];
            match &m.thresholds {
                Some(t) => row.extend(t.iter().map(|&v| format_cell(v))),
                None => row.extend(std::iter::repeat_n(String::new(), CLINICAL_GRID.len())),
            }
            match &m.features {
                Some(f) => row.extend(f.iter().map(|&v| format_cell(v))),
                None => row.extend(std::iter::repeat_n(String::new(), N_FEATURES)),
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(records: &[ParticipantRecord], path: &Path) -> Result<()> {
    write_csv_to(records, File::create(path)?)
}

pub fn load_csv(path: &Path) -> Result<Vec<ParticipantRecord>> {
    load_csv_from(File::open(path)?)
}

pub fn load_csv_from<R: Read>(reader: R) -> Result<Vec<ParticipantRecord>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let expected = csv_header();
    let mut column_of: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, h) in header.iter().enumerate() {
        if !expected.contains(h) {
            return Err(Error::Schema(h.clone()));
        }
        column_of.insert(h.as_str(), i);
    }
    for name in &expected {
        if !column_of.contains_key(name.as_str()) {
            return Err(Error::Data(format!("missing column {name:?}")));
        }
    }

    let mut order: Vec<String> = Vec::new();
    let mut by_id: HashMap<String, ParticipantRecord> = HashMap::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let parse_err = |message: String| Error::Parse { line, message };
        let cell = |name: &str| row.get(column_of[name]).unwrap_or("").trim();
        let number = |name: &str| -> Result<Option<f64>> {
            let c = cell(name);
            if c.is_empty() {
                return Ok(None);
            }
            c.parse::<f64>()
                .map(Some)
                .map_err(|_| parse_err(format!("column {name}: {c:?} is not a number")))
        };

        let id = cell("id").to_string();
        if id.is_empty() {
            return Err(parse_err("empty id".into()));
        }
        let ear = Ear::parse(cell("ear"))
            .ok_or_else(|| parse_err(format!("ear {:?} is not left/right", cell("ear"))))?;
        let thresholds = CLINICAL_GRID
            .iter()
            .map(|&f| number(&threshold_column(f)))
            .collect::<Result<Vec<_>>>()?;
        let mut features = [None; N_FEATURES];
        for (slot, name) in features.iter_mut().zip(FEATURE_NAMES) {
            *slot = number(name)?;
        }
        let m = EarMeasurements {
            thresholds: thresholds.iter().any(Option::is_some).then_some(thresholds),
            features: features.iter().any(Option::is_some).then_some(features),
        };

        let entry = by_id.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            ParticipantRecord {
                participant_id: id.clone(),
                left: None,
                right: None,
            }
        });
        let slot = match ear {
            Ear::Left => &mut entry.left,
            Ear::Right => &mut entry.right,
        };
        if slot.is_some() {
            return Err(Error::Data(format!(
                "line {line}: duplicate row for ({id}, {})",
                ear.as_str()
            )));
        }
        *slot = Some(m);
    }
    Ok(order.into_iter().map(|id| by_id.remove(&id).expect("present")).collect())
}

pub fn write_labeled_json(records: &[LabeledRecord], path: &Path) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, records)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_labeled_json(path: &Path) -> Result<Vec<LabeledRecord>> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}
