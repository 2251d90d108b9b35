//! Seven binary learners behind one one-vs-rest interface.
//!
//! Features are standardized with statistics from the training rows only.
//! Each class gets its own binary submodel and a row is assigned to the
//! class with the highest submodel score.

pub mod boosting;
pub mod forest;
pub mod knn;
pub mod logistic;
pub mod mlp;
pub mod optim;
pub mod svm;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::bisgaard::BisgaardClass;
use crate::error::{Error, Result};

pub use boosting::{GradientBoostingModel, GradientBoostingParams};
pub use forest::{RandomForestModel, RandomForestParams};
pub use knn::{KnnModel, KnnParams};
pub use logistic::{LogisticModel, LogisticParams};
pub use mlp::{MlpModel, MlpParams};
pub use svm::{SvmModel, SvmParams};
pub use tree::{DecisionTreeModel, DecisionTreeParams};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Dt,
    Gb,
    Knn,
    Lr,
    Nn,
    Rf,
    Svm,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Dt,
        Variant::Gb,
        Variant::Knn,
        Variant::Lr,
        Variant::Nn,
        Variant::Rf,
        Variant::Svm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Dt => "dt",
            Variant::Gb => "gb",
            Variant::Knn => "knn",
            Variant::Lr => "lr",
            Variant::Nn => "nn",
            Variant::Rf => "rf",
            Variant::Svm => "svm",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown classifier {s:?}; expected one of dt, gb, knn, lr, nn, rf, svm")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum ClassifierSpec {
    Dt(DecisionTreeParams),
    Gb(GradientBoostingParams),
    Knn(KnnParams),
    Lr(LogisticParams),
    Nn(MlpParams),
    Rf(RandomForestParams),
    Svm(SvmParams),
}

impl ClassifierSpec {
    pub fn default_for(variant: Variant) -> Self {
        match variant {
            Variant::Dt => ClassifierSpec::Dt(Default::default()),
            Variant::Gb => ClassifierSpec::Gb(Default::default()),
            Variant::Knn => ClassifierSpec::Knn(Default::default()),
            Variant::Lr => ClassifierSpec::Lr(Default::default()),
            Variant::Nn => ClassifierSpec::Nn(Default::default()),
            Variant::Rf => ClassifierSpec::Rf(Default::default()),
            Variant::Svm => ClassifierSpec::Svm(Default::default()),
        }
    }

    pub fn variant(&self) -> Variant {
        match self {
            ClassifierSpec::Dt(_) => Variant::Dt,
            ClassifierSpec::Gb(_) => Variant::Gb,
            ClassifierSpec::Knn(_) => Variant::Knn,
            ClassifierSpec::Lr(_) => Variant::Lr,
            ClassifierSpec::Nn(_) => Variant::Nn,
            ClassifierSpec::Rf(_) => Variant::Rf,
            ClassifierSpec::Svm(_) => Variant::Svm,
        }
    }

    /// Seed of the spec; KNN and SVM are deterministic and have none.
    pub fn seed(&self) -> Option<u64> {
        match self {
            ClassifierSpec::Dt(p) => Some(p.seed),
            ClassifierSpec::Gb(p) => Some(p.seed),
            ClassifierSpec::Lr(p) => Some(p.seed),
            ClassifierSpec::Nn(p) => Some(p.seed),
            ClassifierSpec::Rf(p) => Some(p.seed),
            ClassifierSpec::Knn(_) | ClassifierSpec::Svm(_) => None,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            ClassifierSpec::Dt(p) => p.seed = seed,
            ClassifierSpec::Gb(p) => p.seed = seed,
            ClassifierSpec::Lr(p) => p.seed = seed,
            ClassifierSpec::Nn(p) => p.seed = seed,
            ClassifierSpec::Rf(p) => p.seed = seed,
            ClassifierSpec::Knn(_) | ClassifierSpec::Svm(_) => {}
        }
        out
    }

    fn fit_binary(&self, x: ArrayView2<f64>, y: &[bool], class_index: usize) -> BinaryModel {
        let spec = match self.seed() {
            Some(s) => self.with_seed(s.wrapping_add(class_index as u64)),
            None => self.clone(),
        };
        match &spec {
            ClassifierSpec::Dt(p) => BinaryModel::Dt(DecisionTreeModel::fit(x, y, p)),
            ClassifierSpec::Gb(p) => BinaryModel::Gb(GradientBoostingModel::fit(x, y, p)),
            ClassifierSpec::Knn(p) => BinaryModel::Knn(KnnModel::fit(x, y, p)),
            ClassifierSpec::Lr(p) => BinaryModel::Lr(LogisticModel::fit(x, y, p)),
            ClassifierSpec::Nn(p) => BinaryModel::Nn(MlpModel::fit(x, y, p)),
            ClassifierSpec::Rf(p) => BinaryModel::Rf(RandomForestModel::fit(x, y, p)),
            ClassifierSpec::Svm(p) => BinaryModel::Svm(SvmModel::fit(x, y, p)),
        }
    }
}

/// Per-feature standardization learned from training rows. Uses the
/// population standard deviation; constant columns get scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    pub mean: Array1<f64>,
    pub scale: Array1<f64>,
}

impl StandardScaler {
    pub fn fit(x: ArrayView2<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::Shape("cannot fit a scaler on zero rows".into()));
        }
        let mean = x.mean_axis(Axis(0)).expect("rows > 0");
        let scale = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 0.0 && s.is_finite() { s } else { 1.0 });
        Ok(StandardScaler { mean, scale })
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::Shape(format!(
                "expected {} feature columns, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        Ok((&x - &self.mean) / &self.scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "model", rename_all = "lowercase")]
pub enum BinaryModel {
    Dt(DecisionTreeModel),
    Gb(GradientBoostingModel),
    Knn(KnnModel),
    Lr(LogisticModel),
    Nn(MlpModel),
    Rf(RandomForestModel),
    Svm(SvmModel),
}

impl BinaryModel {
    /// Positive-class score in [0, 1] of an already scaled row.
    pub fn score(&self, row: ArrayView1<f64>) -> f64 {
        match self {
            BinaryModel::Dt(m) => m.score(row),
            BinaryModel::Gb(m) => m.score(row),
            BinaryModel::Knn(m) => m.score(row),
            BinaryModel::Lr(m) => m.score(row),
            BinaryModel::Nn(m) => m.score(row),
            BinaryModel::Rf(m) => m.score(row),
            BinaryModel::Svm(m) => m.score(row),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub spec: ClassifierSpec,
    pub scaler: StandardScaler,
    pub classes: Vec<BisgaardClass>,
    /// One submodel per entry of `classes`, in the same order.
    pub submodels: Vec<BinaryModel>,
}

impl TrainedModel {
    /// Fits with the classes present in `y`, in canonical order.
    pub fn fit(spec: &ClassifierSpec, x: ArrayView2<f64>, y: &[BisgaardClass]) -> Result<Self> {
        let classes: Vec<BisgaardClass> = BisgaardClass::ALL.into_iter().filter(|c| y.contains(c)).collect();
        Self::fit_with_classes(spec, x, y, &classes)
    }

    pub fn fit_with_classes(
        spec: &ClassifierSpec,
        x: ArrayView2<f64>,
        y: &[BisgaardClass],
        classes: &[BisgaardClass],
    ) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Shape(format!("{} rows but {} labels", x.nrows(), y.len())));
        }
        if let Some((i, _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite feature at row {}, column {}", i.0, i.1)));
        }
        if let Some(bad) = y.iter().find(|l| !classes.contains(l)) {
            return Err(Error::Data(format!("label {bad} is not in the class list")));
        }
        let present = classes.iter().filter(|c| y.contains(c)).count();
        if present < 2 {
            let only = y.first().map(|c| c.to_string()).unwrap_or_else(|| "none".into());
            return Err(Error::DegenerateLabels(only));
        }
        if y.len() < 2 * classes.len() {
            return Err(Error::Config(format!(
                "{} rows are too few for {} classes",
                y.len(),
                classes.len()
            )));
        }
        let scaler = StandardScaler::fit(x)?;
        let z = scaler.transform(x)?;
        let submodels = classes
            .iter()
            .enumerate()
            .map(|(c, class)| {
                let target: Vec<bool> = y.iter().map(|l| l == class).collect();
                spec.fit_binary(z.view(), &target, c)
            })
            .collect();
        Ok(TrainedModel {
            format_version: FORMAT_VERSION,
            spec: spec.clone(),
            scaler,
            classes: classes.to_vec(),
            submodels,
        })
    }

    /// n x C matrix of per-class scores. Rows need not sum to one.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let z = self.scaler.transform(x)?;
        let mut out = Array2::zeros((z.nrows(), self.classes.len()));
        for (i, row) in z.rows().into_iter().enumerate() {
            for (c, m) in self.submodels.iter().enumerate() {
                out[[i, c]] = m.score(row).clamp(0.0, 1.0);
            }
        }
        Ok(out)
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<BisgaardClass>> {
        let proba = self.predict_proba(x)?;
        let z = self.scaler.transform(x)?;
        Ok(proba
            .rows()
            .into_iter()
            .zip(z.rows())
            .map(|(p, row)| self.classes[self.pick(p, row)])
            .collect())
    }

    /// Argmax with the first class winning ties. For nearest neighbours a
    /// tie goes to the class of the closest training row when it is tied.
    fn pick(&self, p: ArrayView1<f64>, row: ArrayView1<f64>) -> usize {
        let best = argmax_first(p);
        if let Some(BinaryModel::Knn(_)) = self.submodels.first() {
            let tied: Vec<usize> = (0..p.len()).filter(|&c| p[c] == p[best]).collect();
            if tied.len() > 1 {
                for &c in &tied {
                    if let BinaryModel::Knn(m) = &self.submodels[c] {
                        if m.nearest_is_positive(row) {
                            return c;
                        }
                    }
                }
            }
        }
        best
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: TrainedModel = serde_json::from_str(text)?;
        if model.format_version != FORMAT_VERSION {
            return Err(Error::Data(format!(
                "model format version {} is not supported (expected {FORMAT_VERSION})",
                model.format_version
            )));
        }
        if model.submodels.len() != model.classes.len() {
            return Err(Error::Data("model has a submodel count different from its class count".into()));
        }
        Ok(model)
    }
}

/// Index of the largest entry; the earliest index wins ties.
pub fn argmax_first(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn three_blobs() -> (Array2<f64>, Vec<BisgaardClass>) {
        let centres = [(-3.0, 0.0), (3.0, 0.0), (0.0, 4.0)];
        let classes = [BisgaardClass::N2, BisgaardClass::N3, BisgaardClass::S1];
        let mut x = Array2::zeros((45, 2));
        let mut y = Vec::new();
        for i in 0..45 {
            let c = i % 3;
            x[[i, 0]] = centres[c].0 + ((i * 7) % 5) as f64 * 0.1;
            x[[i, 1]] = centres[c].1 + ((i * 11) % 5) as f64 * 0.1;
            y.push(classes[c]);
        }
        (x, y)
    }

    #[test]
    fn argmax_prefers_first_on_ties() {
        assert_eq!(argmax_first(array![0.1, 0.9, 0.3].view()), 1);
        assert_eq!(argmax_first(array![0.4, 0.7, 0.7].view()), 1);
    }

    #[test]
    fn every_variant_separates_blobs() {
        let (x, y) = three_blobs();
        for v in Variant::ALL {
            let m = TrainedModel::fit(&ClassifierSpec::default_for(v), x.view(), &y).unwrap();
            let p = m.predict_proba(x.view()).unwrap();
            assert!(p.iter().all(|s| (0.0..=1.0).contains(s)));
            assert_eq!(m.predict(x.view()).unwrap(), y, "{v}");
        }
    }

    #[test]
    fn json_round_trip() {
        let (x, y) = three_blobs();
        for v in Variant::ALL {
            let m = TrainedModel::fit(&ClassifierSpec::default_for(v), x.view(), &y).unwrap();
            let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back.predict_proba(x.view()).unwrap(), m.predict_proba(x.view()).unwrap());
        }
    }

    #[test]
    fn input_errors() {
        let (x, y) = three_blobs();
        let spec = ClassifierSpec::default_for(Variant::Lr);
        let single = vec![BisgaardClass::N2; 45];
        assert!(matches!(TrainedModel::fit(&spec, x.view(), &single), Err(Error::DegenerateLabels(_))));
        let mut bad = x.clone();
        bad[[3, 1]] = f64::NAN;
        assert!(matches!(TrainedModel::fit(&spec, bad.view(), &y), Err(Error::Data(_))));
        let m = TrainedModel::fit(&spec, x.view(), &y).unwrap();
        assert!(matches!(m.predict(Array2::zeros((2, 3)).view()), Err(Error::Shape(_))));
        assert!(matches!(
            TrainedModel::fit(&spec, x.slice(ndarray::s![..5, ..]), &y[..5]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn knn_ties_go_to_nearest_row() {
        // the query's two neighbours are an S1 row (closer) and an N2 row
        let x = array![[0.0], [10.0], [1.0], [11.0], [20.0], [21.0]];
        let y = [
            BisgaardClass::N2,
            BisgaardClass::N2,
            BisgaardClass::S1,
            BisgaardClass::S1,
            BisgaardClass::N3,
            BisgaardClass::N3,
        ];
        let m = TrainedModel::fit(&ClassifierSpec::default_for(Variant::Knn), x.view(), &y).unwrap();
        let q = array![[0.6]];
        let p = m.predict_proba(q.view()).unwrap();
        assert_eq!(p.row(0).to_vec(), vec![0.5, 0.0, 0.5]);
        assert_eq!(m.predict(q.view()).unwrap(), vec![BisgaardClass::S1]);
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("SVM".parse::<Variant>().unwrap(), Variant::Svm);
        assert!("tree".parse::<Variant>().is_err());
        let spec: ClassifierSpec = serde_json::from_str(r#"{"variant":"knn","k":3}"#).unwrap();
        assert_eq!(spec, ClassifierSpec::Knn(KnnParams { k: 3 }));
        let spec: ClassifierSpec = serde_json::from_str(r#"{"variant":"dt"}"#).unwrap();
        assert_eq!(spec, ClassifierSpec::default_for(Variant::Dt));
    }
}
