//! The ten Bisgaard standard audiograms and nearest-profile matching.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROFILE_TABLE: &str = include_str!("../data/bisgaard_profiles.tsv");

/// Frequencies at which the clinical audiograms are measured, in Hz.
pub const CLINICAL_GRID: [f64; 11] = [
    125.0, 250.0, 500.0, 750.0, 1000.0, 1500.0, 2000.0, 3000.0, 4000.0, 6000.0, 8000.0,
];

pub const PTA_FREQUENCIES: [f64; 4] = [500.0, 1000.0, 2000.0, 4000.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// Flat and moderately sloping losses.
    N,
    /// Steeply sloping losses.
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BisgaardClass {
    family: Family,
    index: u8,
}

impl BisgaardClass {
    pub const N1: Self = Self::n(1);
    pub const N2: Self = Self::n(2);
    pub const N3: Self = Self::n(3);
    pub const N4: Self = Self::n(4);
    pub const N5: Self = Self::n(5);
    pub const N6: Self = Self::n(6);
    pub const N7: Self = Self::n(7);
    pub const S1: Self = Self::s(1);
    pub const S2: Self = Self::s(2);
    pub const S3: Self = Self::s(3);

    pub const ALL: [Self; 10] = [
        Self::N1,
        Self::N2,
        Self::N3,
        Self::N4,
        Self::N5,
        Self::N6,
        Self::N7,
        Self::S1,
        Self::S2,
        Self::S3,
    ];

    /// The six classes that survive rare-class pruning on the clinical data.
    pub const STUDY_SIX: [Self; 6] = [Self::N2, Self::N3, Self::N4, Self::S1, Self::S2, Self::S3];

    const fn n(index: u8) -> Self {
        BisgaardClass {
            family: Family::N,
            index,
        }
    }

    const fn s(index: u8) -> Self {
        BisgaardClass {
            family: Family::S,
            index,
        }
    }

    pub fn family(self) -> Family {
        self.family
    }

    /// Higher rank means more hearing loss within a family.
    pub fn severity_rank(self) -> u8 {
        self.index
    }

    /// Key used to break RMSE ties: milder first, N before S.
    fn tie_key(self) -> (u8, Family) {
        (self.index, self.family)
    }
}

impl fmt::Display for BisgaardClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let family = match self.family {
            Family::N => 'N',
            Family::S => 'S',
        };
        write!(f, "{family}{}", self.index)
    }
}

impl FromStr for BisgaardClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        BisgaardClass::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Data(format!("unknown Bisgaard class {s:?}")))
    }
}

impl TryFrom<String> for BisgaardClass {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BisgaardClass> for String {
    fn from(c: BisgaardClass) -> String {
        c.to_string()
    }
}

/// Parses a comma-separated class list such as `N2,N3,S1`.
pub fn parse_class_list(s: &str) -> Result<Vec<BisgaardClass>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Audiogram {
    pub frequencies: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl Audiogram {
    pub fn new(frequencies: Vec<f64>, thresholds: Vec<f64>) -> Result<Self> {
        if frequencies.len() != thresholds.len() {
            return Err(Error::Shape(format!(
                "{} frequencies but {} thresholds",
                frequencies.len(),
                thresholds.len()
            )));
        }
        if frequencies.is_empty() {
            return Err(Error::Data("audiogram has no frequencies".into()));
        }
        if frequencies.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Data("audiogram frequencies must be strictly increasing".into()));
        }
        if thresholds.iter().any(|t| !t.is_finite()) {
            return Err(Error::Data("audiogram thresholds must be finite".into()));
        }
        Ok(Audiogram {
            frequencies,
            thresholds,
        })
    }

    /// Threshold at `frequency`, log-frequency interpolated between measured
    /// points.
    pub fn threshold_at(&self, frequency: f64) -> Result<f64> {
        let freqs = &self.frequencies;
        let first = freqs[0];
        let last = freqs[freqs.len() - 1];
        if !(frequency >= first && frequency <= last) {
            return Err(Error::Range(frequency));
        }
        match freqs.binary_search_by(|f| f.total_cmp(&frequency)) {
            Ok(i) => Ok(self.thresholds[i]),
            Err(i) => {
                let (f0, f1) = (freqs[i - 1], freqs[i]);
                let (t0, t1) = (self.thresholds[i - 1], self.thresholds[i]);
                let w = (frequency / f0).log2() / (f1 / f0).log2();
                Ok(t0 + w * (t1 - t0))
            }
        }
    }

    pub fn resample(&self, grid: &[f64]) -> Result<Audiogram> {
        let thresholds = grid
            .iter()
            .map(|&f| self.threshold_at(f))
            .collect::<Result<Vec<_>>>()?;
        Audiogram::new(grid.to_vec(), thresholds)
    }

    pub fn pta(&self) -> Result<f64> {
        let mut sum = 0.0;
        for f in PTA_FREQUENCIES {
            sum += self.threshold_at(f)?;
        }
        Ok(sum / PTA_FREQUENCIES.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardAudiogram {
    pub class: BisgaardClass,
    pub grid: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl StandardAudiogram {
    pub fn as_audiogram(&self) -> Audiogram {
        Audiogram {
            frequencies: self.grid.clone(),
            thresholds: self.thresholds.clone(),
        }
    }
}

/// A complete set of ten standard audiograms on one shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    profiles: Vec<StandardAudiogram>,
}

impl ProfileSet {
    /// The checked-in Bisgaard transcription.
    pub fn bisgaard() -> Self {
        Self::parse(PROFILE_TABLE).expect("bundled profile table is well formed")
    }

    /// Parses a tab- or whitespace-separated table: a header row `class f1 f2 ...`
    /// followed by one row per class.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty profile table".into()))?;
        let grid = header
            .split_whitespace()
            .skip(1)
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad frequency {t:?} in profile header")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut profiles = Vec::new();
        for line in lines {
            let mut cells = line.split_whitespace();
            let class: BisgaardClass = cells.next().unwrap_or_default().parse()?;
            let thresholds = cells
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad threshold {t:?} for {class}")))
                })
                .collect::<Result<Vec<_>>>()?;
            profiles.push(StandardAudiogram {
                class,
                grid: grid.clone(),
                thresholds,
            });
        }
        Self::new(profiles)
    }

    pub fn new(profiles: Vec<StandardAudiogram>) -> Result<Self> {
        if profiles.len() != BisgaardClass::ALL.len() {
            return Err(Error::Config(format!(
                "expected {} profiles, got {}",
                BisgaardClass::ALL.len(),
                profiles.len()
            )));
        }
        let grid = &profiles[0].grid;
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("profile grid must be strictly increasing".into()));
        }
        for p in &profiles {
            if &p.grid != grid || p.thresholds.len() != grid.len() {
                return Err(Error::Config(format!("profile {} is not on the shared grid", p.class)));
            }
            if p.thresholds.iter().any(|t| !t.is_finite()) {
                return Err(Error::Config(format!("profile {} has non-finite values", p.class)));
            }
        }
        for c in BisgaardClass::ALL {
            if profiles.iter().filter(|p| p.class == c).count() != 1 {
                return Err(Error::Config(format!("profile {c} must appear exactly once")));
            }
        }
        Ok(ProfileSet { profiles })
    }

    pub fn grid(&self) -> &[f64] {
        &self.profiles[0].grid
    }

    pub fn profiles(&self) -> &[StandardAudiogram] {
        &self.profiles
    }

    pub fn get(&self, class: BisgaardClass) -> &StandardAudiogram {
        self.profiles
            .iter()
            .find(|p| p.class == class)
            .expect("profile set is complete")
    }

    /// Nearest profile by RMSE. The audiogram is resampled onto the profile
    /// grid first.
    pub fn classify(&self, audiogram: &Audiogram) -> Result<(BisgaardClass, f64)> {
        classify(audiogram, &self.profiles)
    }
}

/// Root-mean-square difference between an audiogram and a profile on the
/// profile's grid.
pub fn rmse(a: &Audiogram, s: &StandardAudiogram) -> Result<f64> {
    if a.frequencies != s.grid {
        return Err(Error::Shape(
            "audiogram must be resampled onto the profile grid".into(),
        ));
    }
    let sum: f64 = a
        .thresholds
        .iter()
        .zip(&s.thresholds)
        .map(|(x, y)| (x - y).powi(2))
        .sum();
    Ok((sum / s.grid.len() as f64).sqrt())
}

// RMSE values this close are treated as a tie and resolved by `tie_key`.
const TIE_TOLERANCE: f64 = 1e-9;

pub fn classify(a: &Audiogram, profiles: &[StandardAudiogram]) -> Result<(BisgaardClass, f64)> {
    if profiles.len() != BisgaardClass::ALL.len() {
        return Err(Error::Config(format!(
            "classification needs all {} profiles, got {}",
            BisgaardClass::ALL.len(),
            profiles.len()
        )));
    }
    let grid = &profiles[0].grid;
    let resampled;
    let on_grid = if &a.frequencies == grid {
        a
    } else {
        resampled = a.resample(grid)?;
        &resampled
    };
    let mut best: Option<(BisgaardClass, f64)> = None;
    for p in profiles {
        let r = rmse(on_grid, p)?;
        best = match best {
            None => Some((p.class, r)),
            Some((c, br)) => {
                let tie = (r - br).abs() <= TIE_TOLERANCE * br.max(1.0);
                if (tie && p.class.tie_key() < c.tie_key()) || (!tie && r < br) {
                    Some((p.class, r.min(br)))
                } else {
                    Some((c, br.min(r)))
                }
            }
        };
    }
    Ok(best.expect("profiles non-empty"))
}
