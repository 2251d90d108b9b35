//! Two-slope categorical loudness function and the twelve features derived
//! from it.
//!
//! A loudness function maps presentation level (dB) to categorical units
//! (CU, 0..=50). Below the knee `l_cut` it rises with slope `m_low`, above it
//! with slope `m_high`; the knee sits at 25 CU (medium loudness).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CU_MIN: f64 = 0.0;
pub const CU_MAX: f64 = 50.0;
pub const CU_KNEE: f64 = 25.0;

/// Center frequencies of the narrowband stimuli, in Hz.
pub const CENTER_FREQUENCIES: [u32; 2] = [1500, 4000];

pub const N_FEATURES: usize = 12;

/// Column names, in feature-vector order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "L2.5_1500",
    "L25_1500",
    "L50_1500",
    "MLOW_1500",
    "MHIGH_1500",
    "LCUT_1500",
    "L2.5_4000",
    "L25_4000",
    "L50_4000",
    "MLOW_4000",
    "MHIGH_4000",
    "LCUT_4000",
];

/// Indices of the features that carry an absolute level (affected by a
/// calibration offset). The remaining indices are slopes.
pub const LEVEL_FEATURES: [usize; 8] = [0, 1, 2, 5, 6, 7, 8, 11];
pub const SLOPE_FEATURES: [usize; 4] = [3, 4, 9, 10];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoudnessFunction {
    pub l_cut: f64,
    pub m_low: f64,
    pub m_high: f64,
}

impl LoudnessFunction {
    pub fn new(l_cut: f64, m_low: f64, m_high: f64) -> Result<Self> {
        let f = LoudnessFunction {
            l_cut,
            m_low,
            m_high,
        };
        f.check()?;
        Ok(f)
    }

    fn check(&self) -> Result<()> {
        if !self.l_cut.is_finite() {
            return Err(Error::Parameter(format!("l_cut = {} is not finite", self.l_cut)));
        }
        if !(self.m_low > 0.0 && self.m_low.is_finite()) {
            return Err(Error::Parameter(format!("m_low = {} must be positive", self.m_low)));
        }
        if !(self.m_high > 0.0 && self.m_high.is_finite()) {
            return Err(Error::Parameter(format!("m_high = {} must be positive", self.m_high)));
        }
        Ok(())
    }

    /// Loudness in CU at `level`, clamped to the scale endpoints.
    pub fn cu_at_level(&self, level: f64) -> Result<f64> {
        self.check()?;
        let slope = if level <= self.l_cut {
            self.m_low
        } else {
            self.m_high
        };
        let cu = CU_KNEE + slope * (level - self.l_cut);
        Ok(cu.clamp(CU_MIN, CU_MAX))
    }

    /// Inverse of the unclamped piecewise map; `cu` must lie in (0, 50].
    pub fn level_at_cu(&self, cu: f64) -> Result<f64> {
        self.check()?;
        if !(cu > CU_MIN && cu <= CU_MAX) {
            return Err(Error::Domain {
                value: cu,
                domain: "(0, 50]",
            });
        }
        let slope = if cu <= CU_KNEE { self.m_low } else { self.m_high };
        Ok(self.l_cut + (cu - CU_KNEE) / slope)
    }
}

/// The six features measured at one center frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyFeatures {
    pub l2_5: f64,
    pub l25: f64,
    pub l50: f64,
    pub m_low: f64,
    pub m_high: f64,
    pub l_cut: f64,
}

impl FrequencyFeatures {
    pub fn from_function(f: &LoudnessFunction) -> Result<Self> {
        Ok(FrequencyFeatures {
            l2_5: f.level_at_cu(2.5)?,
            l25: f.level_at_cu(CU_KNEE)?,
            l50: f.level_at_cu(CU_MAX)?,
            m_low: f.m_low,
            m_high: f.m_high,
            l_cut: f.l_cut,
        })
    }

    fn to_array(self) -> [f64; 6] {
        [self.l2_5, self.l25, self.l50, self.m_low, self.m_high, self.l_cut]
    }

    fn from_slice(v: &[f64]) -> Self {
        FrequencyFeatures {
            l2_5: v[0],
            l25: v[1],
            l50: v[2],
            m_low: v[3],
            m_high: v[4],
            l_cut: v[5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoudnessFeatureVector {
    pub f1500: FrequencyFeatures,
    pub f4000: FrequencyFeatures,
}

impl LoudnessFeatureVector {
    pub fn to_array(&self) -> [f64; N_FEATURES] {
        let mut out = [0.0; N_FEATURES];
        out[..6].copy_from_slice(&self.f1500.to_array());
        out[6..].copy_from_slice(&self.f4000.to_array());
        out
    }

    pub fn from_array(v: &[f64; N_FEATURES]) -> Self {
        LoudnessFeatureVector {
            f1500: FrequencyFeatures::from_slice(&v[..6]),
            f4000: FrequencyFeatures::from_slice(&v[6..]),
        }
    }

    /// Adds `offset` dB to every level feature, leaving slopes untouched.
    pub fn shifted(&self, offset: f64) -> Self {
        let mut v = self.to_array();
        for &i in &LEVEL_FEATURES {
            v[i] += offset;
        }
        Self::from_array(&v)
    }
}

pub fn derive_features(
    fn_1500: &LoudnessFunction,
    fn_4000: &LoudnessFunction,
) -> Result<LoudnessFeatureVector> {
    Ok(LoudnessFeatureVector {
        f1500: FrequencyFeatures::from_function(fn_1500)?,
        f4000: FrequencyFeatures::from_function(fn_4000)?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NonFiniteLevel { feature: &'static str },
    NonPositiveSlope { feature: &'static str },
    LevelOrdering { frequency: u32 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NonFiniteLevel { feature } => write!(f, "{feature}: level must be finite"),
            Violation::NonPositiveSlope { feature } => {
                write!(f, "{feature}: slope must be positive")
            }
            Violation::LevelOrdering { frequency } => {
                write!(f, "{frequency} Hz: level ordering L2.5 <= L25 <= L50 violated")
            }
        }
    }
}

/// Lists every violated feature invariant. An empty list means the vector is
/// valid.
pub fn validate_features(v: &LoudnessFeatureVector) -> Vec<Violation> {
    let values = v.to_array();
    let mut out = Vec::new();
    for (block, &frequency) in CENTER_FREQUENCIES.iter().enumerate() {
        let base = block * 6;
        for i in [0, 1, 2, 5] {
            if !values[base + i].is_finite() {
                out.push(Violation::NonFiniteLevel {
                    feature: FEATURE_NAMES[base + i],
                });
            }
        }
        for i in [3, 4] {
            if !(values[base + i] > 0.0 && values[base + i].is_finite()) {
                out.push(Violation::NonPositiveSlope {
                    feature: FEATURE_NAMES[base + i],
                });
            }
        }
        let (l2_5, l25, l50) = (values[base], values[base + 1], values[base + 2]);
        if !(l2_5 <= l25 && l25 <= l50) {
            out.push(Violation::LevelOrdering { frequency });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference() -> LoudnessFunction {
        LoudnessFunction::new(85.0, 0.5, 2.0).unwrap()
    }

    #[test]
    fn forward_values() {
        let f = reference();
        assert_eq!(f.cu_at_level(85.0).unwrap(), 25.0);
        assert_eq!(f.cu_at_level(97.5).unwrap(), 50.0);
        assert_eq!(f.cu_at_level(40.0).unwrap(), 2.5);
        assert_eq!(f.cu_at_level(200.0).unwrap(), 50.0);
        assert_eq!(f.cu_at_level(-20.0).unwrap(), 0.0);
    }

    #[test]
    fn inverse_values() {
        let f = reference();
        assert_eq!(f.level_at_cu(25.0).unwrap(), 85.0);
        assert_eq!(f.level_at_cu(2.5).unwrap(), 40.0);
        assert_eq!(f.level_at_cu(50.0).unwrap(), 97.5);
        assert!(matches!(f.level_at_cu(0.0), Err(Error::Domain { .. })));
        assert!(matches!(f.level_at_cu(50.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn invalid_parameters() {
        assert!(LoudnessFunction::new(85.0, 0.0, 2.0).is_err());
        assert!(LoudnessFunction::new(85.0, 0.5, -1.0).is_err());
        assert!(LoudnessFunction::new(f64::NAN, 0.5, 1.0).is_err());
        let bad = LoudnessFunction {
            l_cut: 80.0,
            m_low: -0.2,
            m_high: 1.0,
        };
        assert!(matches!(bad.cu_at_level(80.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn derived_feature_values() {
        let f = reference();
        let v = derive_features(&f, &f).unwrap();
        let expected = FrequencyFeatures {
            l2_5: 40.0,
            l25: 85.0,
            l50: 97.5,
            m_low: 0.5,
            m_high: 2.0,
            l_cut: 85.0,
        };
        assert_eq!(v.f1500, expected);
        assert_eq!(v.f4000, expected);
        assert!(validate_features(&v).is_empty());

        let unit = LoudnessFunction::new(60.0, 1.0, 1.0).unwrap();
        let u = FrequencyFeatures::from_function(&unit).unwrap();
        assert_eq!((u.l2_5, u.l25, u.l50), (37.5, 60.0, 85.0));
    }

    #[test]
    fn violations_are_listed() {
        let f = reference();
        let mut v = derive_features(&f, &f).unwrap();
        v.f1500.m_low = -0.1;
        let found = validate_features(&v);
        assert_eq!(found.len(), 1);
        assert!(found[0].to_string().contains("slope must be positive"));

        let mut v = derive_features(&f, &f).unwrap();
        v.f4000.l50 = v.f4000.l25 - 1.0;
        let found = validate_features(&v);
        assert_eq!(found, vec![Violation::LevelOrdering { frequency: 4000 }]);
        assert!(found[0].to_string().contains("level ordering"));
    }

    #[test]
    fn array_layout_matches_names() {
        let f = reference();
        let v = derive_features(&f, &LoudnessFunction::new(70.0, 1.0, 1.5).unwrap()).unwrap();
        let a = v.to_array();
        assert_eq!(a[FEATURE_NAMES.iter().position(|n| *n == "LCUT_4000").unwrap()], 70.0);
        assert_eq!(a[FEATURE_NAMES.iter().position(|n| *n == "MHIGH_1500").unwrap()], 2.0);
        assert_eq!(LoudnessFeatureVector::from_array(&a), v);
    }

    fn any_function() -> impl Strategy<Value = LoudnessFunction> {
        (0.0..120.0f64, 0.05..5.0f64, 0.05..5.0f64).prop_map(|(l, a, b)| LoudnessFunction {
            l_cut: l,
            m_low: a,
            m_high: b,
        })
    }

    proptest! {
        #[test]
        fn round_trip(f in any_function(), cu in 1e-6..50.0f64) {
            let level = f.level_at_cu(cu).unwrap();
            let back = f.cu_at_level(level).unwrap();
            prop_assert!((back - cu).abs() < 1e-9, "{back} vs {cu}");
        }

        #[test]
        fn non_decreasing(f in any_function(), start in -50.0..150.0f64) {
            let mut prev = f.cu_at_level(start).unwrap();
            for i in 1..400 {
                let cu = f.cu_at_level(start + 0.5 * i as f64).unwrap();
                prop_assert!(cu >= prev);
                prev = cu;
            }
        }

        #[test]
        fn strictly_ordered_levels(f in any_function(), g in any_function()) {
            let v = derive_features(&f, &g).unwrap();
            for block in [v.f1500, v.f4000] {
                prop_assert!(block.l2_5 < block.l25 && block.l25 < block.l50);
            }
            prop_assert!(validate_features(&v).is_empty());
        }
    }
}
