//! Classification of listeners into Bisgaard standard-audiogram classes from
//! categorical loudness scaling features.
//!
//! The crate covers the whole analysis chain: the loudness-function feature
//! model, nearest-profile labeling, preprocessing and calibration-offset
//! simulation, PCA, seven one-vs-rest classifiers, evaluation metrics,
//! Shapley and permutation explanations, and the cross-validation harness.

pub mod bisgaard;
pub mod classifiers;
pub mod data_pipeline;
pub mod error;
pub mod explain;
pub mod harness;
pub mod loudness_model;
pub mod metrics;
pub mod pca;

pub use error::{Error, ErrorKind, Result};
