//! Template matchers: weighted Euclidean SumMin and thresholded Hamming.

pub mod euclidean;
pub mod hamming;
pub mod weights;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureError, FeatureVector, FEATURE_DIM};
use crate::wavelet::MotherWavelet;

pub use euclidean::{EuclideanConfig, EuclideanTemplate, MatchResult};
pub use hamming::{HammingConfig, HammingResult, HammingTemplate};

/// Floor applied to every standard deviation before dividing by it.
pub const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("need at least {needed} vectors, got {got}")]
    TooFewVectors { needed: usize, got: usize },
    #[error("vectors have inconsistent dimensions")]
    DimensionMismatch,
    #[error("non-finite input")]
    NonFinite,
    #[error("probe wavelet {probe} does not match template wavelet {template}")]
    WaveletMismatch { probe: MotherWavelet, template: MotherWavelet },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("adaptive update requested for a rejected probe")]
    RejectedProbe,
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Euclidean,
    Hamming,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Euclidean, Method::Hamming];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Euclidean => "euclidean",
            Method::Hamming => "hamming",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(Method::Euclidean),
            "hamming" => Ok(Method::Hamming),
            _ => Err(format!("unknown method '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DriftState {
    Ok,
    RetrainRequired,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftStatus {
    pub distance: f64,
    pub bound: f64,
    pub state: DriftState,
}

impl DriftStatus {
    pub(crate) fn new(distance: f64, bound: f64) -> Self {
        let state = if distance > bound { DriftState::RetrainRequired } else { DriftState::Ok };
        Self { distance, bound, state }
    }
}

/// Per-dimension population mean and standard deviation.
pub fn mean_std(vectors: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let dim = vectors[0].len();
    let n = vectors.len() as f64;
    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v.iter()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for v in vectors {
        for ((s, x), m) in var.iter_mut().zip(v.iter()).zip(&mean) {
            *s += (x - m) * (x - m);
        }
    }
    (mean, var.into_iter().map(|s| (s / n).sqrt()).collect())
}

pub(crate) fn check_training(
    training: &[FeatureVector],
    needed: usize,
) -> Result<MotherWavelet, MatchError> {
    if training.len() < needed {
        return Err(MatchError::TooFewVectors { needed, got: training.len() });
    }
    let wavelet = training[0].wavelet;
    for fv in training {
        fv.validate()?;
        if fv.wavelet != wavelet {
            return Err(MatchError::WaveletMismatch { probe: fv.wavelet, template: wavelet });
        }
    }
    Ok(wavelet)
}

pub(crate) fn check_probe(probe: &FeatureVector, wavelet: MotherWavelet) -> Result<(), MatchError> {
    probe.validate()?;
    if probe.wavelet != wavelet {
        return Err(MatchError::WaveletMismatch { probe: probe.wavelet, template: wavelet });
    }
    Ok(())
}

pub(crate) fn check_dim(name: &str, v: &[f64]) -> Result<(), MatchError> {
    if v.len() != FEATURE_DIM {
        return Err(MatchError::InvalidTemplate(format!("{name} has {} entries", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(MatchError::InvalidTemplate(format!("{name} has non-finite entries")));
    }
    Ok(())
}

/// Deterministic digest of a template's serialized state.
pub fn state_hash<T: Serialize>(value: &T) -> String {
    use sha2::{Digest, Sha256};
    let bytes = serde_json::to_vec(value).expect("template serializes");
    hex::encode(Sha256::digest(&bytes))
}
