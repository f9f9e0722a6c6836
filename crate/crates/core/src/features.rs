//! Per-channel sub-band statistics forming the 184-dimensional feature vector.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{Channel, StateMatrix};
use crate::wavelet::{modwt, ModwtPyramid, MotherWavelet, WaveletError, PIPELINE_DEPTH};

/// Statistics per channel: 4 per wavelet band plus 3 for the scaling band.
pub const FEATURES_PER_CHANNEL: usize = 4 * PIPELINE_DEPTH + 3;
pub const FEATURE_DIM: usize = FEATURES_PER_CHANNEL * 8;
pub const LAYOUT_VERSION: &str = "v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
    #[error("feature vector has {0} entries, expected {FEATURE_DIM}")]
    Length(usize),
    #[error("unsupported feature layout '{0}' (expected '{LAYOUT_VERSION}'); re-enroll to migrate")]
    Layout(String),
    #[error("non-finite feature value at index {0}")]
    NonFinite(usize),
}

/// Position of a statistic inside one channel's block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Mean,
    Std,
    Max,
    Ratio,
}

/// Describes feature index `i`: its channel, band (1-based level, or
/// `None` for the scaling band) and statistic.
pub fn describe(i: usize) -> (Channel, Option<usize>, Statistic) {
    let channel = Channel::ALL[i / FEATURES_PER_CHANNEL];
    let local = i % FEATURES_PER_CHANNEL;
    let stat = |s| match s {
        0 => Statistic::Mean,
        1 => Statistic::Std,
        2 => Statistic::Max,
        _ => Statistic::Ratio,
    };
    if local < 4 * PIPELINE_DEPTH {
        (channel, Some(local / 4 + 1), stat(local % 4))
    } else {
        (channel, None, stat(local - 4 * PIPELINE_DEPTH))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub layout: String,
    pub wavelet: MotherWavelet,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(wavelet: MotherWavelet, values: Vec<f64>) -> Result<Self, FeatureError> {
        let fv = Self { layout: LAYOUT_VERSION.to_string(), wavelet, values };
        fv.validate()?;
        Ok(fv)
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.layout != LAYOUT_VERSION {
            return Err(FeatureError::Layout(self.layout.clone()));
        }
        if self.values.len() != FEATURE_DIM {
            return Err(FeatureError::Length(self.values.len()));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(i));
        }
        Ok(())
    }

    pub fn channel_block(&self, c: Channel) -> &[f64] {
        let start = c.index() * FEATURES_PER_CHANNEL;
        &self.values[start..start + FEATURES_PER_CHANNEL]
    }
}

struct BandStats {
    mean: f64,
    std: f64,
    max: f64,
}

fn abs_stats(band: &[f64]) -> BandStats {
    let n = band.len() as f64;
    let mean = band.iter().map(|v| v.abs()).sum::<f64>() / n;
    let var = band.iter().map(|v| (v.abs() - mean).powi(2)).sum::<f64>() / n;
    let max = band.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    BandStats { mean, std: var.sqrt(), max }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Statistics of one pyramid: for each wavelet band `[mean, std, max, ratio]`
/// of absolute values (ratio against the next band, the last one against the
/// scaling band), then `[mean, std, max]` of the absolute scaling band.
/// Yields `4J + 3` values (23 at the pipeline depth).
pub fn subband_stats(p: &ModwtPyramid) -> Vec<f64> {
    let mut bands: Vec<BandStats> = p.details.iter().map(|b| abs_stats(b)).collect();
    bands.push(abs_stats(&p.smooth));
    let mut out = Vec::with_capacity(4 * p.depth() + 3);
    for j in 0..p.depth() {
        let b = &bands[j];
        out.extend([b.mean, b.std, b.max, ratio(b.mean, bands[j + 1].mean)]);
    }
    let s = &bands[p.depth()];
    out.extend([s.mean, s.std, s.max]);
    out
}

/// Extracts the feature vector of a state matrix. Channels are transformed
/// in parallel and concatenated in fixed channel order.
pub fn extract_features(
    state: &StateMatrix,
    wavelet: MotherWavelet,
) -> Result<FeatureVector, FeatureError> {
    let blocks = state
        .channels()
        .into_par_iter()
        .map(|ch| modwt(ch, wavelet, PIPELINE_DEPTH).map(|p| subband_stats(&p)))
        .collect::<Result<Vec<_>, _>>()?;
    FeatureVector::new(wavelet, blocks.concat())
}
