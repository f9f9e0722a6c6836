//! Thresholded per-feature deviation counting with mean-shift adaptation.

use serde::{Deserialize, Serialize};

use super::{check_dim, check_probe, check_training, mean_std, DriftStatus, MatchError, SIGMA_FLOOR};
use crate::evaluation::{calibrate_threshold, DEFAULT_FMR_TARGET};
use crate::features::{FeatureError, FeatureVector, FEATURE_DIM, LAYOUT_VERSION};
use crate::wavelet::MotherWavelet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HammingConfig {
    pub wavelet: MotherWavelet,
    /// Normalized deviation above which a feature counts as different.
    pub feature_threshold: f64,
    pub adapt_rate: f64,
    pub sigma_floor: f64,
    /// Drift bound in sigma-normalized units.
    pub drift_bound: f64,
    /// Inflation of the largest leave-one-out genuine count; the calibrated
    /// threshold never exceeds it.
    pub genuine_margin: f64,
}

impl Default for HammingConfig {
    fn default() -> Self {
        Self {
            wavelet: MotherWavelet::C12,
            feature_threshold: 1.59,
            adapt_rate: 0.1,
            sigma_floor: SIGMA_FLOOR,
            drift_bound: 2.0,
            genuine_margin: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HammingResult {
    pub distance: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HammingTemplate {
    pub user_id: String,
    pub wavelet: MotherWavelet,
    pub layout: String,
    pub robust_mean: Vec<f64>,
    pub robust_std: Vec<f64>,
    pub sigma_floor: f64,
    pub initial_mean: Vec<f64>,
    pub feature_threshold: f64,
    pub distance_threshold: usize,
    pub adapt_rate: f64,
    pub drift_bound: f64,
    pub update_count: u64,
}

/// Single-pass 2-sigma outlier rejection per dimension, then mean and
/// floored population std of the survivors.
pub fn robust_stats(
    training: &[Vec<f64>],
    sigma_floor: f64,
) -> Result<(Vec<f64>, Vec<f64>), MatchError> {
    if training.len() < 3 {
        return Err(MatchError::TooFewVectors { needed: 3, got: training.len() });
    }
    let dim = training[0].len();
    if training.iter().any(|v| v.len() != dim) {
        return Err(MatchError::DimensionMismatch);
    }
    let refs: Vec<&[f64]> = training.iter().map(Vec::as_slice).collect();
    let (mean, std) = mean_std(&refs);
    let mut robust_mean = Vec::with_capacity(dim);
    let mut robust_std = Vec::with_capacity(dim);
    for i in 0..dim {
        let survivors: Vec<f64> = training
            .iter()
            .map(|v| v[i])
            .filter(|x| (x - mean[i]).abs() < 2.0 * std[i])
            .collect();
        let (m, s) = if survivors.is_empty() {
            (mean[i], std[i])
        } else {
            let n = survivors.len() as f64;
            let m = survivors.iter().sum::<f64>() / n;
            let var = survivors.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
            (m, var.sqrt())
        };
        robust_mean.push(m);
        robust_std.push(s.max(sigma_floor));
    }
    Ok((robust_mean, robust_std))
}

/// Deviation count of each training vector against statistics fit on the
/// others. Falls back to in-sample counts below 4 vectors.
pub fn loo_genuine_counts(
    training: &[Vec<f64>],
    sigma_floor: f64,
    feature_threshold: f64,
) -> Result<Vec<f64>, MatchError> {
    if training.len() < 4 {
        let (mean, std) = robust_stats(training, sigma_floor)?;
        return Ok(training
            .iter()
            .map(|v| deviation_count(v, &mean, &std, feature_threshold) as f64)
            .collect());
    }
    (0..training.len())
        .map(|i| {
            let rest: Vec<Vec<f64>> =
                training.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v.clone()).collect();
            let (mean, std) = robust_stats(&rest, sigma_floor)?;
            Ok(deviation_count(&training[i], &mean, &std, feature_threshold) as f64)
        })
        .collect()
}

/// Number of features whose normalized deviation exceeds `feature_threshold`.
pub fn deviation_count(probe: &[f64], mean: &[f64], std: &[f64], feature_threshold: f64) -> usize {
    probe
        .iter()
        .zip(mean)
        .zip(std)
        .filter(|((f, m), s)| ((*f - *m) / *s).abs() > feature_threshold)
        .count()
}

impl HammingTemplate {
    /// Fits robust statistics. The distance threshold starts from the
    /// genuine-only rule; see [`HammingTemplate::calibrate`].
    pub fn enroll(
        user_id: &str,
        training: &[FeatureVector],
        config: &HammingConfig,
    ) -> Result<Self, MatchError> {
        let wavelet = check_training(training, 3)?;
        if !(0.0..=1.0).contains(&config.adapt_rate) {
            return Err(MatchError::InvalidTemplate(format!(
                "adapt rate {} outside [0, 1]",
                config.adapt_rate
            )));
        }
        let raw: Vec<Vec<f64>> = training.iter().map(|f| f.values.clone()).collect();
        let (robust_mean, robust_std) = robust_stats(&raw, config.sigma_floor)?;
        let mut tpl = Self {
            user_id: user_id.to_string(),
            wavelet,
            layout: LAYOUT_VERSION.to_string(),
            initial_mean: robust_mean.clone(),
            robust_mean,
            robust_std,
            sigma_floor: config.sigma_floor,
            feature_threshold: config.feature_threshold,
            distance_threshold: 0,
            adapt_rate: config.adapt_rate,
            drift_bound: config.drift_bound,
            update_count: 0,
        };
        tpl.calibrate(training, &[], DEFAULT_FMR_TARGET, config.genuine_margin);
        Ok(tpl)
    }

    fn count(&self, v: &[f64]) -> usize {
        deviation_count(v, &self.robust_mean, &self.robust_std, self.feature_threshold)
    }

    pub fn hamming_distance(&self, probe: &FeatureVector) -> Result<HammingResult, MatchError> {
        check_probe(probe, self.wavelet)?;
        let distance = self.count(&probe.values);
        Ok(HammingResult { distance, accepted: distance < self.distance_threshold })
    }

    /// `mu <- mu + eta (probe - mu)` for an accepted probe; sigma is untouched.
    pub fn adaptive_mean_update(&mut self, probe: &FeatureVector) -> Result<(), MatchError> {
        if !self.hamming_distance(probe)?.accepted {
            return Err(MatchError::RejectedProbe);
        }
        let eta = self.adapt_rate;
        for (m, f) in self.robust_mean.iter_mut().zip(&probe.values) {
            *m += eta * (f - *m);
        }
        self.update_count += 1;
        Ok(())
    }

    /// Sigma-normalized Euclidean distance between the current and enrollment means.
    pub fn drift(&self) -> f64 {
        self.robust_mean
            .iter()
            .zip(&self.initial_mean)
            .zip(&self.robust_std)
            .map(|((m, m0), s)| ((m - m0) / s).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn drift_check(&self) -> DriftStatus {
        DriftStatus::new(self.drift(), self.drift_bound)
    }

    /// Converts a real-valued acceptance cut into the integer distance
    /// threshold (accept iff `d < T`), clamped to `0..=184`.
    pub fn set_threshold(&mut self, cut: f64) {
        self.distance_threshold = if cut.is_finite() {
            (cut.ceil().max(0.0) as usize).min(FEATURE_DIM)
        } else {
            FEATURE_DIM
        };
    }

    /// Sets the distance threshold from leave-one-out genuine counts over
    /// `training` and an imposter pool at the target false match rate.
    pub fn calibrate(
        &mut self,
        training: &[FeatureVector],
        imposters: &[FeatureVector],
        fmr_target: f64,
        genuine_margin: f64,
    ) {
        let raw: Vec<Vec<f64>> = training.iter().map(|v| v.values.clone()).collect();
        let genuine = loo_genuine_counts(&raw, self.sigma_floor, self.feature_threshold)
            .unwrap_or_else(|_| raw.iter().map(|v| self.count(v) as f64).collect());
        let imposter: Vec<f64> = imposters
            .iter()
            .filter_map(|p| self.hamming_distance(p).ok())
            .map(|r| r.distance as f64)
            .collect();
        self.set_threshold(calibrate_threshold(&genuine, &imposter, fmr_target, genuine_margin));
    }

    pub fn validate(&self) -> Result<(), MatchError> {
        if self.layout != LAYOUT_VERSION {
            return Err(MatchError::Feature(FeatureError::Layout(self.layout.clone())));
        }
        check_dim("robust_mean", &self.robust_mean)?;
        check_dim("robust_std", &self.robust_std)?;
        check_dim("initial_mean", &self.initial_mean)?;
        if self.sigma_floor.is_nan() || self.sigma_floor <= 0.0 || self.robust_std.iter().any(|&s| s < self.sigma_floor) {
            return Err(MatchError::InvalidTemplate("robust_std below floor".into()));
        }
        if self.distance_threshold > FEATURE_DIM {
            return Err(MatchError::InvalidTemplate("distance threshold above 184".into()));
        }
        if !(0.0..=1.0).contains(&self.adapt_rate) {
            return Err(MatchError::InvalidTemplate("adapt rate outside [0, 1]".into()));
        }
        if !(self.feature_threshold.is_finite() && self.feature_threshold >= 0.0) {
            return Err(MatchError::InvalidTemplate("bad feature threshold".into()));
        }
        Ok(())
    }
}
