//! Weighted Euclidean SumMin matcher with replace-farthest adaptation.

use serde::{Deserialize, Serialize};

use super::weights::{optimize_weights, WeightOptions};
use super::{check_dim, check_probe, check_training, mean_std, DriftStatus, MatchError, SIGMA_FLOOR};
use crate::evaluation::{calibrate_threshold, DEFAULT_FMR_TARGET};
use crate::features::{FeatureVector, LAYOUT_VERSION};
use crate::trace::Task;
use crate::wavelet::MotherWavelet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EuclideanConfig {
    pub wavelet: MotherWavelet,
    /// Wavelet used instead of `wavelet` for pattern tasks.
    pub pattern_wavelet: MotherWavelet,
    /// Number of nearest templates summed into the matching distance.
    pub k: usize,
    pub sigma_floor: f64,
    pub weight_floor: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Drift bound as a multiple of the enrollment mean intra-template distance.
    pub drift_factor: f64,
    /// Inflation of the largest leave-one-out genuine distance; the
    /// calibrated threshold never exceeds it.
    pub genuine_margin: f64,
}

impl Default for EuclideanConfig {
    fn default() -> Self {
        Self {
            wavelet: MotherWavelet::C12,
            pattern_wavelet: MotherWavelet::Db4,
            k: 3,
            sigma_floor: SIGMA_FLOOR,
            weight_floor: 0.0,
            tolerance: 1e-8,
            max_iterations: 5000,
            drift_factor: 3.0,
            genuine_margin: 1.0,
        }
    }
}

impl EuclideanConfig {
    /// Tuned defaults for pattern passwords (DB4, k = 3).
    pub fn pattern() -> Self {
        Self::default().for_task(Some(Task::PatternHolding))
    }

    /// The configuration with the wavelet resolved for `task`.
    pub fn for_task(&self, task: Option<Task>) -> Self {
        let mut cfg = self.clone();
        if task.is_some_and(|t| t.is_pattern()) {
            cfg.wavelet = cfg.pattern_wavelet;
        }
        cfg
    }

    fn weight_options(&self) -> WeightOptions {
        WeightOptions {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            weight_floor: self.weight_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub distance: f64,
    pub accepted: bool,
    pub per_template_distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EuclideanTemplate {
    pub user_id: String,
    pub wavelet: MotherWavelet,
    pub layout: String,
    pub norm_mean: Vec<f64>,
    pub norm_std: Vec<f64>,
    pub weights: Vec<f64>,
    pub k: usize,
    pub threshold: f64,
    pub templates: Vec<Vec<f64>>,
    pub initial_templates: Vec<Vec<f64>>,
    pub drift_bound: f64,
    pub update_count: u64,
}

/// Sum of the `k` smallest entries.
pub fn sum_min(values: &[f64], k: usize) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().take(k).sum()
}

/// Per-dimension mean and floored population standard deviation.
pub fn fit_normalizer(
    training: &[Vec<f64>],
    sigma_floor: f64,
) -> Result<(Vec<f64>, Vec<f64>), MatchError> {
    if training.len() < 2 {
        return Err(MatchError::TooFewVectors { needed: 2, got: training.len() });
    }
    let dim = training[0].len();
    if training.iter().any(|v| v.len() != dim) {
        return Err(MatchError::DimensionMismatch);
    }
    let refs: Vec<&[f64]> = training.iter().map(Vec::as_slice).collect();
    let (mean, std) = mean_std(&refs);
    Ok((mean, std.into_iter().map(|s| s.max(sigma_floor)).collect()))
}

impl EuclideanTemplate {
    /// Fits normalizer and weights on the enrollment set. The threshold starts
    /// from the genuine-only rule; call [`EuclideanTemplate::calibrate`] with an
    /// imposter pool to set it at a target FMR.
    pub fn enroll(
        user_id: &str,
        training: &[FeatureVector],
        config: &EuclideanConfig,
    ) -> Result<Self, MatchError> {
        let wavelet = check_training(training, 2)?;
        if config.k == 0 || config.k > training.len() {
            return Err(MatchError::InvalidTemplate(format!(
                "k = {} outside 1..={}",
                config.k,
                training.len()
            )));
        }
        let raw: Vec<Vec<f64>> = training.iter().map(|f| f.values.clone()).collect();
        let (norm_mean, norm_std) = fit_normalizer(&raw, config.sigma_floor)?;
        let normalized: Vec<Vec<f64>> = raw.iter().map(|v| normalize(v, &norm_mean, &norm_std)).collect();
        let weights = optimize_weights(&normalized, &config.weight_options())?.weights;
        let mut tpl = Self {
            user_id: user_id.to_string(),
            wavelet,
            layout: LAYOUT_VERSION.to_string(),
            norm_mean,
            norm_std,
            weights,
            k: config.k,
            threshold: 0.0,
            templates: raw.clone(),
            initial_templates: raw,
            drift_bound: 0.0,
            update_count: 0,
        };
        tpl.drift_bound = config.drift_factor * tpl.mean_intra_distance();
        tpl.calibrate(&[], DEFAULT_FMR_TARGET, config.genuine_margin);
        Ok(tpl)
    }

    pub fn normalize(&self, v: &[f64]) -> Vec<f64> {
        normalize(v, &self.norm_mean, &self.norm_std)
    }

    /// Weighted Euclidean distance between two raw vectors in normalized space.
    pub fn weighted_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.weights)
            .zip(&self.norm_std)
            .map(|(((a, b), w), s)| {
                let d = w * (a - b) / s;
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn matching_distance(&self, probe: &FeatureVector) -> Result<MatchResult, MatchError> {
        check_probe(probe, self.wavelet)?;
        let per_template_distances: Vec<f64> =
            self.templates.iter().map(|t| self.weighted_distance(&probe.values, t)).collect();
        let distance = sum_min(&per_template_distances, self.k);
        Ok(MatchResult { distance, accepted: distance < self.threshold, per_template_distances })
    }

    /// Replaces the template farthest from an accepted probe with the probe.
    /// Normalizer and weights stay frozen. Returns the replaced slot.
    pub fn adaptive_update(&mut self, probe: &FeatureVector) -> Result<usize, MatchError> {
        let result = self.matching_distance(probe)?;
        if !result.accepted {
            return Err(MatchError::RejectedProbe);
        }
        let farthest = result
            .per_template_distances
            .iter()
            .enumerate()
            .fold(0, |best, (i, d)| if *d > result.per_template_distances[best] { i } else { best });
        self.templates[farthest] = probe.values.clone();
        self.update_count += 1;
        Ok(farthest)
    }

    /// Mean slot-wise distance between the current and enrollment templates.
    pub fn drift(&self) -> f64 {
        let total: f64 = self
            .templates
            .iter()
            .zip(&self.initial_templates)
            .map(|(a, b)| self.weighted_distance(a, b))
            .sum();
        total / self.templates.len() as f64
    }

    pub fn drift_check(&self) -> DriftStatus {
        DriftStatus::new(self.drift(), self.drift_bound)
    }

    /// Mean pairwise distance among the enrollment templates.
    pub fn mean_intra_distance(&self) -> f64 {
        let t = &self.initial_templates;
        let mut total = 0.0;
        let mut count = 0usize;
        for i in 0..t.len() {
            for j in i + 1..t.len() {
                total += self.weighted_distance(&t[i], &t[j]);
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            total / count as f64
        }
    }

    /// Matching distance of each enrollment template against the others.
    pub fn loo_genuine_scores(&self) -> Vec<f64> {
        let t = &self.initial_templates;
        let k = self.k.min(t.len().saturating_sub(1)).max(1);
        (0..t.len())
            .map(|i| {
                let d: Vec<f64> = (0..t.len())
                    .filter(|&j| j != i)
                    .map(|j| self.weighted_distance(&t[i], &t[j]))
                    .collect();
                sum_min(&d, k)
            })
            .collect()
    }

    /// Sets the threshold from leave-one-out genuine scores and an imposter
    /// pool at the target false match rate.
    pub fn calibrate(&mut self, imposters: &[FeatureVector], fmr_target: f64, genuine_margin: f64) {
        let genuine = self.loo_genuine_scores();
        let imposter: Vec<f64> = imposters
            .iter()
            .filter_map(|p| self.matching_distance(p).ok())
            .map(|r| r.distance)
            .collect();
        self.threshold = calibrate_threshold(&genuine, &imposter, fmr_target, genuine_margin);
    }

    pub fn validate(&self) -> Result<(), MatchError> {
        if self.layout != LAYOUT_VERSION {
            return Err(MatchError::Feature(crate::features::FeatureError::Layout(self.layout.clone())));
        }
        check_dim("norm_mean", &self.norm_mean)?;
        check_dim("norm_std", &self.norm_std)?;
        check_dim("weights", &self.weights)?;
        if self.norm_std.iter().any(|&s| s <= 0.0) {
            return Err(MatchError::InvalidTemplate("norm_std must be positive".into()));
        }
        if self.weights.iter().any(|&w| w < 0.0) {
            return Err(MatchError::InvalidTemplate("negative weight".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(MatchError::InvalidTemplate(format!("weights sum to {total}")));
        }
        if self.templates.is_empty() || self.templates.len() != self.initial_templates.len() {
            return Err(MatchError::InvalidTemplate("template set size mismatch".into()));
        }
        for t in self.templates.iter().chain(&self.initial_templates) {
            check_dim("template", t)?;
        }
        if self.k == 0 || self.k > self.templates.len() {
            return Err(MatchError::InvalidTemplate(format!("k = {} out of range", self.k)));
        }
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return Err(MatchError::InvalidTemplate("threshold must be finite and >= 0".into()));
        }
        Ok(())
    }
}

fn normalize(v: &[f64], mean: &[f64], std: &[f64]) -> Vec<f64> {
    v.iter().zip(mean).zip(std).map(|((x, m), s)| (x - m) / s).collect()
}
