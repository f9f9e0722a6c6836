//! Leave-one-out parameter tuning on enrollment data only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{det_curve, Cohort, EvalError, ScoreSet, DEFAULT_FMR_TARGET};
use crate::features::{extract_features, FeatureVector};
use crate::trace::compute_state;
use crate::matcher::euclidean::{fit_normalizer, sum_min};
use crate::matcher::hamming::robust_stats;
use crate::matcher::weights::{optimize_weights, WeightOptions};
use crate::matcher::{Method, SIGMA_FLOOR};
use crate::wavelet::MotherWavelet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamAxis {
    /// SumMin `k` values (Euclidean).
    K(Vec<usize>),
    /// Feature difference thresholds `T_f` (Hamming).
    FeatureThreshold(Vec<f64>),
}

impl ParamAxis {
    fn len(&self) -> usize {
        match self {
            ParamAxis::K(v) => v.len(),
            ParamAxis::FeatureThreshold(v) => v.len(),
        }
    }

    fn value(&self, i: usize) -> f64 {
        match self {
            ParamAxis::K(v) => v[i] as f64,
            ParamAxis::FeatureThreshold(v) => v[i],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    pub method: Method,
    pub wavelets: Vec<MotherWavelet>,
    pub params: ParamAxis,
    pub fmr_target: f64,
}

impl TuningGrid {
    /// All seven wavelets with `k` in 2..=9.
    pub fn euclidean_default() -> Self {
        Self {
            method: Method::Euclidean,
            wavelets: MotherWavelet::ALL.to_vec(),
            params: ParamAxis::K((2..=9).collect()),
            fmr_target: DEFAULT_FMR_TARGET,
        }
    }

    /// All seven wavelets with `T_f` over [0, 5] in steps of 0.01.
    pub fn hamming_default() -> Self {
        Self {
            method: Method::Hamming,
            wavelets: MotherWavelet::ALL.to_vec(),
            params: ParamAxis::FeatureThreshold((0..=500).map(|i| i as f64 / 100.0).collect()),
            fmr_target: DEFAULT_FMR_TARGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningCell {
    pub wavelet: MotherWavelet,
    pub param: f64,
    pub accuracy: f64,
    /// Tie-breaker: accuracy at FMR = 1%.
    pub accuracy_1pct: f64,
    pub eer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub best: TuningCell,
    pub cells: Vec<TuningCell>,
}

/// Per-user enrollment vectors for each candidate wavelet.
#[derive(Debug, Clone, Default)]
pub struct TuningCohort {
    sets: Vec<(MotherWavelet, Vec<Vec<FeatureVector>>)>,
}

impl TuningCohort {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers per-user feature sets extracted with `wavelet`.
    pub fn insert(&mut self, wavelet: MotherWavelet, users: Vec<Vec<FeatureVector>>) {
        self.sets.retain(|(w, _)| *w != wavelet);
        self.sets.push((wavelet, users));
    }

    pub fn users(&self, wavelet: MotherWavelet) -> Option<&[Vec<FeatureVector>]> {
        self.sets.iter().find(|(w, _)| *w == wavelet).map(|(_, u)| u.as_slice())
    }

    /// Extracts the first `enroll_count` day-1 entries of every user with
    /// each wavelet.
    pub fn from_cohort(
        cohort: &Cohort,
        wavelets: &[MotherWavelet],
        enroll_count: usize,
    ) -> Result<Self, EvalError> {
        let mut out = Self::new();
        for &wavelet in wavelets {
            let users = cohort
                .users
                .iter()
                .map(|u| {
                    u.day1[..enroll_count.min(u.day1.len())]
                        .par_iter()
                        .map(|t| extract_features(&compute_state(t), wavelet).map_err(EvalError::from))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            out.insert(wavelet, users);
        }
        Ok(out)
    }
}

/// Per-cell score sets for one wavelet: `scores[param_index]`.
fn euclidean_scores(
    users: &[Vec<FeatureVector>],
    ks: &[usize],
    weights: &WeightOptions,
) -> Result<Vec<ScoreSet>, EvalError> {
    let mut out = vec![ScoreSet::default(); ks.len()];
    let raw: Vec<Vec<Vec<f64>>> =
        users.iter().map(|u| u.iter().map(|f| f.values.clone()).collect()).collect();
    // Distances to every template of a fitted model, raw space in, weighted normalized out.
    let fit = |set: &[Vec<f64>]| -> Result<(Vec<f64>, Vec<f64>), EvalError> {
        let (mean, std) = fit_normalizer(set, SIGMA_FLOOR)?;
        let normalized: Vec<Vec<f64>> = set
            .iter()
            .map(|v| v.iter().zip(&mean).zip(&std).map(|((x, m), s)| (x - m) / s).collect())
            .collect();
        let w = optimize_weights(&normalized, weights)?.weights;
        let scale = w.iter().zip(&std).map(|(w, s)| w / s).collect();
        Ok((mean, scale))
    };
    let dist = |scale: &[f64], a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).zip(scale).map(|((a, b), s)| (s * (a - b)).powi(2)).sum::<f64>().sqrt()
    };
    for (u, set) in raw.iter().enumerate() {
        for i in 0..set.len() {
            let rest: Vec<Vec<f64>> =
                set.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v.clone()).collect();
            let (_, scale) = fit(&rest)?;
            let d: Vec<f64> = rest.iter().map(|t| dist(&scale, &set[i], t)).collect();
            for (cell, &k) in out.iter_mut().zip(ks) {
                cell.genuine.push(sum_min(&d, k));
            }
        }
        let (_, scale) = fit(set)?;
        for (v, other) in raw.iter().enumerate() {
            if v == u {
                continue;
            }
            for probe in other {
                let d: Vec<f64> = set.iter().map(|t| dist(&scale, probe, t)).collect();
                for (cell, &k) in out.iter_mut().zip(ks) {
                    cell.imposter.push(sum_min(&d, k));
                }
            }
        }
    }
    Ok(out)
}

fn hamming_scores(users: &[Vec<FeatureVector>], thresholds: &[f64]) -> Result<Vec<ScoreSet>, EvalError> {
    let mut out = vec![ScoreSet::default(); thresholds.len()];
    let raw: Vec<Vec<Vec<f64>>> =
        users.iter().map(|u| u.iter().map(|f| f.values.clone()).collect()).collect();
    // Sorted absolute normalized deviations, so each threshold is a binary search.
    let deviations = |probe: &[f64], mean: &[f64], std: &[f64]| -> Vec<f64> {
        let mut d: Vec<f64> =
            probe.iter().zip(mean).zip(std).map(|((f, m), s)| ((f - m) / s).abs()).collect();
        d.sort_by(f64::total_cmp);
        d
    };
    let count_above = |d: &[f64], t: f64| (d.len() - d.partition_point(|&x| x <= t)) as f64;
    for (u, set) in raw.iter().enumerate() {
        for i in 0..set.len() {
            let rest: Vec<Vec<f64>> =
                set.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v.clone()).collect();
            let (mean, std) = robust_stats(&rest, SIGMA_FLOOR)?;
            let d = deviations(&set[i], &mean, &std);
            for (cell, &t) in out.iter_mut().zip(thresholds) {
                cell.genuine.push(count_above(&d, t));
            }
        }
        let (mean, std) = robust_stats(set, SIGMA_FLOOR)?;
        for (v, other) in raw.iter().enumerate() {
            if v == u {
                continue;
            }
            for probe in other {
                let d = deviations(probe, &mean, &std);
                for (cell, &t) in out.iter_mut().zip(thresholds) {
                    cell.imposter.push(count_above(&d, t));
                }
            }
        }
    }
    Ok(out)
}

/// Leave-one-out grid search. Genuine probes are held-out enrollment vectors
/// scored against a model fitted on the rest; imposter probes are the other
/// users' enrollment vectors scored against the user's full-enrollment model.
/// Scores are pooled across users per cell.
pub fn loo_tune(
    cohort: &TuningCohort,
    grid: &TuningGrid,
    weights: &WeightOptions,
) -> Result<TuningResult, EvalError> {
    if grid.wavelets.is_empty() || grid.params.len() == 0 {
        return Err(EvalError::DegenerateGrid);
    }
    let mut cells = Vec::new();
    for &wavelet in &grid.wavelets {
        let users = cohort.users(wavelet).ok_or(EvalError::MissingFeatures(wavelet))?;
        if users.len() < 2 {
            return Err(EvalError::TooFewUsers(users.len()));
        }
        let min_set = users.iter().map(Vec::len).min().unwrap_or(0);
        if min_set < 3 {
            return Err(EvalError::TooFewVectors(min_set));
        }
        let scores = match &grid.params {
            ParamAxis::K(ks) => {
                if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > min_set - 1) {
                    return Err(EvalError::InvalidParam(format!(
                        "k = {k} needs 1..={} for leave-one-out",
                        min_set - 1
                    )));
                }
                euclidean_scores(users, ks, weights)?
            }
            ParamAxis::FeatureThreshold(ts) => hamming_scores(users, ts)?,
        };
        for (i, s) in scores.iter().enumerate() {
            let curve = det_curve(s)?;
            cells.push(TuningCell {
                wavelet,
                param: grid.params.value(i),
                accuracy: curve.accuracy_at_fmr(grid.fmr_target),
                accuracy_1pct: curve.accuracy_at_fmr(0.01),
                eer: curve.eer(),
            });
        }
    }
    let best = cells
        .iter()
        .min_by(|a, b| {
            b.accuracy
                .total_cmp(&a.accuracy)
                .then(b.accuracy_1pct.total_cmp(&a.accuracy_1pct))
                .then(a.wavelet.name().cmp(b.wavelet.name()))
                .then(a.param.total_cmp(&b.param))
        })
        .cloned()
        .expect("grid is non-empty");
    Ok(TuningResult { best, cells })
}
