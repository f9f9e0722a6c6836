//! Cohort-level complexity and entropy reports over enrollment traces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    cohort_maxima, complexity, complexity_bucket, forging_difficulty, histogram, password_entropy,
    reference, AnalysisError, ComplexityScore, EntropyReport, TraceCounts, BUCKET_LABELS,
};
use crate::evaluation::Cohort;
use crate::features::{extract_features, FeatureVector};
use crate::matcher::{HammingConfig, HammingTemplate};
use crate::trace::{compute_state, PasswordTrace, Task};
use crate::wavelet::MotherWavelet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserComplexity {
    pub user_id: String,
    pub task: Option<Task>,
    pub score: ComplexityScore,
    pub bucket: usize,
    pub bucket_label: String,
    /// Smallest Hamming distance any forgery reaches against the user's template.
    pub forging_difficulty: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub maxima: TraceCounts,
    pub users: Vec<UserComplexity>,
    pub histogram: [usize; 4],
    /// Mean forging difficulty per bucket (None for empty buckets).
    pub difficulty_by_bucket: [Option<f64>; 4],
    pub reference_static_difficulty: [f64; 4],
}

fn features(traces: &[PasswordTrace], wavelet: MotherWavelet) -> Result<Vec<FeatureVector>, AnalysisError> {
    traces
        .par_iter()
        .map(|t| extract_features(&compute_state(t), wavelet).map_err(AnalysisError::from))
        .collect()
}

fn enrollment(traces: &[PasswordTrace], enroll_count: usize) -> &[PasswordTrace] {
    &traces[..enroll_count.min(traces.len())]
}

/// Complexity of every user's enrollment traces relative to the cohort
/// maxima, plus forging difficulty from the user's forgeries.
pub fn cohort_complexity(
    cohort: &Cohort,
    enroll_count: usize,
    hamming: &HammingConfig,
) -> Result<ComplexityReport, AnalysisError> {
    if cohort.users.is_empty() {
        return Err(AnalysisError::TooSmallCohort);
    }
    let counts: Vec<Vec<TraceCounts>> = cohort
        .users
        .iter()
        .map(|u| {
            enrollment(&u.day1, enroll_count)
                .iter()
                .map(|t| TraceCounts::of(t, &compute_state(t)))
                .collect()
        })
        .collect();
    let means: Vec<TraceCounts> = counts.iter().map(|c| TraceCounts::mean(c)).collect();
    let maxima = cohort_maxima(&means);
    let mut users = Vec::with_capacity(cohort.users.len());
    for (u, c) in cohort.users.iter().zip(&counts) {
        let score = complexity(c, &maxima);
        let enroll = features(enrollment(&u.day1, enroll_count), hamming.wavelet)?;
        let tpl = HammingTemplate::enroll(&u.id, &enroll, hamming)?;
        let forged = features(&u.forgeries, hamming.wavelet)?;
        let bucket = complexity_bucket(score.delta);
        users.push(UserComplexity {
            user_id: u.id.clone(),
            task: u.task,
            score,
            bucket,
            bucket_label: BUCKET_LABELS[bucket].to_string(),
            forging_difficulty: forging_difficulty(&tpl, &forged)?,
        });
    }
    let deltas: Vec<f64> = users.iter().map(|u| u.score.delta).collect();
    let mut difficulty_by_bucket = [None; 4];
    for (b, slot) in difficulty_by_bucket.iter_mut().enumerate() {
        let d: Vec<f64> =
            users.iter().filter(|u| u.bucket == b).map(|u| u.forging_difficulty as f64).collect();
        if !d.is_empty() {
            *slot = Some(d.iter().sum::<f64>() / d.len() as f64);
        }
    }
    Ok(ComplexityReport {
        maxima,
        histogram: histogram(&deltas),
        users,
        difficulty_by_bucket,
        reference_static_difficulty: reference::STATIC_SIGNATURE_DIFFICULTY,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortEntropy {
    pub wavelet: MotherWavelet,
    pub report: EntropyReport,
    pub reference_haptic_bits: f64,
    pub reference_alphanumeric_bits: f64,
}

/// Password entropy of the cohort's enrollment traces.
pub fn cohort_entropy(
    cohort: &Cohort,
    enroll_count: usize,
    wavelet: MotherWavelet,
) -> Result<CohortEntropy, AnalysisError> {
    let users = cohort
        .users
        .iter()
        .map(|u| features(enrollment(&u.day1, enroll_count), wavelet))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CohortEntropy {
        wavelet,
        report: password_entropy(&users)?,
        reference_haptic_bits: reference::HAPTIC_ENTROPY_BITS,
        reference_alphanumeric_bits: reference::ALPHANUMERIC_ENTROPY_BITS,
    })
}
