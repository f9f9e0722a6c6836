//! Password complexity, forging difficulty and cohort entropy.

mod cohort;
mod complexity;
mod entropy;

use thiserror::Error;

use crate::features::FeatureError;
use crate::matcher::MatchError;

pub use cohort::{cohort_complexity, cohort_entropy, CohortEntropy, ComplexityReport, UserComplexity};
pub use complexity::{
    cohort_maxima, complexity, complexity_bucket, count_accel_zero_crossings, count_intersections,
    count_strokes, curved_portion, forging_difficulty, histogram, ComplexityScore, TraceCounts,
    BUCKET_LABELS,
};
pub use entropy::{
    entropy_of, password_entropy, position_force_indices, symbol_bits, EntropyReport, FeatureEntropy,
    CORRELATION_CUTOFF,
};

/// Published human-subject figures, shown as context next to synthetic results.
pub mod reference {
    /// Signature password entropy of the human-subject cohort, in bits.
    pub const HAPTIC_ENTROPY_BITS: f64 = 67.45;
    /// Average entropy of an alphanumeric password, in bits.
    pub const ALPHANUMERIC_ENTROPY_BITS: f64 = 40.54;
    /// Average forging difficulty of static signatures per complexity bucket.
    pub const STATIC_SIGNATURE_DIFFICULTY: [f64; 4] = [111.50, 119.50, 120.11, 136.00];
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("forgery set is empty")]
    NoForgeries,
    #[error("entropy needs at least 2 users with 2 vectors each")]
    TooSmallCohort,
    #[error("every candidate feature is constant across the cohort")]
    Degenerate,
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}
