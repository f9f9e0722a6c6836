//! DET/EER evaluation, leave-one-out tuning and the two-session protocol.

mod det;
pub mod protocol;
pub mod tuning;

use thiserror::Error;

use crate::features::FeatureError;
use crate::matcher::MatchError;
use crate::trace::TraceError;
use crate::wavelet::MotherWavelet;

pub use det::{
    accuracy_at_fmr, calibrate_threshold, det_curve, eer, DetCurve, OperatingPoint, ScoreSet, DEFAULT_FMR_TARGET,
};
pub use protocol::{load_cohort, run_protocol, trajectory_baseline, Cohort, CohortUser, ProtocolConfig, Report, ReportRow};
pub use tuning::{loo_tune, ParamAxis, TuningCell, TuningCohort, TuningGrid, TuningResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("score list is empty")]
    EmptyScores,
    #[error("non-finite score")]
    NonFiniteScore,
    #[error("tuning grid is empty")]
    DegenerateGrid,
    #[error("no features supplied for wavelet {0}")]
    MissingFeatures(MotherWavelet),
    #[error("need at least 2 users, got {0}")]
    TooFewUsers(usize),
    #[error("every user needs at least 3 enrollment vectors, smallest set has {0}")]
    TooFewVectors(usize),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("user {user}: missing or short split '{split}'")]
    MissingSplit { user: String, split: String },
    #[error("{path}: {source}")]
    Trace { path: String, source: TraceError },
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

impl From<std::io::Error> for EvalError {
    fn from(e: std::io::Error) -> Self {
        EvalError::Io(e.to_string())
    }
}
