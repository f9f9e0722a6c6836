//! Force-sensitive stroke biometrics: trace parsing, MODWT features,
//! weighted Euclidean and Hamming template matchers with adaptive updates,
//! evaluation, complexity/entropy analysis, a synthetic cohort generator and
//! a file-backed enroll/verify service.

pub mod analysis;
pub mod config;
pub mod evaluation;
pub mod features;
pub mod matcher;
pub mod service;
pub mod synth;
pub mod trace;
pub mod wavelet;
