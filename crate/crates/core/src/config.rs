//! TOML configuration mirroring every tunable default.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::protocol::{Aggregation, ProtocolConfig};
use crate::evaluation::DEFAULT_FMR_TARGET;
use crate::matcher::{EuclideanConfig, HammingConfig, Method};
use crate::synth::SynthConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub fmr_target: f64,
    pub aggregation: Aggregation,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            fmr_target: DEFAULT_FMR_TARGET,
            aggregation: Aggregation::Pooled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnrollmentConfig {
    /// Entries collected before templates are fit.
    pub count: usize,
    /// Matcher used when a request does not name one.
    pub default_method: Method,
}

impl Default for EnrollmentConfig {
    fn default() -> Self {
        Self { count: 10, default_method: Method::Euclidean }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub euclidean: EuclideanConfig,
    pub hamming: HammingConfig,
    pub evaluation: EvaluationConfig,
    pub enrollment: EnrollmentConfig,
    pub synth: SynthConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.euclidean.sigma_floor > 0.0 && self.hamming.sigma_floor > 0.0) {
            return bad("sigma_floor must be positive");
        }
        if !(0.0..1.0).contains(&self.euclidean.weight_floor) {
            return bad("euclidean.weight_floor must be in [0, 1)");
        }
        if self.euclidean.k == 0 || self.euclidean.k > self.enrollment.count {
            return bad("euclidean.k must be in 1..=enrollment.count");
        }
        if !(0.0..=1.0).contains(&self.hamming.adapt_rate) {
            return bad("hamming.adapt_rate must be in [0, 1]");
        }
        if !(0.0..).contains(&self.hamming.feature_threshold) {
            return bad("hamming.feature_threshold must be >= 0");
        }
        if !(self.euclidean.genuine_margin >= 0.0 && self.hamming.genuine_margin >= 0.0) {
            return bad("genuine_margin must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.evaluation.fmr_target) {
            return bad("evaluation.fmr_target must be in [0, 1]");
        }
        if self.enrollment.count < 3 {
            return bad("enrollment.count must be at least 3");
        }
        Ok(())
    }

    pub fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            euclidean: self.euclidean.clone(),
            hamming: self.hamming.clone(),
            methods: Method::ALL.to_vec(),
            enroll_count: self.enrollment.count,
            fmr_target: self.evaluation.fmr_target,
            aggregation: self.evaluation.aggregation,
            task: None,
        }
    }
}
