//! Raw stroke traces: parsing, validation, trailing truncation and the
//! eight-channel kinematic state derived from them.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Shortest trace (in samples, after truncation) accepted by the pipeline.
pub const MIN_TRACE_LEN: usize = 8;

/// Nominal capture rate of the force-touch device.
pub const NOMINAL_SAMPLE_RATE_HZ: f64 = 60.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("malformed trace document: {0}")]
    Malformed(String),
    #[error("empty trace")]
    Empty,
    #[error("negative force {force} at sample {index}")]
    NegativeForce { index: usize, force: f64 },
    #[error("non-finite value at sample {index}")]
    NonFinite { index: usize },
    #[error("non-monotone timestamp at sample {index}")]
    NonMonotoneTime { index: usize },
    #[error("trace has no contact samples")]
    NoContact,
    #[error("trace too short: {len} samples after truncation, need at least {MIN_TRACE_LEN}")]
    TooShort { len: usize },
    #[error("invalid sample rate {0}")]
    SampleRate(f64),
}

/// Which password entry task a trace belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    SignatureStatic,
    SignatureHolding,
    PatternHolding,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::SignatureStatic, Task::SignatureHolding, Task::PatternHolding];

    pub fn as_str(&self) -> &'static str {
        match self {
            Task::SignatureStatic => "signature-static",
            Task::SignatureHolding => "signature-holding",
            Task::PatternHolding => "pattern-holding",
        }
    }

    pub fn is_pattern(&self) -> bool {
        matches!(self, Task::PatternHolding)
    }

    /// Row label used in evaluation reports.
    pub fn label(&self) -> &'static str {
        match self {
            Task::SignatureStatic => "Signature w/ static device",
            Task::SignatureHolding => "Signature w/ holding device",
            Task::PatternHolding => "Pattern w/ holding device",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown task '{s}'"))
    }
}

/// One recorded touch sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Seconds since the start of recording.
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// Applied force in device units.
    pub f: f64,
    pub contact: bool,
    /// Index of the contiguous-contact segment this sample belongs to.
    /// Non-contact samples carry the id of the preceding stroke.
    pub stroke_id: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day: Option<u32>,
    /// False when the capture device reports no pressure and `f` is a constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure_supported: Option<bool>,
}

/// A validated, time-ordered password entry.
#[derive(Debug, Clone, PartialEq)]
pub struct PasswordTrace {
    samples: Vec<Sample>,
    sample_rate: f64,
    pub metadata: TraceMetadata,
}

/// A sample as it appears in trace documents; `stroke_id` is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub f: f64,
    #[serde(deserialize_with = "de_contact")]
    pub contact: bool,
}

fn de_contact<'de, D: serde::Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Flag {
        Bool(bool),
        Int(i64),
        Str(String),
    }
    match Flag::deserialize(d)? {
        Flag::Bool(b) => Ok(b),
        Flag::Int(0) => Ok(false),
        Flag::Int(1) => Ok(true),
        Flag::Str(s) => match s.trim().to_ascii_lowercase().as_str() {
            "true" | "1" => Ok(true),
            "false" | "0" => Ok(false),
            other => Err(serde::de::Error::custom(format!("bad contact flag '{other}'"))),
        },
        Flag::Int(other) => Err(serde::de::Error::custom(format!("bad contact flag {other}"))),
    }
}

/// JSON trace document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDocument {
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure_supported: Option<bool>,
    pub samples: Vec<RawSample>,
}

fn default_rate() -> f64 {
    NOMINAL_SAMPLE_RATE_HZ
}

impl PasswordTrace {
    /// Validates the samples and assigns stroke ids from contact transitions.
    /// No truncation is applied; see [`PasswordTrace::truncate_trailing`].
    pub fn from_raw(
        raw: &[RawSample],
        sample_rate: f64,
        metadata: TraceMetadata,
    ) -> Result<Self, TraceError> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(TraceError::SampleRate(sample_rate));
        }
        if raw.is_empty() {
            return Err(TraceError::Empty);
        }
        let mut samples = Vec::with_capacity(raw.len());
        let mut stroke: u32 = 0;
        let mut seen_contact = false;
        let mut prev_contact = false;
        for (index, r) in raw.iter().enumerate() {
            if ![r.t, r.x, r.y, r.f].iter().all(|v| v.is_finite()) {
                return Err(TraceError::NonFinite { index });
            }
            if r.f < 0.0 {
                return Err(TraceError::NegativeForce { index, force: r.f });
            }
            if r.contact && !prev_contact {
                if seen_contact {
                    stroke += 1;
                }
                seen_contact = true;
            }
            prev_contact = r.contact;
            if let Some(prev) = samples.last() {
                let prev: &Sample = prev;
                // A new stroke may start at the same instant the previous
                // record was taken; within a stroke time must advance.
                let ok = if prev.stroke_id == stroke { r.t > prev.t } else { r.t >= prev.t };
                if !ok {
                    return Err(TraceError::NonMonotoneTime { index });
                }
            }
            samples.push(Sample {
                t: r.t,
                x: r.x,
                y: r.y,
                f: r.f,
                contact: r.contact,
                stroke_id: stroke,
            });
        }
        Ok(Self { samples, sample_rate, metadata })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Drops every record after the last contact sample.
    pub fn truncate_trailing(mut self) -> Result<Self, TraceError> {
        let last = self
            .samples
            .iter()
            .rposition(|s| s.contact)
            .ok_or(TraceError::NoContact)?;
        self.samples.truncate(last + 1);
        Ok(self)
    }

    fn ensure_min_len(self) -> Result<Self, TraceError> {
        if self.samples.len() < MIN_TRACE_LEN {
            return Err(TraceError::TooShort { len: self.samples.len() });
        }
        Ok(self)
    }

    pub fn to_document(&self) -> TraceDocument {
        TraceDocument {
            sample_rate_hz: self.sample_rate,
            task: self.metadata.task,
            user: self.metadata.user.clone(),
            day: self.metadata.day,
            pressure_supported: self.metadata.pressure_supported,
            samples: self
                .samples
                .iter()
                .map(|s| RawSample { t: s.t, x: s.x, y: s.y, f: s.f, contact: s.contact })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("trace document serializes")
    }
}

impl TraceDocument {
    /// Validates, truncates and length-checks the document.
    pub fn into_trace(self) -> Result<PasswordTrace, TraceError> {
        let meta = TraceMetadata {
            user: self.user,
            task: self.task,
            day: self.day,
            pressure_supported: self.pressure_supported,
        };
        PasswordTrace::from_raw(&self.samples, self.sample_rate_hz, meta)?
            .truncate_trailing()?
            .ensure_min_len()
    }
}

/// Parses a JSON trace document into a pipeline-ready trace.
pub fn parse_trace(document: &[u8]) -> Result<PasswordTrace, TraceError> {
    let doc: TraceDocument =
        serde_json::from_slice(document).map_err(|e| TraceError::Malformed(e.to_string()))?;
    doc.into_trace()
}

/// Parses the CSV variant (header `t,x,y,f,contact`).
pub fn parse_trace_csv(document: &[u8]) -> Result<PasswordTrace, TraceError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(document);
    let samples = reader
        .deserialize::<RawSample>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| TraceError::Malformed(e.to_string()))?;
    TraceDocument {
        sample_rate_hz: NOMINAL_SAMPLE_RATE_HZ,
        task: None,
        user: None,
        day: None,
        pressure_supported: None,
        samples,
    }
    .into_trace()
}

/// Index of a state channel, in feature-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    X,
    Y,
    Force,
    VelocityX,
    VelocityY,
    Acceleration,
    Direction,
    DirectionChange,
}

impl Channel {
    pub const ALL: [Channel; 8] = [
        Channel::X,
        Channel::Y,
        Channel::Force,
        Channel::VelocityX,
        Channel::VelocityY,
        Channel::Acceleration,
        Channel::Direction,
        Channel::DirectionChange,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::X => "x",
            Channel::Y => "y",
            Channel::Force => "f",
            Channel::VelocityX => "vx",
            Channel::VelocityY => "vy",
            Channel::Acceleration => "a",
            Channel::Direction => "theta",
            Channel::DirectionChange => "omega",
        }
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Channel::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown channel '{s}'"))
    }
}

/// Kinematic state `(x, y, f, vx, vy, a, theta, omega)` sampled per record.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub f: Vec<f64>,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub a: Vec<f64>,
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
}

impl StateMatrix {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn channel(&self, c: Channel) -> &[f64] {
        match c {
            Channel::X => &self.x,
            Channel::Y => &self.y,
            Channel::Force => &self.f,
            Channel::VelocityX => &self.vx,
            Channel::VelocityY => &self.vy,
            Channel::Acceleration => &self.a,
            Channel::Direction => &self.theta,
            Channel::DirectionChange => &self.omega,
        }
    }

    pub fn channels(&self) -> [&[f64]; 8] {
        Channel::ALL.map(|c| self.channel(c))
    }
}

/// Wraps an angle difference into `(-pi, pi]`.
pub fn wrap_angle(d: f64) -> f64 {
    let r = d.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Derives the state channels with per-sample differences over the whole
/// sample sequence (stroke gaps included).
pub fn compute_state(trace: &PasswordTrace) -> StateMatrix {
    let s = trace.samples();
    let n = s.len();
    let x: Vec<f64> = s.iter().map(|p| p.x).collect();
    let y: Vec<f64> = s.iter().map(|p| p.y).collect();
    let f: Vec<f64> = s.iter().map(|p| p.f).collect();
    let mut vx = vec![0.0; n];
    let mut vy = vec![0.0; n];
    let mut a = vec![0.0; n];
    let mut theta = vec![0.0; n];
    let mut omega = vec![0.0; n];
    let mut prev_speed = 0.0;
    for t in 1..n {
        vx[t] = x[t] - x[t - 1];
        vy[t] = y[t] - y[t - 1];
        let speed = vx[t].hypot(vy[t]);
        a[t] = speed - prev_speed;
        prev_speed = speed;
        // Hold the last heading while stationary.
        theta[t] = if vx[t] == 0.0 && vy[t] == 0.0 { theta[t - 1] } else { vy[t].atan2(vx[t]) };
        omega[t] = wrap_angle(theta[t] - theta[t - 1]);
    }
    StateMatrix { x, y, f, vx, vy, a, theta, omega }
}
