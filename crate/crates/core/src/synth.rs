//! Seeded synthetic cohorts: genuine entries with intra-user jitter and
//! day-2 drift, and skilled forgeries that copy the victim's shape but carry
//! the forger's tempo, force and micro-dynamics.
//!
//! Every output is labeled synthetic; the force model in particular is an
//! artifact convention, not a measured family.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::protocol::{DAY1_DIR, DAY2_DIR, FORGERY_DIR};
use crate::evaluation::{Cohort, CohortUser};
use crate::trace::{PasswordTrace, RawSample, Task, TraceMetadata};

const PROFILE_STREAM: u64 = 1;
const JITTER_STREAM: u64 = 2;
const FORGERY_STREAM: u64 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("forger and victim are the same profile")]
    SelfForgery,
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for SynthError {
    fn from(e: std::io::Error) -> Self {
        SynthError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// One straight-segment stroke through grid dots.
    PatternLike,
    /// Several curved multi-harmonic strokes.
    #[default]
    SignatureLike,
}

impl Preset {
    pub fn task(self) -> Task {
        match self {
            Preset::PatternLike => Task::PatternHolding,
            Preset::SignatureLike => Task::SignatureStatic,
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pattern-like" | "pattern" => Ok(Preset::PatternLike),
            "signature-like" | "signature" => Ok(Preset::SignatureLike),
            _ => Err(format!("unknown preset '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub preset: Preset,
    pub users: usize,
    pub day1: usize,
    pub day2: usize,
    pub forgers: usize,
    pub forgeries_per_forger: usize,
    /// Smooth position deformation scale, pixels.
    pub position_jitter: f64,
    /// Relative force gain jitter.
    pub force_jitter: f64,
    /// Relative tempo jitter.
    pub tempo_jitter: f64,
    /// Multiplier on the per-user day-2 drift vector; 0 disables drift.
    pub day2_drift: f64,
    /// Forgery duration relative to the victim's.
    pub forgery_tempo: f64,
    /// Forgery spatial deviation as a fraction of `position_jitter`.
    pub forgery_tolerance: f64,
    pub sample_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            preset: Preset::SignatureLike,
            users: 10,
            day1: 20,
            day2: 10,
            forgers: 4,
            forgeries_per_forger: 5,
            position_jitter: 2.0,
            force_jitter: 0.04,
            tempo_jitter: 0.03,
            day2_drift: 1.0,
            forgery_tempo: 1.3,
            forgery_tolerance: 0.5,
            sample_rate: 60.0,
        }
    }
}

impl SynthConfig {
    /// No jitter, no drift: every genuine entry equals the base trajectory.
    pub fn noiseless() -> Self {
        Self {
            position_jitter: 0.0,
            force_jitter: 0.0,
            tempo_jitter: 0.0,
            day2_drift: 0.0,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let scales = [self.position_jitter, self.force_jitter, self.tempo_jitter, self.day2_drift];
        if scales.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(SynthError::Config("jitter and drift scales must be finite and >= 0".into()));
        }
        if [self.forgery_tempo, self.sample_rate].iter().any(|v| v.is_nan() || *v <= 0.0) {
            return Err(SynthError::Config("forgery tempo and sample rate must be positive".into()));
        }
        if self.forgers >= self.users.max(1) {
            return Err(SynthError::Config("need more users than forgers per victim".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub amp: f64,
    pub freq: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrokeShape {
    /// `origin + advance * u + sum amp sin(2 pi freq u + phase)` per axis.
    Curve { origin: (f64, f64), advance: (f64, f64), x: Vec<Harmonic>, y: Vec<Harmonic> },
    /// Constant-speed path through the points (by arc length).
    Polyline { points: Vec<(f64, f64)> },
}

impl StrokeShape {
    fn at(&self, u: f64) -> (f64, f64) {
        match self {
            StrokeShape::Curve { origin, advance, x, y } => {
                let sum = |hs: &[Harmonic]| -> f64 {
                    hs.iter().map(|h| h.amp * (2.0 * PI * h.freq * u + h.phase).sin()).sum()
                };
                (origin.0 + advance.0 * u + sum(x), origin.1 + advance.1 * u + sum(y))
            }
            StrokeShape::Polyline { points } => {
                let lengths: Vec<f64> = points
                    .windows(2)
                    .map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt())
                    .collect();
                let total: f64 = lengths.iter().sum();
                let mut target = u.clamp(0.0, 1.0) * total;
                let last = lengths.len() - 1;
                for (i, len) in lengths.iter().enumerate() {
                    if target <= *len || i == last {
                        let (a, b) = (points[i], points[i + 1]);
                        let s = if *len > 0.0 { (target / len).min(1.0) } else { 0.0 };
                        return (a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1));
                    }
                    target -= len;
                }
                points[0]
            }
        }
    }
}

/// Personal dynamics: the part a forger cannot copy by watching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dynamics {
    /// Duration multiplier on the stroke plan.
    pub tempo: f64,
    /// Speed modulation depth within a stroke, |warp| < 1.
    pub warp: f64,
    /// Speed modulation cycles per stroke.
    pub warp_cycles: f64,
    pub force_peak: f64,
    pub force_attack: f64,
    pub force_release: f64,
    pub force_ripple: f64,
    pub force_ripple_cycles: f64,
    pub force_ripple_phase: f64,
    /// Force tremor amplitude (relative to peak) and frequency in Hz.
    pub tremor: f64,
    pub tremor_hz: f64,
    pub gap_samples: usize,
}

/// Systematic day-2 change, applied as a linear ramp over the session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub tempo: f64,
    pub force: f64,
    pub warp: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterScales {
    pub position: f64,
    pub force: f64,
    pub tempo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub seed: u64,
    pub preset: Preset,
    pub strokes: Vec<StrokeShape>,
    /// Base samples per stroke before the tempo multiplier.
    pub stroke_samples: Vec<usize>,
    pub dynamics: Dynamics,
    pub drift: Drift,
    pub jitter: JitterScales,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for one purpose and one (a, b) coordinate.
fn stream(seed: u64, purpose: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(mix(mix(seed) ^ a) ^ b));
    rng.set_stream(purpose);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn signed(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn random_dynamics(rng: &mut ChaCha8Rng) -> Dynamics {
    Dynamics {
        tempo: rng.random_range(0.85..1.2),
        warp: rng.random_range(-0.6..0.6),
        warp_cycles: rng.random_range(1..=2) as f64,
        force_peak: rng.random_range(1.0..4.0),
        force_attack: rng.random_range(0.05..0.3),
        force_release: rng.random_range(0.05..0.3),
        force_ripple: rng.random_range(0.05..0.35),
        force_ripple_cycles: rng.random_range(1.0..4.0),
        force_ripple_phase: rng.random_range(0.0..2.0 * PI),
        tremor: rng.random_range(0.01..0.06),
        tremor_hz: rng.random_range(5.0..11.0),
        gap_samples: rng.random_range(6..=14),
    }
}

fn signature_strokes(rng: &mut ChaCha8Rng) -> (Vec<StrokeShape>, Vec<usize>) {
    let n = rng.random_range(2..=5);
    let mut strokes = Vec::with_capacity(n);
    let mut samples = Vec::with_capacity(n);
    let mut x0 = 60.0;
    for _ in 0..n {
        let harmonics = |rng: &mut ChaCha8Rng, scale: f64| -> Vec<Harmonic> {
            let count = rng.random_range(3..=6);
            (0..count)
                .map(|k| Harmonic {
                    amp: scale * rng.random_range(0.4..1.0) / (1.0 + 0.5 * k as f64),
                    freq: (k + 1) as f64 * rng.random_range(0.6..1.4),
                    phase: rng.random_range(0.0..2.0 * PI),
                })
                .collect()
        };
        let width = rng.random_range(60.0..140.0);
        let (sx, sy) = (rng.random_range(25.0..45.0), rng.random_range(30.0..60.0));
        let x = harmonics(rng, sx);
        let y = harmonics(rng, sy);
        strokes.push(StrokeShape::Curve {
            origin: (x0, rng.random_range(180.0..260.0)),
            advance: (width, rng.random_range(-20.0..20.0)),
            x,
            y,
        });
        samples.push(rng.random_range(55..=95));
        x0 += width + rng.random_range(10.0..40.0);
    }
    (strokes, samples)
}

fn pattern_strokes(rng: &mut ChaCha8Rng) -> (Vec<StrokeShape>, Vec<usize>) {
    let spacing = 120.0;
    let dots = rng.random_range(4..=6);
    let mut used: Vec<(i32, i32)> = Vec::new();
    while used.len() < dots {
        if used.is_empty() {
            used.push((rng.random_range(0..3), rng.random_range(0..3)));
        }
        let cell = *used.last().expect("non-empty");
        // Neighbouring, unvisited dots, as on a 3x3 unlock grid.
        let options: Vec<(i32, i32)> = (-1..=1)
            .flat_map(|dx| (-1..=1).map(move |dy| (cell.0 + dx, cell.1 + dy)))
            .filter(|&(i, j)| (0..3).contains(&i) && (0..3).contains(&j) && !used.contains(&(i, j)))
            .collect();
        if options.is_empty() {
            used.clear();
            continue;
        }
        used.push(options[rng.random_range(0..options.len())]);
    }
    let points: Vec<(f64, f64)> = used
        .iter()
        .map(|&(i, j)| (80.0 + spacing * i as f64, 80.0 + spacing * j as f64))
        .collect();
    (vec![StrokeShape::Polyline { points }], vec![rng.random_range(70..=110)])
}

/// Deterministic profile for `seed`.
pub fn gen_user(seed: u64, preset: Preset, cfg: &SynthConfig) -> UserProfile {
    let mut rng = stream(seed, PROFILE_STREAM, 0, 0);
    let (strokes, stroke_samples) = match preset {
        Preset::SignatureLike => signature_strokes(&mut rng),
        Preset::PatternLike => pattern_strokes(&mut rng),
    };
    let dynamics = random_dynamics(&mut rng);
    let drift = Drift {
        tempo: signed(&mut rng) * rng.random_range(0.08..0.14),
        force: signed(&mut rng) * rng.random_range(0.15..0.3),
        warp: signed(&mut rng) * rng.random_range(0.1..0.2),
        scale: signed(&mut rng) * rng.random_range(0.04..0.08),
    };
    let personal = rng.random_range(0.8..1.2);
    UserProfile {
        seed,
        preset,
        strokes,
        stroke_samples,
        dynamics,
        drift,
        jitter: JitterScales {
            position: cfg.position_jitter * personal,
            force: cfg.force_jitter * personal,
            tempo: cfg.tempo_jitter * personal,
        },
    }
}

/// Smooth random deformation: two low-frequency sinusoids per axis.
#[derive(Debug, Clone, Copy)]
struct Wobble {
    a: [f64; 4],
    p: [f64; 4],
}

impl Wobble {
    fn new(rng: &mut ChaCha8Rng, scale: f64) -> Self {
        let mut a = [0.0; 4];
        let mut p = [0.0; 4];
        for i in 0..4 {
            a[i] = scale * normal(rng) / 2f64.sqrt();
            p[i] = rng.random_range(0.0..2.0 * PI);
        }
        Self { a, p }
    }

    fn at(&self, u: f64) -> (f64, f64) {
        let w = |i: usize, f: f64| self.a[i] * (PI * f * u + self.p[i]).sin();
        (w(0, 1.0) + w(1, 2.0), w(2, 1.0) + w(3, 2.0))
    }
}

/// Everything that varies from one rendering to the next.
struct Rendition<'a> {
    shapes: &'a [StrokeShape],
    stroke_samples: &'a [usize],
    dynamics: Dynamics,
    tempo: f64,
    scale: f64,
    force_gain: f64,
    offset: (f64, f64),
    wobble: Vec<Wobble>,
    force_wobble: Vec<f64>,
}

fn render(r: &Rendition, rate: f64, meta: TraceMetadata) -> PasswordTrace {
    let d = &r.dynamics;
    let mut raw: Vec<RawSample> = Vec::new();
    let mut push = |x: f64, y: f64, f: f64, contact: bool| {
        let t = raw.len() as f64 / rate;
        raw.push(RawSample { t, x, y, f, contact });
    };
    let mut last: Option<(f64, f64)> = None;
    for (s, shape) in r.shapes.iter().enumerate() {
        let n = ((r.stroke_samples[s] as f64 * r.tempo).round() as usize).max(4);
        let pos = |u: f64| {
            let (x, y) = shape.at(u);
            let (wx, wy) = r.wobble[s].at(u);
            (r.offset.0 + r.scale * x + wx, r.offset.1 + r.scale * y + wy)
        };
        if let Some((lx, ly)) = last {
            let (nx, ny) = pos(0.0);
            for g in 1..=d.gap_samples {
                let a = g as f64 / (d.gap_samples + 1) as f64;
                push(lx + a * (nx - lx), ly + a * (ny - ly), 0.0, false);
            }
        }
        for i in 0..n {
            let s_lin = i as f64 / (n - 1) as f64;
            let m = d.warp_cycles;
            // Monotone time-to-path warp: path speed is 1 + warp cos(2 pi m s).
            let u = s_lin + d.warp * (2.0 * PI * m * s_lin).sin() / (2.0 * PI * m);
            let (x, y) = pos(u);
            let env = (s_lin / d.force_attack).min(1.0) * ((1.0 - s_lin) / d.force_release).min(1.0);
            let ripple = 1.0 + d.force_ripple * (2.0 * PI * d.force_ripple_cycles * s_lin + d.force_ripple_phase).sin();
            let t = i as f64 / rate;
            let tremor = d.tremor * (2.0 * PI * d.tremor_hz * t).sin();
            let f = d.force_peak * r.force_gain * (0.05 + 0.95 * env * ripple + tremor + r.force_wobble[s] * (PI * s_lin).sin());
            push(x, y, f.max(0.0), true);
            last = Some((x, y));
        }
    }
    // A short lift-off tail, removed again by truncation.
    if let Some((x, y)) = last {
        for _ in 0..3 {
            push(x, y, 0.0, false);
        }
    }
    PasswordTrace::from_raw(&raw, rate, meta)
        .and_then(PasswordTrace::truncate_trailing)
        .expect("generator emits valid traces")
}

fn jittered<'a>(
    shapes: &'a [StrokeShape],
    stroke_samples: &'a [usize],
    dynamics: Dynamics,
    jitter: JitterScales,
    position_scale: f64,
    rng: &mut ChaCha8Rng,
) -> Rendition<'a> {
    let mut dynamics = dynamics;
    dynamics.warp = (dynamics.warp + 0.5 * jitter.tempo * normal(rng)).clamp(-0.9, 0.9);
    let wobble = shapes.iter().map(|_| Wobble::new(rng, position_scale)).collect();
    let force_wobble = shapes.iter().map(|_| jitter.force * normal(rng)).collect();
    Rendition {
        shapes,
        stroke_samples,
        dynamics,
        tempo: dynamics.tempo * (1.0 + jitter.tempo * normal(rng)),
        scale: 1.0,
        force_gain: 1.0 + jitter.force * normal(rng),
        offset: (jitter.position * normal(rng), jitter.position * normal(rng)),
        wobble,
        force_wobble,
    }
}

/// `n` genuine entries for session `day` (1 or 2). Day-2 entries carry the
/// profile's drift vector, ramped linearly from 1/n to full strength.
pub fn gen_genuine(p: &UserProfile, n: usize, day: u32, cfg: &SynthConfig) -> Vec<PasswordTrace> {
    (0..n)
        .map(|i| {
            let mut rng = stream(p.seed, JITTER_STREAM, day as u64, i as u64);
            let mut r = jittered(&p.strokes, &p.stroke_samples, p.dynamics, p.jitter, p.jitter.position, &mut rng);
            if day >= 2 {
                let ramp = cfg.day2_drift * (i + 1) as f64 / n as f64;
                r.tempo *= 1.0 + ramp * p.drift.tempo;
                r.force_gain *= 1.0 + ramp * p.drift.force;
                r.dynamics.warp = (r.dynamics.warp + ramp * p.drift.warp).clamp(-0.9, 0.9);
                r.scale *= 1.0 + ramp * p.drift.scale;
            }
            render(&r, cfg.sample_rate, meta(p, day))
        })
        .collect()
}

fn meta(p: &UserProfile, day: u32) -> TraceMetadata {
    TraceMetadata {
        user: Some(format!("{:016x}", p.seed)),
        task: Some(p.preset.task()),
        day: Some(day),
        ..TraceMetadata::default()
    }
}

/// Skilled forgery number `index` of `victim` by `forger`: the victim's
/// stroke shapes within a small spatial tolerance, drawn slower and with
/// the forger's force envelope and speed modulation.
pub fn gen_forgery(
    victim: &UserProfile,
    forger: &UserProfile,
    index: usize,
    cfg: &SynthConfig,
) -> Result<PasswordTrace, SynthError> {
    if victim.seed == forger.seed {
        return Err(SynthError::SelfForgery);
    }
    let mut rng = stream(victim.seed ^ mix(forger.seed), FORGERY_STREAM, 0, index as u64);
    let mut dynamics = forger.dynamics;
    dynamics.tempo = cfg.forgery_tempo * victim.dynamics.tempo;
    let tolerance = cfg.forgery_tolerance * victim.jitter.position;
    let mut r = jittered(&victim.strokes, &victim.stroke_samples, dynamics, forger.jitter, tolerance, &mut rng);
    r.offset = (tolerance * normal(&mut rng), tolerance * normal(&mut rng));
    Ok(render(&r, cfg.sample_rate, meta(victim, 1)))
}

/// Noise-free rendering of a profile, for spatial comparisons.
pub fn base_trace(p: &UserProfile, cfg: &SynthConfig) -> PasswordTrace {
    let zero = JitterScales { position: 0.0, force: 0.0, tempo: 0.0 };
    let mut rng = stream(p.seed, JITTER_STREAM, 0, 0);
    let r = jittered(&p.strokes, &p.stroke_samples, p.dynamics, zero, 0.0, &mut rng);
    render(&r, cfg.sample_rate, meta(p, 1))
}

#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub seed: u64,
    pub config: SynthConfig,
    pub profiles: Vec<UserProfile>,
    pub cohort: Cohort,
}

pub fn user_id(i: usize) -> String {
    format!("user{i:02}")
}

/// `cfg.users` profiles from `seed`; each victim is forged by the next
/// `cfg.forgers` users (cyclically), `cfg.forgeries_per_forger` times each.
pub fn generate_cohort(seed: u64, cfg: &SynthConfig) -> Result<SyntheticCohort, SynthError> {
    use rayon::prelude::*;
    cfg.validate()?;
    let profiles: Vec<UserProfile> =
        (0..cfg.users).map(|i| gen_user(mix(seed ^ mix(i as u64)), cfg.preset, cfg)).collect();
    let users = (0..cfg.users)
        .into_par_iter()
        .map(|v| {
            let p = &profiles[v];
            let mut forgeries = Vec::new();
            for f in 1..=cfg.forgers {
                let forger = &profiles[(v + f) % cfg.users];
                for k in 0..cfg.forgeries_per_forger {
                    forgeries.push(gen_forgery(p, forger, k, cfg)?);
                }
            }
            Ok(CohortUser {
                id: user_id(v),
                task: Some(p.preset.task()),
                day1: gen_genuine(p, cfg.day1, 1, cfg),
                day2: gen_genuine(p, cfg.day2, 2, cfg),
                forgeries,
            })
        })
        .collect::<Result<Vec<_>, SynthError>>()?;
    Ok(SyntheticCohort { seed, config: cfg.clone(), profiles, cohort: Cohort { users } })
}

#[derive(Serialize)]
struct Manifest<'a> {
    synthetic: bool,
    seed: u64,
    config: &'a SynthConfig,
    users: Vec<String>,
}

/// Writes the cohort in the split layout read by `load_cohort`, plus a
/// `cohort.json` manifest.
pub fn write_cohort(dir: &Path, c: &SyntheticCohort) -> Result<(), SynthError> {
    fs::create_dir_all(dir)?;
    for u in &c.cohort.users {
        for (split, traces) in [(DAY1_DIR, &u.day1), (DAY2_DIR, &u.day2), (FORGERY_DIR, &u.forgeries)] {
            let sub = dir.join(&u.id).join(split);
            fs::create_dir_all(&sub)?;
            for (i, t) in traces.iter().enumerate() {
                fs::write(sub.join(format!("{i:03}.json")), t.to_json())?;
            }
        }
    }
    let manifest = Manifest {
        synthetic: true,
        seed: c.seed,
        config: &c.config,
        users: c.cohort.users.iter().map(|u| u.id.clone()).collect(),
    };
    fs::write(dir.join("cohort.json"), serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    Ok(())
}

/// Mean distance from each contact sample of `trace` to the nearest point of
/// `reference`'s contact polyline.
pub fn mean_spatial_deviation(trace: &PasswordTrace, reference: &PasswordTrace) -> f64 {
    let refs: Vec<(f64, f64)> = reference.samples().iter().filter(|s| s.contact).map(|s| (s.x, s.y)).collect();
    let seg_dist = |p: (f64, f64), a: (f64, f64), b: (f64, f64)| -> f64 {
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
        ((p.0 - a.0 - t * dx).powi(2) + (p.1 - a.1 - t * dy).powi(2)).sqrt()
    };
    let pts: Vec<(f64, f64)> = trace.samples().iter().filter(|s| s.contact).map(|s| (s.x, s.y)).collect();
    let total: f64 = pts
        .iter()
        .map(|&p| refs.windows(2).map(|w| seg_dist(p, w[0], w[1])).fold(f64::INFINITY, f64::min))
        .sum();
    total / pts.len() as f64
}
