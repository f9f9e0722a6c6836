//! Two-session evaluation: enroll on the first day-1 entries, then score the
//! rest of day 1, the day-2 session and the skilled forgeries, with and
//! without adaptive template updates.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{det_curve, DetCurve, EvalError, ScoreSet};
use crate::features::{extract_features, FeatureVector};
use crate::matcher::{
    state_hash, DriftState, EuclideanConfig, EuclideanTemplate, HammingConfig, HammingTemplate, Method,
};
use crate::trace::{compute_state, parse_trace, parse_trace_csv, PasswordTrace, Task};
use crate::wavelet::MotherWavelet;

pub const DAY1_DIR: &str = "day1/genuine";
pub const DAY2_DIR: &str = "day2/genuine";
pub const FORGERY_DIR: &str = "forgeries";

#[derive(Debug, Clone)]
pub struct CohortUser {
    pub id: String,
    pub task: Option<Task>,
    pub day1: Vec<PasswordTrace>,
    pub day2: Vec<PasswordTrace>,
    pub forgeries: Vec<PasswordTrace>,
}

#[derive(Debug, Clone, Default)]
pub struct Cohort {
    pub users: Vec<CohortUser>,
}

fn read_split(user_dir: &Path, split: &str, user: &str) -> Result<Vec<PasswordTrace>, EvalError> {
    let dir = user_dir.join(split);
    let missing = || EvalError::MissingSplit { user: user.to_string(), split: split.to_string() };
    if !dir.is_dir() {
        return Err(missing());
    }
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("json" | "csv")))
        .collect();
    files.sort();
    let traces = files
        .iter()
        .map(|path| {
            let bytes = fs::read(path)?;
            let parsed = if path.extension().is_some_and(|e| e == "csv") {
                parse_trace_csv(&bytes)
            } else {
                parse_trace(&bytes)
            };
            parsed.map_err(|source| EvalError::Trace { path: path.display().to_string(), source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if traces.is_empty() {
        return Err(missing());
    }
    Ok(traces)
}

/// Loads `<root>/<user>/{day1/genuine,day2/genuine,forgeries}/*.{json,csv}`.
/// Users and files are taken in name order.
pub fn load_cohort(root: &Path) -> Result<Cohort, EvalError> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut users = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let id = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let day1 = read_split(&dir, DAY1_DIR, &id)?;
        let day2 = read_split(&dir, DAY2_DIR, &id)?;
        let forgeries = read_split(&dir, FORGERY_DIR, &id)?;
        let task = day1[0].metadata.task;
        users.push(CohortUser { id, task, day1, day2, forgeries });
    }
    if users.len() < 2 {
        return Err(EvalError::TooFewUsers(users.len()));
    }
    Ok(Cohort { users })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// One DET curve over all users' scores.
    #[default]
    Pooled,
    /// Mean of per-user EER and accuracy.
    PerUser,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub euclidean: EuclideanConfig,
    pub hamming: HammingConfig,
    pub methods: Vec<Method>,
    pub enroll_count: usize,
    pub fmr_target: f64,
    pub aggregation: Aggregation,
    pub task: Option<Task>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            euclidean: EuclideanConfig::default(),
            hamming: HammingConfig::default(),
            methods: Method::ALL.to_vec(),
            enroll_count: 10,
            fmr_target: super::DEFAULT_FMR_TARGET,
            aggregation: Aggregation::Pooled,
            task: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub task: String,
    pub method: Method,
    pub day: u8,
    pub adaptive: bool,
    pub eer: f64,
    pub accuracy: f64,
    pub genuine: usize,
    pub imposter: usize,
    /// Users whose template ended the session past its drift bound.
    pub retrain_flags: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub label: String,
    pub day: u8,
    pub eer: f64,
    pub accuracy: f64,
}

/// Published human-subject operating point, for context only.
pub fn reference_rows() -> Vec<ReferenceRow> {
    vec![ReferenceRow {
        label: "Signature w/ static device".into(),
        day: 1,
        eer: 0.0138,
        accuracy: 0.9414,
    }]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub users: usize,
    pub fmr_target: f64,
    pub aggregation: Aggregation,
    pub rows: Vec<ReportRow>,
    /// Whether every non-adaptive pass left its template state hash unchanged.
    pub non_adaptive_unchanged: bool,
    pub reference: Vec<ReferenceRow>,
    #[serde(skip)]
    pub curves: Vec<(String, DetCurve)>,
}

/// Scores of one user under one method: `[day][adaptive]`.
#[derive(Debug, Clone, Default)]
struct UserScores {
    sets: [[ScoreSet; 2]; 2],
    flags: [[bool; 2]; 2],
    unchanged: bool,
}

fn features(traces: &[PasswordTrace], wavelet: MotherWavelet) -> Result<Vec<FeatureVector>, EvalError> {
    traces
        .iter()
        .map(|t| extract_features(&compute_state(t), wavelet).map_err(EvalError::from))
        .collect()
}

struct UserFeatures {
    enroll: Vec<FeatureVector>,
    day1: Vec<FeatureVector>,
    day2: Vec<FeatureVector>,
    forgeries: Vec<FeatureVector>,
}

fn user_features(user: &CohortUser, wavelet: MotherWavelet, n: usize) -> Result<UserFeatures, EvalError> {
    let day1 = features(&user.day1, wavelet)?;
    Ok(UserFeatures {
        enroll: day1[..n].to_vec(),
        day1: day1[n..].to_vec(),
        day2: features(&user.day2, wavelet)?,
        forgeries: features(&user.forgeries, wavelet)?,
    })
}

/// Common driver over both matchers: `score` returns (distance, accepted),
/// `update` applies the adaptive rule.
trait Verifier: Clone + Serialize {
    fn score(&self, probe: &FeatureVector) -> Result<(f64, bool), EvalError>;
    fn update(&mut self, probe: &FeatureVector) -> Result<(), EvalError>;
    fn retrain(&self) -> bool;
}

impl Verifier for EuclideanTemplate {
    fn score(&self, probe: &FeatureVector) -> Result<(f64, bool), EvalError> {
        let r = self.matching_distance(probe)?;
        Ok((r.distance, r.accepted))
    }
    fn update(&mut self, probe: &FeatureVector) -> Result<(), EvalError> {
        self.adaptive_update(probe)?;
        Ok(())
    }
    fn retrain(&self) -> bool {
        self.drift_check().state == DriftState::RetrainRequired
    }
}

impl Verifier for HammingTemplate {
    fn score(&self, probe: &FeatureVector) -> Result<(f64, bool), EvalError> {
        let r = self.hamming_distance(probe)?;
        Ok((r.distance as f64, r.accepted))
    }
    fn update(&mut self, probe: &FeatureVector) -> Result<(), EvalError> {
        self.adaptive_mean_update(probe)?;
        Ok(())
    }
    fn retrain(&self) -> bool {
        self.drift_check().state == DriftState::RetrainRequired
    }
}

fn score_all<V: Verifier>(tpl: &V, probes: &[FeatureVector]) -> Result<Vec<f64>, EvalError> {
    probes.iter().map(|p| tpl.score(p).map(|s| s.0)).collect()
}

/// Genuine probes are scored in entry order; accepted ones update the
/// adaptive copy before the next probe. Forgeries are scored against the
/// template as it stands at the end of each session and never update it.
fn replay<V: Verifier>(tpl: &V, f: &UserFeatures) -> Result<UserScores, EvalError> {
    let mut out = UserScores::default();
    let before = state_hash(tpl);
    for (day, genuine) in [&f.day1, &f.day2].into_iter().enumerate() {
        out.sets[day][0] = ScoreSet::new(score_all(tpl, genuine)?, score_all(tpl, &f.forgeries)?);
    }
    out.unchanged = state_hash(tpl) == before;
    out.flags[0][0] = tpl.retrain();
    out.flags[1][0] = out.flags[0][0];

    let mut adaptive = tpl.clone();
    for (day, genuine) in [&f.day1, &f.day2].into_iter().enumerate() {
        let mut scores = Vec::with_capacity(genuine.len());
        for probe in genuine {
            let (d, accepted) = adaptive.score(probe)?;
            scores.push(d);
            if accepted {
                adaptive.update(probe)?;
            }
        }
        out.sets[day][1] = ScoreSet::new(scores, score_all(&adaptive, &f.forgeries)?);
        out.flags[day][1] = adaptive.retrain();
    }
    Ok(out)
}

fn task_name(task: Option<Task>) -> String {
    task.map_or_else(|| "unspecified".to_string(), |t| t.as_str().to_string())
}

/// Runs both matchers over the cohort. Thresholds (which decide adaptive
/// updates) are calibrated per user against the other users' enrollment
/// vectors at the configured FMR target.
pub fn run_protocol(cohort: &Cohort, cfg: &ProtocolConfig) -> Result<Report, EvalError> {
    let n = cfg.enroll_count;
    let users: Vec<&CohortUser> =
        cohort.users.iter().filter(|u| cfg.task.is_none() || u.task == cfg.task).collect();
    if users.len() < 2 {
        return Err(EvalError::TooFewUsers(users.len()));
    }
    for u in &users {
        if u.day1.len() <= n {
            return Err(EvalError::MissingSplit { user: u.id.clone(), split: DAY1_DIR.into() });
        }
    }

    let mut tasks: Vec<Option<Task>> = users.iter().map(|u| u.task).collect();
    tasks.sort_by_key(|t| t.map_or(usize::MAX, |t| Task::ALL.iter().position(|a| *a == t).unwrap_or(0)));
    tasks.dedup();

    let mut rows = Vec::new();
    let mut curves = Vec::new();
    let mut unchanged = true;
    for &task in &tasks {
        let group: Vec<&CohortUser> = users.iter().copied().filter(|u| u.task == task).collect();
        for &method in &cfg.methods {
            let euclid = cfg.euclidean.for_task(task);
            let wavelet = match method {
                Method::Euclidean => euclid.wavelet,
                Method::Hamming => cfg.hamming.wavelet,
            };
            let feats: Vec<UserFeatures> = group
                .par_iter()
                .map(|u| user_features(u, wavelet, n))
                .collect::<Result<_, _>>()?;
            let scores: Vec<UserScores> = (0..group.len())
                .into_par_iter()
                .map(|i| {
                    let imposters: Vec<FeatureVector> = feats
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .flat_map(|(_, f)| f.enroll.iter().cloned())
                        .collect();
                    let f = &feats[i];
                    let id = &group[i].id;
                    match method {
                        Method::Euclidean => {
                            let mut tpl = EuclideanTemplate::enroll(id, &f.enroll, &euclid)?;
                            tpl.calibrate(&imposters, cfg.fmr_target, cfg.euclidean.genuine_margin);
                            replay(&tpl, f)
                        }
                        Method::Hamming => {
                            let mut tpl = HammingTemplate::enroll(id, &f.enroll, &cfg.hamming)?;
                            tpl.calibrate(&f.enroll, &imposters, cfg.fmr_target, cfg.hamming.genuine_margin);
                            replay(&tpl, f)
                        }
                    }
                })
                .collect::<Result<_, _>>()?;
            unchanged &= scores.iter().all(|s| s.unchanged);

            for day in 0..2 {
                for adaptive in 0..2 {
                    let mut pooled = ScoreSet::default();
                    for s in &scores {
                        pooled.extend(&s.sets[day][adaptive]);
                    }
                    let curve = det_curve(&pooled)?;
                    let (eer, accuracy) = match cfg.aggregation {
                        Aggregation::Pooled => (curve.eer(), curve.accuracy_at_fmr(cfg.fmr_target)),
                        Aggregation::PerUser => {
                            let mut e = 0.0;
                            let mut a = 0.0;
                            for s in &scores {
                                let c = det_curve(&s.sets[day][adaptive])?;
                                e += c.eer();
                                a += c.accuracy_at_fmr(cfg.fmr_target);
                            }
                            (e / scores.len() as f64, a / scores.len() as f64)
                        }
                    };
                    let row = ReportRow {
                        task: task_name(task),
                        method,
                        day: day as u8 + 1,
                        adaptive: adaptive == 1,
                        eer,
                        accuracy,
                        genuine: pooled.genuine.len(),
                        imposter: pooled.imposter.len(),
                        retrain_flags: scores.iter().filter(|s| s.flags[day][adaptive]).count(),
                    };
                    curves.push((row_label(&row), curve));
                    rows.push(row);
                }
            }
        }
    }
    Ok(Report {
        users: users.len(),
        fmr_target: cfg.fmr_target,
        aggregation: cfg.aggregation,
        rows,
        non_adaptive_unchanged: unchanged,
        reference: reference_rows(),
        curves,
    })
}

const BASELINE_POINTS: usize = 64;

/// Contact points resampled to a fixed count by arc length, centered.
fn shape_signature(trace: &PasswordTrace) -> Vec<(f64, f64)> {
    let pts: Vec<(f64, f64)> = trace.samples().iter().filter(|s| s.contact).map(|s| (s.x, s.y)).collect();
    let mut cum = vec![0.0];
    for w in pts.windows(2) {
        let d = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
        cum.push(cum.last().unwrap() + d);
    }
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(BASELINE_POINTS);
    let mut seg = 0;
    for i in 0..BASELINE_POINTS {
        let target = total * i as f64 / (BASELINE_POINTS - 1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < target {
            seg += 1;
        }
        let span = cum.get(seg + 1).map_or(0.0, |c| c - cum[seg]);
        let a = if span > 0.0 { ((target - cum[seg]) / span).clamp(0.0, 1.0) } else { 0.0 };
        let (p, q) = (pts[seg], pts[(seg + 1).min(pts.len() - 1)]);
        out.push((p.0 + a * (q.0 - p.0), p.1 + a * (q.1 - p.1)));
    }
    let n = out.len() as f64;
    let (cx, cy) = out.iter().fold((0.0, 0.0), |(x, y), p| (x + p.0 / n, y + p.1 / n));
    out.iter().map(|p| (p.0 - cx, p.1 - cy)).collect()
}

fn shape_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    a.iter().zip(b).map(|(p, q)| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()).sum::<f64>() / a.len() as f64
}

/// Scores of a trajectory-only matcher that sees the path shape but none of
/// the timing or force: distance to the nearest enrollment entry after
/// arc-length resampling. Genuine probes are the day-1 test entries,
/// imposters the forgeries.
pub fn trajectory_baseline(cohort: &Cohort, enroll_count: usize) -> Result<ScoreSet, EvalError> {
    let mut scores = ScoreSet::default();
    for u in &cohort.users {
        if u.day1.len() <= enroll_count {
            return Err(EvalError::MissingSplit { user: u.id.clone(), split: DAY1_DIR.into() });
        }
        let templates: Vec<_> = u.day1[..enroll_count].iter().map(shape_signature).collect();
        let score = |t: &PasswordTrace| {
            let s = shape_signature(t);
            templates.iter().map(|tpl| shape_distance(&s, tpl)).fold(f64::INFINITY, f64::min)
        };
        scores.genuine.extend(u.day1[enroll_count..].iter().map(score));
        scores.imposter.extend(u.forgeries.iter().map(score));
    }
    Ok(scores)
}

fn row_label(row: &ReportRow) -> String {
    format!(
        "{}_{}_day{}_{}",
        row.task,
        row.method,
        row.day,
        if row.adaptive { "adaptive" } else { "static" }
    )
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

impl Report {
    pub fn row(&self, method: Method, day: u8, adaptive: bool) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method && r.day == day && r.adaptive == adaptive)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("# Verification report\n\n");
        let agg = match self.aggregation {
            Aggregation::Pooled => "pooled scores",
            Aggregation::PerUser => "per-user average",
        };
        let _ = writeln!(out, "{} users, accuracy at FMR {}, {agg}.\n", self.users, pct(self.fmr_target));
        out.push_str("| Task | Method | Day | Adaptive | EER | Accuracy | Genuine | Imposter | Retrain flags |\n");
        out.push_str("|---|---|---|---|---|---|---|---|---|\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                r.task,
                r.method,
                r.day,
                if r.adaptive { "yes" } else { "no" },
                pct(r.eer),
                pct(r.accuracy),
                r.genuine,
                r.imposter,
                r.retrain_flags
            );
        }
        out.push_str("\n## Reference fixture\n\n");
        out.push_str(
            "Published human-subject result, listed for context only. It is not reproducible from this cohort.\n\n",
        );
        for r in &self.reference {
            let _ = writeln!(out, "- {}, Day {}, {} EER, {}", r.label, r.day, pct(r.eer), pct(r.accuracy));
        }
        out
    }

    /// Writes one `threshold,fmr,fnmr` CSV per report row into `dir`.
    pub fn write_det_csvs(&self, dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (label, curve) in &self.curves {
            let path = dir.join(format!("det_{label}.csv"));
            fs::write(&path, curve.to_csv())?;
            written.push(path);
        }
        Ok(written)
    }
}
