use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::features::FeatureVector;
use crate::matcher::HammingTemplate;
use crate::trace::{PasswordTrace, StateMatrix};

/// Number of maximal contiguous-contact segments.
pub fn count_strokes(trace: &PasswordTrace) -> usize {
    let mut count = 0;
    let mut in_contact = false;
    for s in trace.samples() {
        if s.contact && !in_contact {
            count += 1;
        }
        in_contact = s.contact;
    }
    count
}

type Point = (f64, f64);

struct Segment {
    a: Point,
    b: Point,
    opens_stroke: bool,
    closes_stroke: bool,
}

/// Where a crossing lands on one segment: its interior or one of its end
/// points, or a polyline vertex shared with a neighbour (`Vertex(k)` is the
/// start of segment `k`).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Site {
    Segment(usize),
    Vertex(usize),
}

fn site(segments: &[Segment], k: usize, u: f64) -> Site {
    let s = &segments[k];
    if u == 0.0 && !s.opens_stroke {
        Site::Vertex(k)
    } else if u == 1.0 && !s.closes_stroke {
        Site::Vertex(k + 1)
    } else {
        Site::Segment(k)
    }
}

fn cross(o: Point, p: Point) -> f64 {
    o.0 * p.1 - o.1 * p.0
}

fn sub(p: Point, q: Point) -> Point {
    (p.0 - q.0, p.1 - q.1)
}

fn dot(p: Point, q: Point) -> f64 {
    p.0 * q.0 + p.1 * q.1
}

fn polyline_segments(trace: &PasswordTrace) -> Vec<Segment> {
    let mut strokes: Vec<Vec<Point>> = Vec::new();
    let mut current_id = None;
    for s in trace.samples().iter().filter(|s| s.contact) {
        if current_id != Some(s.stroke_id) {
            strokes.push(Vec::new());
            current_id = Some(s.stroke_id);
        }
        let stroke = strokes.last_mut().expect("pushed above");
        if stroke.last() != Some(&(s.x, s.y)) {
            stroke.push((s.x, s.y));
        }
    }
    let mut segments = Vec::new();
    for stroke in strokes {
        let n = stroke.len();
        for i in 1..n {
            segments.push(Segment { a: stroke[i - 1], b: stroke[i], opens_stroke: i == 1, closes_stroke: i == n - 1 });
        }
    }
    segments
}

fn shares_endpoint(s: &Segment, t: &Segment) -> bool {
    s.a == t.a || s.a == t.b || s.b == t.a || s.b == t.b
}

enum Hit {
    /// Single point at parameter `u` along `s` and `v` along `t`.
    Point(f64, f64),
    /// Collinear overlap of positive length.
    Overlap,
}

fn intersect(s: &Segment, t: &Segment) -> Option<Hit> {
    let r = sub(s.b, s.a);
    let q = sub(t.b, t.a);
    let w = sub(t.a, s.a);
    let denom = cross(r, q);
    if denom == 0.0 {
        if cross(w, r) != 0.0 {
            return None;
        }
        let rr = dot(r, r);
        let t0 = dot(w, r) / rr;
        let t1 = t0 + dot(q, r) / rr;
        let (lo, hi) = (t0.min(t1).max(0.0), t0.max(t1).min(1.0));
        if lo > hi {
            return None;
        }
        if lo < hi {
            return Some(Hit::Overlap);
        }
        let v = dot(sub(s.a, t.a), q) / dot(q, q) + lo * dot(r, q) / dot(q, q);
        return Some(Hit::Point(lo, v.clamp(0.0, 1.0)));
    }
    let u = cross(w, q) / denom;
    let v = cross(w, r) / denom;
    if (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v) {
        Some(Hit::Point(u, v))
    } else {
        None
    }
}

/// Crossings among the contact polyline segments of every stroke, skipping
/// pairs that share an endpoint. A crossing through a polyline vertex counts
/// once, whichever of the two segments meeting there sees it.
pub fn count_intersections(trace: &PasswordTrace) -> usize {
    let segments = polyline_segments(trace);
    let mut seen = BTreeSet::new();
    for i in 0..segments.len() {
        for j in i + 1..segments.len() {
            let (s, t) = (&segments[i], &segments[j]);
            if shares_endpoint(s, t) {
                continue;
            }
            match intersect(s, t) {
                Some(Hit::Point(u, v)) => {
                    let (a, b) = (site(&segments, i, u), site(&segments, j, v));
                    seen.insert((a.min(b), a.max(b)));
                }
                Some(Hit::Overlap) => {
                    seen.insert((Site::Segment(i), Site::Segment(j)));
                }
                None => {}
            }
        }
    }
    seen.len()
}

/// Sign changes of the acceleration channel; zeros keep the preceding sign.
pub fn count_accel_zero_crossings(state: &StateMatrix) -> usize {
    let mut count = 0;
    let mut sign = 0.0;
    for &a in &state.a {
        if a == 0.0 {
            continue;
        }
        let s = a.signum();
        if sign != 0.0 && s != sign {
            count += 1;
        }
        sign = s;
    }
    count
}

/// Samples whose direction change magnitude lies in [pi/6, pi/4].
pub fn curved_portion(state: &StateMatrix) -> usize {
    state.omega.iter().filter(|w| (PI / 6.0..=PI / 4.0).contains(&w.abs())).count()
}

/// The four complexity counts of one trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceCounts {
    pub strokes: f64,
    pub intersections: f64,
    pub zero_crossings: f64,
    pub medium_turns: f64,
}

impl TraceCounts {
    pub fn of(trace: &PasswordTrace, state: &StateMatrix) -> Self {
        Self {
            strokes: count_strokes(trace) as f64,
            intersections: count_intersections(trace) as f64,
            zero_crossings: count_accel_zero_crossings(state) as f64,
            medium_turns: curved_portion(state) as f64,
        }
    }

    /// Element-wise mean over a user's training set.
    pub fn mean(counts: &[TraceCounts]) -> Self {
        let n = counts.len().max(1) as f64;
        let mut m = TraceCounts::default();
        for c in counts {
            m.strokes += c.strokes;
            m.intersections += c.intersections;
            m.zero_crossings += c.zero_crossings;
            m.medium_turns += c.medium_turns;
        }
        TraceCounts {
            strokes: m.strokes / n,
            intersections: m.intersections / n,
            zero_crossings: m.zero_crossings / n,
            medium_turns: m.medium_turns / n,
        }
    }

    fn max(self, o: Self) -> Self {
        Self {
            strokes: self.strokes.max(o.strokes),
            intersections: self.intersections.max(o.intersections),
            zero_crossings: self.zero_crossings.max(o.zero_crossings),
            medium_turns: self.medium_turns.max(o.medium_turns),
        }
    }
}

/// Largest user-mean of each count across a cohort.
pub fn cohort_maxima(user_means: &[TraceCounts]) -> TraceCounts {
    user_means.iter().fold(TraceCounts::default(), |m, c| m.max(*c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityScore {
    pub means: TraceCounts,
    pub maxima: TraceCounts,
    pub delta: f64,
}

fn ratio(x: f64, max: f64) -> f64 {
    if max > 0.0 {
        (x / max).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Sum of the four user-mean counts each divided by its cohort maximum.
/// A zero cohort maximum makes its term 0.
pub fn complexity(user_counts: &[TraceCounts], maxima: &TraceCounts) -> ComplexityScore {
    let means = TraceCounts::mean(user_counts);
    let delta = ratio(means.strokes, maxima.strokes)
        + ratio(means.intersections, maxima.intersections)
        + ratio(means.zero_crossings, maxima.zero_crossings)
        + ratio(means.medium_turns, maxima.medium_turns);
    ComplexityScore { means, maxima: *maxima, delta }
}

pub const BUCKET_LABELS: [&str; 4] = ["[0,0.5)", "[0.5,1)", "[1,1.5)", "[1.5,inf)"];

pub fn complexity_bucket(delta: f64) -> usize {
    if delta < 0.5 {
        0
    } else if delta < 1.0 {
        1
    } else if delta < 1.5 {
        2
    } else {
        3
    }
}

pub fn histogram(deltas: &[f64]) -> [usize; 4] {
    let mut h = [0; 4];
    for &d in deltas {
        h[complexity_bucket(d)] += 1;
    }
    h
}

/// Smallest Hamming distance any forgery achieves against the template.
pub fn forging_difficulty(tpl: &HammingTemplate, forgeries: &[FeatureVector]) -> Result<usize, AnalysisError> {
    let mut best: Option<usize> = None;
    for f in forgeries {
        let d = tpl.hamming_distance(f)?.distance;
        best = Some(best.map_or(d, |b| b.min(d)));
    }
    best.ok_or(AnalysisError::NoForgeries)
}
