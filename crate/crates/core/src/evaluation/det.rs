use serde::{Deserialize, Serialize};

use super::EvalError;

/// Matching distances of genuine and imposter probes (smaller is genuine).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub imposter: Vec<f64>,
}

impl ScoreSet {
    pub fn new(genuine: Vec<f64>, imposter: Vec<f64>) -> Self {
        Self { genuine, imposter }
    }

    pub fn extend(&mut self, other: &ScoreSet) {
        self.genuine.extend_from_slice(&other.genuine);
        self.imposter.extend_from_slice(&other.imposter);
    }

    fn validate(&self) -> Result<(), EvalError> {
        if self.genuine.is_empty() || self.imposter.is_empty() {
            return Err(EvalError::EmptyScores);
        }
        if self.genuine.iter().chain(&self.imposter).any(|s| !s.is_finite()) {
            return Err(EvalError::NonFiniteScore);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub fmr: f64,
    pub fnmr: f64,
}

/// Operating points in ascending threshold order, from `-inf` (reject all)
/// to `+inf` (accept all). A probe is accepted when its score is strictly
/// below the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct DetCurve {
    pub points: Vec<OperatingPoint>,
}

/// Sweeps every distinct observed score as a threshold.
pub fn det_curve(scores: &ScoreSet) -> Result<DetCurve, EvalError> {
    scores.validate()?;
    let mut genuine = scores.genuine.clone();
    let mut imposter = scores.imposter.clone();
    genuine.sort_by(f64::total_cmp);
    imposter.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = genuine.iter().chain(&imposter).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let (ng, ni) = (genuine.len() as f64, imposter.len() as f64);
    let mut points = Vec::with_capacity(thresholds.len() + 2);
    points.push(OperatingPoint { threshold: f64::NEG_INFINITY, fmr: 0.0, fnmr: 1.0 });
    // Two cursors counting scores strictly below the current threshold.
    let (mut gi, mut ii) = (0usize, 0usize);
    for &t in &thresholds {
        while gi < genuine.len() && genuine[gi] < t {
            gi += 1;
        }
        while ii < imposter.len() && imposter[ii] < t {
            ii += 1;
        }
        points.push(OperatingPoint { threshold: t, fmr: ii as f64 / ni, fnmr: 1.0 - gi as f64 / ng });
    }
    points.push(OperatingPoint { threshold: f64::INFINITY, fmr: 1.0, fnmr: 0.0 });
    Ok(DetCurve { points })
}

impl DetCurve {
    /// Equal error rate by linear interpolation at the sign change of FMR - FNMR.
    pub fn eer(&self) -> f64 {
        let pts = &self.points;
        for i in 0..pts.len() {
            let d = pts[i].fmr - pts[i].fnmr;
            if d == 0.0 {
                return pts[i].fmr;
            }
            if d > 0.0 {
                // pts[0] always has FMR - FNMR = -1, so i >= 1 here.
                let p = pts[i - 1];
                let d0 = p.fmr - p.fnmr;
                let alpha = d0 / (d0 - d);
                return p.fmr + alpha * (pts[i].fmr - p.fmr);
            }
        }
        unreachable!("the +inf sentinel has FMR - FNMR = 1")
    }

    /// Operating point at the loosest threshold whose FMR does not exceed `target`.
    pub fn point_at_fmr(&self, target: f64) -> OperatingPoint {
        *self
            .points
            .iter()
            .rev()
            .find(|p| p.fmr <= target)
            .unwrap_or(&self.points[0])
    }

    /// `1 - FNMR` at the loosest threshold with FMR <= `target`.
    pub fn accuracy_at_fmr(&self, target: f64) -> f64 {
        1.0 - self.point_at_fmr(target).fnmr
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,fmr,fnmr\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.threshold, p.fmr, p.fnmr));
        }
        out
    }
}

pub fn eer(curve: &DetCurve) -> f64 {
    curve.eer()
}

pub fn accuracy_at_fmr(curve: &DetCurve, target: f64) -> f64 {
    curve.accuracy_at_fmr(target)
}

/// Target false match rate used when none is configured.
pub const DEFAULT_FMR_TARGET: f64 = 0.001;

/// Acceptance cut (accept iff score < cut) for a single user's template.
///
/// The genuine cut is the largest leave-one-out genuine score inflated by
/// `genuine_margin`. With imposter scores the result is the tighter of that
/// and the loosest cut whose imposter acceptance rate stays within
/// `fmr_target`.
pub fn calibrate_threshold(genuine: &[f64], imposter: &[f64], fmr_target: f64, genuine_margin: f64) -> f64 {
    let fallback = || {
        let max = genuine.iter().copied().filter(|s| s.is_finite()).fold(0.0_f64, f64::max);
        if max > 0.0 {
            max * (1.0 + genuine_margin)
        } else {
            f64::MIN_POSITIVE
        }
    };
    let mut imp: Vec<f64> = imposter.iter().copied().filter(|s| s.is_finite()).collect();
    if imp.is_empty() {
        return fallback();
    }
    imp.sort_by(f64::total_cmp);
    let allowed = (fmr_target * imp.len() as f64 + 1e-9).floor() as usize;
    if allowed >= imp.len() {
        return fallback();
    }
    imp[allowed].min(fallback())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation() {
        let c = det_curve(&ScoreSet::new(vec![0.0; 5], vec![1.0; 7])).unwrap();
        assert!(c.points.iter().any(|p| p.fmr == 0.0 && p.fnmr == 0.0));
        assert_eq!(c.eer(), 0.0);
        assert_eq!(c.accuracy_at_fmr(0.001), 1.0);
    }

    #[test]
    fn identical_distributions() {
        let s = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let c = det_curve(&ScoreSet::new(s.clone(), s)).unwrap();
        assert!((c.eer() - 0.5).abs() < 1e-12);
        let c = det_curve(&ScoreSet::new(vec![1.0, 2.0], vec![1.0, 2.0])).unwrap();
        assert_eq!(c.eer(), 0.5);
    }

    #[test]
    fn inverted_scores_give_zero_accuracy() {
        let c = det_curve(&ScoreSet::new(vec![5.0, 6.0, 7.0], vec![1.0, 2.0])).unwrap();
        assert_eq!(c.accuracy_at_fmr(0.001), 0.0);
        assert_eq!(c.eer(), 1.0);
    }

    #[test]
    fn empty_lists_rejected() {
        assert_eq!(det_curve(&ScoreSet::new(vec![], vec![1.0])), Err(EvalError::EmptyScores));
        assert_eq!(det_curve(&ScoreSet::new(vec![f64::NAN], vec![1.0])), Err(EvalError::NonFiniteScore));
    }

    #[test]
    fn interpolated_eer() {
        // thresholds: -inf(0,1) 1(0,1) 2(0,2/3) 3(1/2,1/3) 4(1/2,0)? genuine {1,2,3}, imposter {3,4}
        let c = det_curve(&ScoreSet::new(vec![1.0, 2.0, 3.0], vec![2.5, 4.0])).unwrap();
        // at 2.5: fmr 0, fnmr 1/3; at 3: fmr 1/2, fnmr 1/3 -> crossing at fmr 1/3 on that segment
        assert!((c.eer() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn csv_export() {
        let c = det_curve(&ScoreSet::new(vec![0.0], vec![1.0])).unwrap();
        let csv = c.to_csv();
        assert_eq!(csv.lines().next(), Some("threshold,fmr,fnmr"));
        assert_eq!(csv.lines().count(), 1 + 4);
        assert!(csv.contains("-inf,0,1"));
    }

    #[test]
    fn calibration_rules() {
        let imp = vec![5.0, 3.0, 9.0, 4.0];
        assert_eq!(calibrate_threshold(&[1.0], &imp, 0.001, 0.25), 1.25);
        assert_eq!(calibrate_threshold(&[4.0], &imp, 0.001, 0.25), 3.0);
        assert_eq!(calibrate_threshold(&[4.0], &imp, 0.25, 0.25), 4.0);
        assert_eq!(calibrate_threshold(&[2.0, 4.0], &[], 0.001, 0.25), 5.0);
        assert_eq!(calibrate_threshold(&[2.0, 4.0], &imp, 1.0, 0.25), 5.0);
    }
}
