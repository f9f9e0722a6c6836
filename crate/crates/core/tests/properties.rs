use proptest::prelude::*;

use hapass_core::analysis::{complexity, count_intersections, forging_difficulty, TraceCounts};
use hapass_core::evaluation::{calibrate_threshold, det_curve, ScoreSet};
use hapass_core::features::{extract_features, FEATURES_PER_CHANNEL, FEATURE_DIM};
use hapass_core::matcher::euclidean::sum_min;
use hapass_core::matcher::hamming::deviation_count;
use hapass_core::matcher::weights::project_simplex;
use hapass_core::matcher::{HammingConfig, HammingTemplate};
use hapass_core::features::FeatureVector;
use hapass_core::trace::{compute_state, Channel, PasswordTrace, RawSample, TraceMetadata};
use hapass_core::wavelet::{modwt, modwt_direct, MotherWavelet, PIPELINE_DEPTH};

fn wavelet() -> impl Strategy<Value = MotherWavelet> {
    prop::sample::select(MotherWavelet::ALL.to_vec())
}

fn series(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, 1..max)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(1.0_f64, |m, x| m.max(x.abs()))
}

/// Integer-grid points of a single contact stroke.
fn stroke(min: usize) -> impl Strategy<Value = Vec<(i32, i32, u8)>> {
    prop::collection::vec((-200..200i32, -200..200i32, 0..100u8), min..80)
}

fn trace_of(points: &[(i32, i32, u8)], dx: i32, dy: i32, sx: i32) -> PasswordTrace {
    let raw: Vec<RawSample> = points
        .iter()
        .enumerate()
        .map(|(i, &(x, y, f))| RawSample {
            t: i as f64 / 60.0,
            x: (sx * x + dx) as f64,
            y: (y + dy) as f64,
            f: f as f64 / 100.0,
            contact: true,
        })
        .collect();
    PasswordTrace::from_raw(&raw, 60.0, TraceMetadata::default()).unwrap()
}

fn feature_vector(values: Vec<f64>) -> FeatureVector {
    FeatureVector::new(MotherWavelet::Haar, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn modwt_preserves_energy(x in series(400), w in wavelet(), depth in 1usize..7) {
        let p = modwt(&x, w, depth).unwrap();
        let ex: f64 = x.iter().map(|v| v * v).sum();
        let ep = p.energy();
        prop_assert!((ex - ep).abs() <= 1e-9 * ex.max(1.0));
        prop_assert_eq!(p.details.len(), depth);
        prop_assert!(p.details.iter().all(|d| d.len() == x.len()) && p.smooth.len() == x.len());
    }

    #[test]
    fn pyramid_equals_direct_convolution(x in series(120), w in wavelet(), depth in 1usize..6) {
        let a = modwt(&x, w, depth).unwrap();
        let b = modwt_direct(&x, w, depth).unwrap();
        let tol = 1e-9 * max_abs(&x);
        for (sa, sb) in a.details.iter().chain([&a.smooth]).zip(b.details.iter().chain([&b.smooth])) {
            for (u, v) in sa.iter().zip(sb) {
                prop_assert!((u - v).abs() <= tol, "{u} vs {v}");
            }
        }
    }

    #[test]
    fn adding_a_constant_only_moves_the_smooth(x in series(300), w in wavelet(), c in -1e3..1e3f64) {
        let a = modwt(&x, w, PIPELINE_DEPTH).unwrap();
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let b = modwt(&shifted, w, PIPELINE_DEPTH).unwrap();
        let tol = 1e-9 * (max_abs(&x) + c.abs());
        for (da, db) in a.details.iter().zip(&b.details) {
            for (u, v) in da.iter().zip(db) {
                prop_assert!((u - v).abs() <= tol);
            }
        }
        for (u, v) in a.smooth.iter().zip(&b.smooth) {
            prop_assert!((v - u - c).abs() <= tol);
        }
    }

    #[test]
    fn circular_shift_commutes(x in series(200), w in wavelet(), s in 0usize..400) {
        let n = x.len();
        let s = s % n;
        let shifted: Vec<f64> = (0..n).map(|k| x[(k + n - s) % n]).collect();
        let a = modwt(&x, w, PIPELINE_DEPTH).unwrap();
        let b = modwt(&shifted, w, PIPELINE_DEPTH).unwrap();
        for (sa, sb) in a.details.iter().chain([&a.smooth]).zip(b.details.iter().chain([&b.smooth])) {
            for k in 0..n {
                prop_assert!((sb[k] - sa[(k + n - s) % n]).abs() <= 1e-10 * max_abs(&x));
            }
        }
    }

    #[test]
    fn direction_change_stays_in_half_open_pi(points in stroke(2)) {
        let state = compute_state(&trace_of(&points, 0, 0, 1));
        prop_assert!(state.omega.iter().all(|w| *w > -std::f64::consts::PI && *w <= std::f64::consts::PI));
        prop_assert_eq!(state.omega[0], 0.0);
    }

    #[test]
    fn translation_changes_only_position_scaling_features(
        points in stroke(8),
        dx in -500..500i32,
        dy in -500..500i32,
        w in wavelet(),
    ) {
        let a = extract_features(&compute_state(&trace_of(&points, 0, 0, 1)), w).unwrap();
        let b = extract_features(&compute_state(&trace_of(&points, dx, dy, 1)), w).unwrap();
        prop_assert_eq!(b.values.len(), FEATURE_DIM);
        let scale = 1e-9 * 1000.0;
        for c in Channel::ALL {
            let (ba, bb) = (a.channel_block(c), b.channel_block(c));
            if matches!(c, Channel::X | Channel::Y) {
                // Detail-band mean, std and max; the last ratio and the
                // scaling-band stats depend on the offset.
                for i in (0..4 * PIPELINE_DEPTH - 1).filter(|i| i % 4 != 3) {
                    prop_assert!((ba[i] - bb[i]).abs() <= scale, "{c:?}[{i}]: {} vs {}", ba[i], bb[i]);
                }
            } else {
                prop_assert_eq!(ba, bb, "{:?}", c);
            }
        }
    }

    #[test]
    fn mirrored_x_gives_identical_x_block(points in stroke(8), w in wavelet()) {
        let a = extract_features(&compute_state(&trace_of(&points, 0, 0, 1)), w).unwrap();
        let b = extract_features(&compute_state(&trace_of(&points, 0, 0, -1)), w).unwrap();
        prop_assert_eq!(a.channel_block(Channel::X), b.channel_block(Channel::X));
        prop_assert_eq!(a.channel_block(Channel::Y), b.channel_block(Channel::Y));
        prop_assert_eq!(a.channel_block(Channel::Force).len(), FEATURES_PER_CHANNEL);
    }

    #[test]
    fn sum_min_is_monotone(values in prop::collection::vec(0.0..100.0f64, 1..12), bump in 0.0..10.0f64, i in 0usize..12) {
        let n = values.len();
        let mut prev = 0.0;
        for k in 1..=n {
            let s = sum_min(&values, k);
            prop_assert!(s >= prev);
            prev = s;
        }
        let mut raised = values.clone();
        raised[i % n] += bump;
        for k in 1..=n {
            prop_assert!(sum_min(&raised, k) >= sum_min(&values, k));
        }
    }

    #[test]
    fn hamming_count_falls_as_threshold_rises(
        probe in prop::collection::vec(-5.0..5.0f64, 20),
        std in prop::collection::vec(0.1..2.0f64, 20),
        t1 in 0.0..5.0f64,
        t2 in 0.0..5.0f64,
    ) {
        let mean = vec![0.0; 20];
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(deviation_count(&probe, &mean, &std, hi) <= deviation_count(&probe, &mean, &std, lo));
    }

    #[test]
    fn simplex_projection_is_nearest(v in prop::collection::vec(-3.0..3.0f64, 1..6), seeds in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 6), 50)) {
        let p = project_simplex(&v);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|w| *w >= 0.0));
        let dist = |q: &[f64]| q.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let dp = dist(&p);
        for s in &seeds {
            let raw = &s[..v.len()];
            let total: f64 = raw.iter().sum::<f64>().max(1e-12);
            let q: Vec<f64> = raw.iter().map(|x| x / total).collect();
            prop_assert!(dp <= dist(&q) + 1e-12);
        }
    }

    #[test]
    fn det_rates_are_monotone(
        g in prop::collection::vec(0.0..10.0f64, 1..30),
        i in prop::collection::vec(0.0..10.0f64, 1..30),
        t1 in 0.0..1.0f64,
        t2 in 0.0..1.0f64,
    ) {
        let curve = det_curve(&ScoreSet::new(g, i)).unwrap();
        for w in curve.points.windows(2) {
            prop_assert!(w[0].threshold < w[1].threshold);
            prop_assert!(w[0].fmr <= w[1].fmr && w[0].fnmr >= w[1].fnmr);
        }
        let eer = curve.eer();
        prop_assert!((0.0..=1.0).contains(&eer));
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(curve.accuracy_at_fmr(lo) <= curve.accuracy_at_fmr(hi));
        prop_assert!(curve.point_at_fmr(lo).fmr <= lo);
    }

    #[test]
    fn calibrated_threshold_respects_both_caps(
        g in prop::collection::vec(0.1..10.0f64, 1..15),
        i in prop::collection::vec(0.0..20.0f64, 1..40),
        fmr in 0.0..0.5f64,
        margin in 0.0..2.0f64,
    ) {
        let t = calibrate_threshold(&g, &i, fmr, margin);
        let cap = g.iter().copied().fold(0.0, f64::max) * (1.0 + margin);
        prop_assert!(t <= cap);
        let accepted = i.iter().filter(|s| **s < t).count() as f64;
        prop_assert!(accepted <= fmr * i.len() as f64 + 1e-9);
    }

    #[test]
    fn intersections_ignore_reversal_and_translation(points in stroke(2), dx in -50..50i32, dy in -50..50i32) {
        let forward = trace_of(&points, 0, 0, 1);
        let rev: Vec<_> = points.iter().rev().copied().collect();
        let n = count_intersections(&forward);
        prop_assert_eq!(n, count_intersections(&trace_of(&rev, 0, 0, 1)));
        prop_assert_eq!(n, count_intersections(&trace_of(&points, dx, dy, 1)));
        prop_assert_eq!(n, count_intersections(&trace_of(&points, 0, 0, -1)));
    }

    #[test]
    fn complexity_is_scale_free(
        counts in prop::collection::vec((0.0..10.0f64, 0.0..10.0f64, 0.0..50.0f64, 0.0..50.0f64), 1..6),
        factor in 0.1..10.0f64,
    ) {
        let make = |s: f64| -> Vec<TraceCounts> {
            counts.iter().map(|&(a, b, c, d)| TraceCounts {
                strokes: a * s, intersections: b * s, zero_crossings: c * s, medium_turns: d * s,
            }).collect()
        };
        let maxima = TraceCounts { strokes: 10.0, intersections: 10.0, zero_crossings: 50.0, medium_turns: 50.0 };
        let scaled_max = TraceCounts {
            strokes: 10.0 * factor, intersections: 10.0 * factor, zero_crossings: 50.0 * factor, medium_turns: 50.0 * factor,
        };
        let a = complexity(&make(1.0), &maxima).delta;
        let b = complexity(&make(factor), &scaled_max).delta;
        prop_assert!((a - b).abs() <= 1e-9);
        prop_assert!((0.0..=4.0).contains(&a));
    }

    #[test]
    fn forging_difficulty_never_rises_with_more_forgeries(
        offsets in prop::collection::vec(prop::collection::vec(-4.0..4.0f64, FEATURE_DIM), 2..6),
    ) {
        let training: Vec<FeatureVector> = (0..5)
            .map(|i| feature_vector((0..FEATURE_DIM).map(|d| ((i * 7 + d) % 5) as f64 * 0.1).collect()))
            .collect();
        let tpl = HammingTemplate::enroll("u", &training, &HammingConfig::default()).unwrap();
        let forgeries: Vec<FeatureVector> = offsets.into_iter().map(feature_vector).collect();
        let mut prev = usize::MAX;
        for n in 1..=forgeries.len() {
            let d = forging_difficulty(&tpl, &forgeries[..n]).unwrap();
            prop_assert!(d <= prev);
            prev = d;
        }
    }
}
