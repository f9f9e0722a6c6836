//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hapass_core::analysis::{cohort_complexity, entropy_of, symbol_bits};
use hapass_core::evaluation::{det_curve, run_protocol, Cohort, ProtocolConfig, ScoreSet};
use hapass_core::features::{extract_features, FeatureVector, FEATURES_PER_CHANNEL, FEATURE_DIM};
use hapass_core::matcher::euclidean::sum_min;
use hapass_core::matcher::hamming::robust_stats;
use hapass_core::matcher::weights::{optimize_weights, WeightOptions};
use hapass_core::matcher::{EuclideanConfig, EuclideanTemplate, HammingConfig, HammingTemplate, Method, SIGMA_FLOOR};
use hapass_core::synth::{generate_cohort, Preset, SynthConfig};
use hapass_core::trace::{compute_state, Channel};
use hapass_core::wavelet::{modwt, MotherWavelet, PIPELINE_DEPTH};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn signal(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let scale = 10f64.powf(r.random_range(-3.0..3.0));
    let offset = r.random_range(-5.0..5.0) * scale;
    (0..n).map(|_| offset + scale * r.random_range(-1.0..1.0)).collect()
}

fn energy(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

const PRIMES: [usize; 12] = [11, 13, 31, 61, 97, 127, 193, 251, 317, 401, 499, 509];

fn modwt_energy_identity() -> Outcome {
    let mut r = rng(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let n = if case % 4 == 0 { PRIMES[case / 4 % PRIMES.len()] } else { r.random_range(8..=512) };
        let x = signal(&mut r, n);
        let ex = energy(&x);
        for w in MotherWavelet::ALL {
            let p = modwt(&x, w, PIPELINE_DEPTH).map_err(|e| e.to_string())?;
            let ep: f64 = p.details.iter().map(|d| energy(d)).sum::<f64>() + energy(&p.smooth);
            let rel = (ex - ep).abs() / ex;
            worst = worst.max(rel);
            ensure(rel <= 1e-8, || format!("n={n} {w}: relative error {rel:e}"))?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("1400 transforms, worst relative error {worst:.1e}, {elapsed:.2?}"))
}

fn modwt_shift_equivariance() -> Outcome {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = r.random_range(8..=300);
        let s = r.random_range(1..n);
        let w = MotherWavelet::ALL[case % MotherWavelet::ALL.len()];
        let x = signal(&mut r, n);
        let shifted: Vec<f64> = (0..n).map(|k| x[(k + n - s) % n]).collect();
        let a = modwt(&x, w, PIPELINE_DEPTH).map_err(|e| e.to_string())?;
        let b = modwt(&shifted, w, PIPELINE_DEPTH).map_err(|e| e.to_string())?;
        let series = a.details.iter().chain([&a.smooth]).zip(b.details.iter().chain([&b.smooth]));
        for (sa, sb) in series {
            for k in 0..n {
                let d = (sb[k] - sa[(k + n - s) % n]).abs();
                worst = worst.max(d);
                ensure(d <= 1e-10, || format!("n={n} shift={s} {w}: |diff| {d:e} at {k}"))?;
            }
        }
    }
    Ok(format!("100 cases, worst |diff| {worst:.1e}"))
}

fn filter_tables_qmf() -> Outcome {
    let mut worst: f64 = 0.0;
    for w in MotherWavelet::ALL {
        let bank = w.filter_bank();
        let g = &bank.g;
        let l = g.len();
        ensure(l % 2 == 0 && bank.h.len() == l, || format!("{w}: width {l}"))?;
        for m in 0..l / 2 {
            let s: f64 = (0..l - 2 * m).map(|k| g[k] * g[k + 2 * m]).sum();
            let target = if m == 0 { 1.0 } else { 0.0 };
            worst = worst.max((s - target).abs());
        }
        let sg = (g.iter().sum::<f64>() - SQRT_2).abs();
        let sh = bank.h.iter().sum::<f64>().abs();
        worst = worst.max(sg).max(sh);
        ensure(worst <= 1e-10, || format!("{w}: residual {worst:e}"))?;
    }
    Ok(format!("7 tables, worst residual {worst:.1e}"))
}

/// Level-1 Haar DWT coded from the two-tap definition.
fn haar_dwt(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    (0..n / 2)
        .map(|t| {
            let (cur, prev) = (x[2 * t], x[(2 * t + n - 1) % n]);
            ((cur - prev) / SQRT_2, (cur + prev) / SQRT_2)
        })
        .unzip()
}

fn haar_dwt_oracle() -> Outcome {
    let mut r = rng(3);
    let mut cases = 0;
    for p in 1..=9 {
        for _ in 0..5 {
            let n = 1usize << p;
            let x = signal(&mut r, n);
            let m = modwt(&x, MotherWavelet::Haar, 1).map_err(|e| e.to_string())?;
            let (d, a) = haar_dwt(&x);
            for t in 0..n / 2 {
                let dd = (d[t] - SQRT_2 * m.details[0][2 * t]).abs();
                let da = (a[t] - SQRT_2 * m.smooth[2 * t]).abs();
                ensure(dd <= 1e-10 && da <= 1e-10, || format!("n={n} t={t}: {dd:e} {da:e}"))?;
            }
            cases += 1;
        }
    }
    let h = MotherWavelet::Haar.filter_bank();
    ensure(h.g == [FRAC_1_SQRT_2, FRAC_1_SQRT_2], || "Haar g".into())?;
    Ok(format!("{cases} dyadic signals, lengths 2..512"))
}

fn feature_bits(fs: &[FeatureVector]) -> Vec<Vec<u64>> {
    fs.iter().map(|f| f.values.iter().map(|v| v.to_bits()).collect()).collect()
}

fn feature_layout_and_determinism() -> Outcome {
    let cfg = SynthConfig { users: 4, day1: 4, day2: 2, forgers: 1, forgeries_per_forger: 2, ..SynthConfig::default() };
    let mut traces = generate_cohort(5, &cfg).map_err(|e| e.to_string())?.cohort.users;
    let pattern = SynthConfig { preset: Preset::PatternLike, ..cfg.clone() };
    traces.extend(generate_cohort(6, &pattern).map_err(|e| e.to_string())?.cohort.users);
    let all: Vec<_> = traces.iter().flat_map(|u| u.day1.iter().chain(&u.day2).chain(&u.forgeries)).collect();
    let extract = |w: MotherWavelet| -> Result<Vec<FeatureVector>, String> {
        all.iter().map(|t| extract_features(&compute_state(t), w).map_err(|e| e.to_string())).collect()
    };
    for w in MotherWavelet::ALL {
        let reference = extract(w)?;
        for f in &reference {
            ensure(f.values.len() == FEATURE_DIM && FEATURE_DIM == 184, || format!("length {}", f.values.len()))?;
            for c in Channel::ALL {
                ensure(f.channel_block(c).len() == 23 && FEATURES_PER_CHANNEL == 23, || "block".into())?;
            }
        }
        let again = extract(w)?;
        ensure(feature_bits(&again) == feature_bits(&reference), || format!("{w}: rerun differs"))?;
        for threads in [1, 2, 3] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
            let pooled = pool.install(|| extract(w))?;
            ensure(feature_bits(&pooled) == feature_bits(&reference), || format!("{w}: {threads} threads differ"))?;
        }
    }
    Ok(format!("{} traces x 7 wavelets, 184 = 8 x 23, bit-identical over reruns and 1-3 threads", all.len()))
}

/// Objective evaluated from the raw vectors.
fn objective(vectors: &[Vec<f64>], w: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            let s: f64 = (0..w.len()).map(|d| (w[d] * (vectors[i][d] - vectors[j][d])).powi(2)).sum();
            total += s.sqrt();
        }
    }
    total
}

const GRID: usize = 1000;

/// Minimum over `c` in `0..=rest` of a convex sequence: binary search on
/// the forward difference.
fn convex_line_min(rest: usize, f: impl Fn(usize) -> f64) -> f64 {
    let (mut lo, mut hi) = (0, rest);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if f(mid + 1) - f(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    f(lo)
}

fn grid_min(vectors: &[Vec<f64>], dim: usize) -> f64 {
    let step = 1.0 / GRID as f64;
    let obj = |units: &[usize]| -> f64 {
        let w: Vec<f64> = units.iter().map(|&u| u as f64 * step).collect();
        objective(vectors, &w)
    };
    match dim {
        1 => obj(&[GRID]),
        2 => (0..=GRID).map(|a| obj(&[a, GRID - a])).fold(f64::INFINITY, f64::min),
        3 => (0..=GRID)
            .flat_map(|a| (0..=GRID - a).map(move |b| (a, b)))
            .map(|(a, b)| obj(&[a, b, GRID - a - b]))
            .fold(f64::INFINITY, f64::min),
        4 => {
            let mut best = f64::INFINITY;
            for a in 0..=GRID {
                for b in 0..=GRID - a {
                    let rest = GRID - a - b;
                    best = best.min(convex_line_min(rest, |c| obj(&[a, b, c, rest - c])));
                }
            }
            best
        }
        _ => unreachable!(),
    }
}

fn weight_optimizer_vs_grid() -> Outcome {
    let mut r = rng(4);
    let mut worst_gap: f64 = 0.0;
    let mut worst_simplex: f64 = 0.0;
    for case in 0..50 {
        let dim = 1 + case % 4;
        let n = r.random_range(3..=5);
        let vectors: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| r.random_range(0.0..1.0)).collect()).collect();
        let sol = optimize_weights(&vectors, &WeightOptions::default()).map_err(|e| e.to_string())?;
        let sum: f64 = sol.weights.iter().sum();
        let neg = sol.weights.iter().fold(0.0_f64, |m, &w| m.max(-w));
        worst_simplex = worst_simplex.max((sum - 1.0).abs()).max(neg);
        ensure((sum - 1.0).abs() <= 1e-9 && neg <= 1e-9, || format!("case {case}: sum {sum}, min weight {neg}"))?;
        let pg = objective(&vectors, &sol.weights);
        let grid = grid_min(&vectors, dim);
        let gap = (pg - grid).abs();
        worst_gap = worst_gap.max(gap);
        ensure(gap <= 1e-3, || format!("case {case} dim {dim}: optimizer {pg} vs grid {grid}"))?;
    }
    Ok(format!("50 problems, worst |objective gap| {worst_gap:.1e}, simplex residual {worst_simplex:.1e}"))
}

fn random_vectors(r: &mut ChaCha8Rng, n: usize) -> Vec<FeatureVector> {
    let center: Vec<f64> = (0..FEATURE_DIM).map(|_| r.random_range(-10.0..10.0)).collect();
    (0..n)
        .map(|_| {
            let v = center.iter().map(|c| c + r.random_range(-1.0..1.0)).collect();
            FeatureVector::new(MotherWavelet::C12, v).unwrap()
        })
        .collect()
}

fn brute_sum_min(values: &[f64], k: usize) -> f64 {
    let n = values.len();
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| values[i]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

fn brute_robust(training: &[Vec<f64>], floor: f64) -> (Vec<f64>, Vec<f64>) {
    let dim = training[0].len();
    let n = training.len() as f64;
    let mut mean = Vec::new();
    let mut std = Vec::new();
    for d in 0..dim {
        let col: Vec<f64> = training.iter().map(|v| v[d]).collect();
        let m = col.iter().sum::<f64>() / n;
        let s = (col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
        let kept: Vec<f64> = col.iter().copied().filter(|x| (x - m).abs() < 2.0 * s).collect();
        let (m2, s2) = if kept.is_empty() {
            (m, s)
        } else {
            let k = kept.len() as f64;
            let m2 = kept.iter().sum::<f64>() / k;
            (m2, (kept.iter().map(|x| (x - m2).powi(2)).sum::<f64>() / k).sqrt())
        };
        mean.push(m2);
        std.push(s2.max(floor));
    }
    (mean, std)
}

fn brute_det(g: &[f64], i: &[f64]) -> Vec<(f64, f64, f64)> {
    let mut ts: Vec<f64> = g.iter().chain(i).copied().collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut out = vec![(f64::NEG_INFINITY, 0.0, 1.0)];
    for t in ts {
        let fa = i.iter().filter(|&&s| s < t).count() as f64 / i.len() as f64;
        let fr = g.iter().filter(|&&s| s >= t).count() as f64 / g.len() as f64;
        out.push((t, fa, fr));
    }
    out.push((f64::INFINITY, 1.0, 0.0));
    out
}

/// First crossing of the (FMR, FNMR) polyline with the diagonal.
fn brute_eer(points: &[(f64, f64, f64)]) -> f64 {
    for w in points.windows(2) {
        let ((_, x0, y0), (_, x1, y1)) = (w[0], w[1]);
        if x0 == y0 {
            return x0;
        }
        let (d0, d1) = (x0 - y0, x1 - y1);
        if d0 < 0.0 && d1 >= 0.0 {
            let s = d0 / (d0 - d1);
            return x0 + s * (x1 - x0);
        }
    }
    unreachable!()
}

fn summin_hamming_det_eer_oracles() -> Outcome {
    let mut r = rng(5);
    for case in 0..100 {
        let n = r.random_range(1..=10);
        let k = r.random_range(1..=n);
        let values: Vec<f64> = (0..n).map(|_| r.random_range(0.0..100.0)).collect();
        let (a, b) = (sum_min(&values, k), brute_sum_min(&values, k));
        ensure((a - b).abs() <= 1e-12, || format!("sum_min case {case}: {a} vs {b}"))?;

        let count = r.random_range(3..=6);
        let enroll = random_vectors(&mut r, count);
        let cfg = EuclideanConfig { k: r.random_range(1..=enroll.len()), ..EuclideanConfig::default() };
        let tpl = EuclideanTemplate::enroll("u", &enroll, &cfg).map_err(|e| e.to_string())?;
        let probe = &random_vectors(&mut r, 1)[0];
        let dists: Vec<f64> = tpl
            .templates
            .iter()
            .map(|t| {
                (0..FEATURE_DIM)
                    .map(|d| (tpl.weights[d] * (probe.values[d] - t[d]) / tpl.norm_std[d]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let got = tpl.matching_distance(probe).map_err(|e| e.to_string())?.distance;
        let want = brute_sum_min(&dists, tpl.k);
        ensure((got - want).abs() <= 1e-12, || format!("template sum_min case {case}: {got} vs {want}"))?;
    }
    for case in 0..100 {
        let n = r.random_range(3..=8);
        let training = random_vectors(&mut r, n);
        let cfg = HammingConfig { feature_threshold: r.random_range(0.5..3.0), ..HammingConfig::default() };
        let tpl = HammingTemplate::enroll("u", &training, &cfg).map_err(|e| e.to_string())?;
        let raw: Vec<Vec<f64>> = training.iter().map(|f| f.values.clone()).collect();
        let (mean, std) = brute_robust(&raw, cfg.sigma_floor);
        let probe = &random_vectors(&mut r, 1)[0];
        let want = (0..FEATURE_DIM).filter(|&d| ((probe.values[d] - mean[d]) / std[d]).abs() > cfg.feature_threshold).count();
        let got = tpl.hamming_distance(probe).map_err(|e| e.to_string())?.distance;
        ensure(got == want, || format!("hamming case {case}: {got} vs {want}"))?;
    }
    for case in 0..100 {
        let g: Vec<f64> = (0..r.random_range(1..=20)).map(|_| r.random_range(0..12) as f64).collect();
        let i: Vec<f64> = (0..r.random_range(1..=20)).map(|_| r.random_range(4..20) as f64).collect();
        let curve = det_curve(&ScoreSet::new(g.clone(), i.clone())).map_err(|e| e.to_string())?;
        let want = brute_det(&g, &i);
        let got: Vec<(f64, f64, f64)> = curve.points.iter().map(|p| (p.threshold, p.fmr, p.fnmr)).collect();
        ensure(got.len() == want.len(), || format!("det case {case}: {} vs {} points", got.len(), want.len()))?;
        let (ng, ni) = (g.len() as f64, i.len() as f64);
        for (p, q) in got.iter().zip(&want) {
            let counts = |x: &(f64, f64, f64)| ((x.1 * ni).round() as usize, (x.2 * ng).round() as usize);
            ensure(p.0 == q.0 && counts(p) == counts(q), || format!("det case {case}: {p:?} vs {q:?}"))?;
            ensure((p.1 - q.1).abs() <= 1e-12 && (p.2 - q.2).abs() <= 1e-12, || format!("det case {case}: rates"))?;
        }
        let (e, be) = (curve.eer(), brute_eer(&want));
        ensure((e - be).abs() <= 1e-12, || format!("eer case {case}: {e} vs {be}"))?;
    }
    Ok("100 instances each of sum-min, template sum-min, Hamming count, DET curve and EER".into())
}

fn robust_stats_worked_example() -> Outcome {
    let training: Vec<Vec<f64>> = [0.0, 0.0, 0.0, 0.0, 100.0].iter().map(|&v| vec![v]).collect();
    let (mean, std) = robust_stats(&training, SIGMA_FLOOR).map_err(|e| e.to_string())?;
    ensure(mean == [0.0] && std == [SIGMA_FLOOR], || format!("mean {mean:?}, std {std:?}"))?;
    Ok(format!("mean 0, std {SIGMA_FLOOR:e} (floor)"))
}

fn hamming_with_rate(r: &mut ChaCha8Rng, eta: f64) -> Result<(HammingTemplate, FeatureVector), String> {
    let training = random_vectors(r, 8);
    let cfg = HammingConfig { adapt_rate: eta, ..HammingConfig::default() };
    let mut tpl = HammingTemplate::enroll("u", &training, &cfg).map_err(|e| e.to_string())?;
    tpl.distance_threshold = FEATURE_DIM;
    let probe: Vec<f64> =
        tpl.robust_mean.iter().zip(&tpl.robust_std).enumerate().map(|(d, (m, s))| if d % 2 == 0 { m + s } else { m - s }).collect();
    Ok((tpl, FeatureVector::new(MotherWavelet::C12, probe).unwrap()))
}

fn adaptive_update_laws() -> Outcome {
    let mut r = rng(6);
    let (mut tpl, probe) = hamming_with_rate(&mut r, 0.0)?;
    let before = tpl.robust_mean.clone();
    tpl.adaptive_mean_update(&probe).map_err(|e| e.to_string())?;
    ensure(tpl.robust_mean == before, || "eta = 0 moved the mean".into())?;

    let (mut tpl, probe) = hamming_with_rate(&mut r, 1.0)?;
    tpl.adaptive_mean_update(&probe).map_err(|e| e.to_string())?;
    let jump = tpl.robust_mean.iter().zip(&probe.values).map(|(m, p)| (m - p).abs() / p.abs().max(1.0)).fold(0.0, f64::max);
    ensure(jump <= 1e-12, || format!("eta = 1 missed the probe by {jump:e}"))?;

    let (mut tpl, probe) = hamming_with_rate(&mut r, 0.1)?;
    let mut worst: f64 = 0.0;
    for step in 0..30 {
        let prev: Vec<f64> = tpl.robust_mean.iter().zip(&probe.values).map(|(m, p)| p - m).collect();
        tpl.adaptive_mean_update(&probe).map_err(|e| format!("step {step}: {e}"))?;
        for (d, (m, p)) in tpl.robust_mean.iter().zip(&probe.values).enumerate() {
            let factor = (p - m) / prev[d];
            worst = worst.max((factor - 0.9).abs());
            ensure((factor - 0.9).abs() <= 1e-9, || format!("step {step} dim {d}: factor {factor}"))?;
        }
    }

    let enroll = random_vectors(&mut r, 6);
    let mut tpl = EuclideanTemplate::enroll("u", &enroll, &EuclideanConfig::default()).map_err(|e| e.to_string())?;
    tpl.threshold = f64::INFINITY;
    let probe = &random_vectors(&mut r, 1)[0];
    for step in 1..=enroll.len() {
        tpl.adaptive_update(probe).map_err(|e| e.to_string())?;
        let copies = tpl.templates.iter().filter(|t| **t == probe.values).count();
        ensure(tpl.templates.len() == enroll.len(), || format!("template count {}", tpl.templates.len()))?;
        ensure(copies == step, || format!("after {step} updates {copies} copies"))?;
    }
    Ok(format!("eta 0 exact, eta 1 within 1e-12, 30-step contraction within {worst:.1e} of 0.9, 6 copies after 6 updates"))
}

fn run_preset(preset: Preset) -> Result<(Cohort, String, Vec<String>), String> {
    let cfg = SynthConfig { preset, ..SynthConfig::default() };
    let cohort = generate_cohort(42, &cfg).map_err(|e| e.to_string())?.cohort;
    let u = &cohort.users[0];
    ensure(
        cohort.users.len() == 10 && u.day1.len() == 20 && u.day2.len() == 10 && u.forgeries.len() == 20,
        || "cohort shape".into(),
    )?;
    let report = run_protocol(&cohort, &ProtocolConfig::default()).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for m in Method::ALL {
        let row = |day, adaptive| {
            report.row(m, day, adaptive).map(|r| r.eer).ok_or_else(|| format!("missing {m:?} day {day} row"))
        };
        let (d1, d1a, d2, d2a) = (row(1, false)?, row(1, true)?, row(2, false)?, row(2, true)?);
        ensure(d1 <= 0.10 && d1a <= 0.10, || format!("{preset:?} {m:?}: same-day EER {d1} / {d1a}"))?;
        ensure(d2a < d2, || format!("{preset:?} {m:?}: adaptive day-2 EER {d2a} not below {d2}"))?;
        notes.push(format!("{}/{}: d1 {:.3} d2 {:.3}->{:.3}", preset.task().as_str(), m.as_str(), d1, d2, d2a));
    }
    ensure(report.non_adaptive_unchanged, || "non-adaptive pass changed a template".into())?;
    Ok((cohort, report.to_json(), notes))
}

fn end_to_end_synthetic_protocol() -> Outcome {
    let start = Instant::now();
    let (signature, sig_json, mut notes) = run_preset(Preset::SignatureLike)?;
    let (pattern, pat_json, more) = run_preset(Preset::PatternLike)?;
    notes.extend(more);
    let (_, sig_again, _) = run_preset(Preset::SignatureLike)?;
    let (_, pat_again, _) = run_preset(Preset::PatternLike)?;
    ensure(sig_json == sig_again && pat_json == pat_again, || "reports differ across runs".into())?;

    let mut combined = Cohort::default();
    for (tag, c) in [("sig", &signature), ("pat", &pattern)] {
        for u in &c.users {
            let mut u = u.clone();
            u.id = format!("{tag}-{}", u.id);
            combined.users.push(u);
        }
    }
    let cfg = ProtocolConfig::default();
    let report = cohort_complexity(&combined, cfg.enroll_count, &cfg.hamming).map_err(|e| e.to_string())?;
    let sig_high = report.users.iter().filter(|u| u.user_id.starts_with("sig") && u.bucket >= 1).count();
    let pat_low = report.users.iter().filter(|u| u.user_id.starts_with("pat") && u.bucket == 0).count();
    ensure(sig_high >= 8, || format!("{sig_high}/10 signature-like users at delta >= 0.5"))?;
    ensure(pat_low == 10, || format!("{pat_low}/10 pattern-like users at delta < 0.5"))?;

    // Two full runs per preset are timed; one run must fit the budget.
    let per_run = start.elapsed() / 2;
    ensure(per_run < Duration::from_secs(120), || format!("run took {per_run:?}"))?;
    Ok(format!(
        "{}; complexity sig {sig_high}/10 >= 0.5, pat {pat_low}/10 < 0.5; {per_run:.1?} per run, reports byte-identical",
        notes.join("; ")
    ))
}

fn entropy_clamp_and_arithmetic() -> Outcome {
    let log2_10 = 10f64.log2();
    let (s, bits) = symbol_bits(30.0, 1.0);
    ensure((s - 10.0).abs() <= 1e-12 && (bits - log2_10).abs() <= 1e-9, || format!("symbol_bits {s} {bits}"))?;
    ensure(symbol_bits(2.0, 1.0).1 == 0.0, || "S < 1 not clamped".into())?;
    let users = vec![vec![vec![0.0, 5.0], vec![2.0, 5.0]], vec![vec![28.0, 5.0], vec![30.0, 5.0]]];
    let r = entropy_of(&users, &[0, 1]).map_err(|e| e.to_string())?;
    ensure((r.total_bits - log2_10).abs() <= 1e-9, || format!("total {}", r.total_bits))?;
    let constant = r.selected.iter().find(|f| f.index == 1).ok_or("constant feature dropped")?;
    ensure(constant.bits == 0.0, || format!("constant feature {} bits", constant.bits))?;
    Ok(format!("R = 30 sigma gives {:.12} bits, constant feature 0", r.total_bits))
}

fn main() -> ExitCode {
    let checks: [Check; 11] = [
        ("modwt energy identity", modwt_energy_identity),
        ("modwt shift equivariance", modwt_shift_equivariance),
        ("filter tables qmf", filter_tables_qmf),
        ("haar dwt oracle", haar_dwt_oracle),
        ("feature layout and determinism", feature_layout_and_determinism),
        ("weight optimizer vs grid", weight_optimizer_vs_grid),
        ("sum-min / hamming / det / eer oracles", summin_hamming_det_eer_oracles),
        ("robust stats worked example", robust_stats_worked_example),
        ("adaptive update laws", adaptive_update_laws),
        ("end-to-end synthetic protocol", end_to_end_synthetic_protocol),
        ("entropy clamp and arithmetic", entropy_clamp_and_arithmetic),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{:.2?}]", start.elapsed()),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name}: {reason}");
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
