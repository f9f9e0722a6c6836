use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::features::{FeatureVector, FEATURES_PER_CHANNEL};

/// Features with a larger mean absolute correlation to the others are dropped.
pub const CORRELATION_CUTOFF: f64 = 0.3;

/// Position and force features: channels x, y, f are the first three blocks.
pub fn position_force_indices() -> Vec<usize> {
    (0..3 * FEATURES_PER_CHANNEL).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntropy {
    pub index: usize,
    pub range: f64,
    pub sigma_max: f64,
    pub symbols: f64,
    pub bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub candidates: usize,
    pub selected: Vec<FeatureEntropy>,
    pub total_bits: f64,
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

fn population_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
}

/// `log2(R / (3 sigma_max))`, clamped at 0 bits. A zero `sigma_max` is floored.
pub fn symbol_bits(range: f64, sigma_max: f64) -> (f64, f64) {
    if range <= 0.0 {
        return (0.0, 0.0);
    }
    let s = range / (3.0 * sigma_max.max(crate::matcher::SIGMA_FLOOR));
    (s, if s > 1.0 { s.log2() } else { 0.0 })
}

/// Entropy over the given candidate columns of per-user raw vectors.
pub fn entropy_of(users: &[Vec<Vec<f64>>], candidates: &[usize]) -> Result<EntropyReport, AnalysisError> {
    if users.len() < 2 || users.iter().any(|u| u.len() < 2) {
        return Err(AnalysisError::TooSmallCohort);
    }
    let column = |i: usize| -> Vec<f64> { users.iter().flatten().map(|v| v[i]).collect() };
    let columns: Vec<Vec<f64>> = candidates.iter().map(|&i| column(i)).collect();
    let ranges: Vec<f64> = columns
        .iter()
        .map(|c| {
            let max = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = c.iter().copied().fold(f64::INFINITY, f64::min);
            max - min
        })
        .collect();
    if ranges.iter().all(|&r| r == 0.0) {
        return Err(AnalysisError::Degenerate);
    }

    let m = candidates.len();
    let mut keep = vec![true; m];
    if m > 1 {
        for i in 0..m {
            let total: f64 =
                (0..m).filter(|&j| j != i).map(|j| pearson(&columns[i], &columns[j]).abs()).sum();
            keep[i] = total / (m - 1) as f64 <= CORRELATION_CUTOFF;
        }
    }

    let mut selected = Vec::new();
    for (slot, &index) in candidates.iter().enumerate().filter(|&(s, _)| keep[s]) {
        let sigma_max = users
            .iter()
            .map(|u| population_std(&u.iter().map(|v| v[index]).collect::<Vec<_>>()))
            .fold(0.0, f64::max);
        let (symbols, bits) = symbol_bits(ranges[slot], sigma_max);
        selected.push(FeatureEntropy { index, range: ranges[slot], sigma_max, symbols, bits });
    }
    let total_bits = selected.iter().map(|f| f.bits).sum();
    Ok(EntropyReport { candidates: m, selected, total_bits })
}

/// Cohort password entropy over the position and force features.
pub fn password_entropy(cohort: &[Vec<FeatureVector>]) -> Result<EntropyReport, AnalysisError> {
    let users: Vec<Vec<Vec<f64>>> =
        cohort.iter().map(|u| u.iter().map(|f| f.values.clone()).collect()).collect();
    entropy_of(&users, &position_force_indices())
}
