//! Per-user dimension weighting: minimise the summed pairwise weighted
//! Euclidean distance of the enrollment set over the probability simplex.

use super::MatchError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightOptions {
    /// Stop once one accepted step improves the objective by less than this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Optional lower bound applied after convergence, followed by renormalisation.
    pub weight_floor: f64,
}

impl Default for WeightOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: 5000, weight_floor: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSolution {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Objective after every accepted iterate, starting with the uniform start.
    pub history: Vec<f64>,
}

/// Euclidean projection onto `{w : w >= 0, sum w = 1}` (sort-and-threshold).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumulative += ui;
        let t = (cumulative - 1.0) / (i as f64 + 1.0);
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&vi| (vi - theta).max(0.0)).collect()
}

/// Squared coordinate differences of every unordered pair of vectors.
pub fn pair_squares(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(vectors.len() * vectors.len().saturating_sub(1) / 2);
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            out.push(vectors[i].iter().zip(&vectors[j]).map(|(a, b)| (a - b) * (a - b)).collect());
        }
    }
    out
}

/// `sum_pairs || w * delta ||` given squared pair differences.
pub fn pairwise_objective(pairs: &[Vec<f64>], w: &[f64]) -> f64 {
    pairs
        .iter()
        .map(|q| q.iter().zip(w).map(|(q, w)| w * w * q).sum::<f64>().sqrt())
        .sum()
}

fn gradient(pairs: &[Vec<f64>], w: &[f64], grad: &mut [f64]) {
    grad.iter_mut().for_each(|g| *g = 0.0);
    for q in pairs {
        let norm = q.iter().zip(w).map(|(q, w)| w * w * q).sum::<f64>().sqrt();
        // Non-differentiable at a zero pair distance; take the zero subgradient.
        if norm == 0.0 {
            continue;
        }
        for ((g, q), w) in grad.iter_mut().zip(q).zip(w) {
            *g += w * q / norm;
        }
    }
}

/// Projected gradient descent with backtracking from the uniform weighting.
pub fn optimize_weights(
    vectors: &[Vec<f64>],
    options: &WeightOptions,
) -> Result<WeightSolution, MatchError> {
    if vectors.len() < 2 {
        return Err(MatchError::TooFewVectors { needed: 2, got: vectors.len() });
    }
    let dim = vectors[0].len();
    if dim == 0 || vectors.iter().any(|v| v.len() != dim) {
        return Err(MatchError::DimensionMismatch);
    }
    if vectors.iter().flatten().any(|v| !v.is_finite()) {
        return Err(MatchError::NonFinite);
    }
    optimize_pair_weights(&pair_squares(vectors), options)
}

/// Same optimiser, driven directly by squared pair differences.
pub fn optimize_pair_weights(
    pairs: &[Vec<f64>],
    options: &WeightOptions,
) -> Result<WeightSolution, MatchError> {
    let dim = pairs.first().map(Vec::len).ok_or(MatchError::TooFewVectors { needed: 2, got: 0 })?;
    if dim == 0 || pairs.iter().any(|q| q.len() != dim) {
        return Err(MatchError::DimensionMismatch);
    }
    if pairs.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(MatchError::NonFinite);
    }
    let mut w = vec![1.0 / dim as f64; dim];
    let mut obj = pairwise_objective(pairs, &w);
    let mut history = vec![obj];
    let mut grad = vec![0.0; dim];
    let mut step = 1.0;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        iterations += 1;
        gradient(pairs, &w, &mut grad);
        let mut accepted = None;
        // Armijo backtracking along the projection arc.
        for _ in 0..60 {
            let trial: Vec<f64> = w.iter().zip(&grad).map(|(w, g)| w - step * g).collect();
            let cand = project_simplex(&trial);
            let decrease: f64 = grad.iter().zip(&cand).zip(&w).map(|((g, c), w)| g * (c - w)).sum();
            let dist2: f64 = cand.iter().zip(&w).map(|(c, w)| (c - w) * (c - w)).sum();
            let cand_obj = pairwise_objective(pairs, &cand);
            if cand_obj <= obj + decrease + dist2 / (2.0 * step) && cand_obj <= obj {
                accepted = Some((cand, cand_obj));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, cand_obj)) = accepted else { break };
        let improvement = obj - cand_obj;
        w = cand;
        obj = cand_obj;
        history.push(obj);
        if improvement < options.tolerance {
            break;
        }
        step *= 2.0;
    }
    if options.weight_floor > 0.0 {
        w.iter_mut().for_each(|v| *v = v.max(options.weight_floor));
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        obj = pairwise_objective(pairs, &w);
    }
    Ok(WeightSolution { weights: w, objective: obj, iterations, history })
}
