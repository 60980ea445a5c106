use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are clipped to `[1e-12, 1]` before the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Grid points whose cross-entropy is within this of the minimum count as
/// tied; summation order alone moves the loss by a few ulps.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Mean negative log-probability of the true class.
pub fn cross_entropy(probs: &Array2<f64>, labels: &[usize]) -> Result<f64> {
    if probs.nrows() != labels.len() || labels.is_empty() {
        return Err(Error::invalid(format!(
            "{} probability rows for {} labels",
            probs.nrows(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (row, &y) in probs.rows().into_iter().zip(labels) {
        if y >= probs.ncols() {
            return Err(Error::invalid(format!("label {y} outside {} classes", probs.ncols())));
        }
        total -= row[y].clamp(PROB_FLOOR, 1.0).ln();
    }
    Ok(total / labels.len() as f64)
}

/// Fold index per sample. Each class is shuffled and dealt round-robin, so
/// every fold holds every class; a class with fewer members than folds is an
/// error.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {folds}")));
    }
    let c = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0; labels.len()];
    for class in 0..c {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < folds {
            return Err(Error::invalid(format!(
                "class {class} has {} samples, so some of the {folds} folds would miss it",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for (k, i) in members.into_iter().enumerate() {
            out[i] = k % folds;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFit {
    pub weights: Vec<f64>,
    pub cross_entropy: f64,
    /// Cross-entropy of each member alone, i.e. at each simplex corner.
    pub member_cross_entropy: Vec<f64>,
}

/// All weight vectors `k / steps` with non-negative integer `k` summing to
/// `steps`, in lexicographic order.
pub fn simplex_grid(members: usize, steps: usize) -> Vec<Vec<usize>> {
    fn go(left: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            go(left - k, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if members > 0 {
        go(steps, members, &mut Vec::new(), &mut out);
    }
    out
}

fn entropy(w: &[f64]) -> f64 {
    -w.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// Exhaustive search over the simplex grid for the mixture with the lowest
/// cross-entropy. Among tied points the one with the highest weight entropy
/// wins, then the first in lexicographic order.
pub fn fit_ensemble_weights(base_probs: &[Array2<f64>], labels: &[usize], grid_step: f64) -> Result<WeightFit> {
    let m = base_probs.len();
    if m == 0 {
        return Err(Error::invalid("no base classifiers"));
    }
    let shape = base_probs[0].dim();
    if base_probs.iter().any(|p| p.dim() != shape) || shape.0 != labels.len() || labels.is_empty() {
        return Err(Error::invalid(
            "base probabilities must share one n x C shape matching the labels",
        ));
    }
    let steps = (1.0 / grid_step).round();
    if !(grid_step > 0.0) || (steps * grid_step - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("grid step {grid_step} must divide 1 evenly")));
    }
    let steps = steps as usize;
    if let Some(&y) = labels.iter().find(|&&y| y >= shape.1) {
        return Err(Error::invalid(format!("label {y} outside {} classes", shape.1)));
    }
    // only the true-class column matters
    let truth: Vec<Vec<f64>> = base_probs
        .iter()
        .map(|p| labels.iter().enumerate().map(|(i, &y)| p[[i, y]]).collect())
        .collect();
    let score = |w: &[f64]| -> f64 {
        let total: f64 = (0..labels.len())
            .map(|i| {
                let p: f64 = w.iter().zip(&truth).map(|(wk, t)| wk * t[i]).sum();
                -p.clamp(PROB_FLOOR, 1.0).ln()
            })
            .sum();
        total / labels.len() as f64
    };
    let grid: Vec<Vec<f64>> = simplex_grid(m, steps)
        .into_iter()
        .map(|k| k.into_iter().map(|v| v as f64 / steps as f64).collect())
        .collect();
    let losses: Vec<f64> = grid.iter().map(|w| score(w)).collect();
    let best = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let mut pick = None;
    for (i, (w, &loss)) in grid.iter().zip(&losses).enumerate() {
        if loss <= best + TIE_TOLERANCE && pick.is_none_or(|(_, h)| entropy(w) > h + TIE_TOLERANCE) {
            pick = Some((i, entropy(w)));
        }
    }
    let (i, _) = pick.expect("grid is non-empty");
    let member_cross_entropy = (0..m)
        .map(|k| {
            let mut corner = vec![0.0; m];
            corner[k] = 1.0;
            score(&corner)
        })
        .collect();
    Ok(WeightFit {
        weights: grid[i].clone(),
        cross_entropy: losses[i],
        member_cross_entropy,
    })
}
