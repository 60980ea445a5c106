use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::tree::{fit_regression_tree, Tree};
use super::{check_features, check_training};
use crate::error::{Error, Result};

/// Additive per-class scores pushed through a softmax. Round `r` holds one
/// regression tree per class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees {
    pub class_count: usize,
    pub feature_count: usize,
    pub learning_rate: f64,
    /// Log class priors.
    pub init: Vec<f64>,
    pub rounds: Vec<Vec<Tree>>,
}

pub(crate) fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let s = row.sum();
        row /= s;
    }
}

#[derive(Clone, Copy)]
enum Step {
    /// Least-squares trees on the residuals `y - p`.
    FirstOrder,
    /// Newton leaves `sum(y - p) / (sum p(1-p) + l2)`.
    Newton { l2: f64 },
}

pub fn train_gradient_boosting(
    x: &Array2<f64>,
    labels: &[usize],
    n_rounds: usize,
    learning_rate: f64,
    depth: usize,
    seed: u64,
) -> Result<BoostedTrees> {
    // fitting is deterministic; the seed is accepted for interface symmetry
    let _ = seed;
    boost(x, labels, n_rounds, learning_rate, depth, Step::FirstOrder)
}

pub fn train_regularized_boosting(
    x: &Array2<f64>,
    labels: &[usize],
    n_rounds: usize,
    learning_rate: f64,
    depth: usize,
    l2_leaf: f64,
    seed: u64,
) -> Result<BoostedTrees> {
    let _ = seed;
    if !(l2_leaf >= 0.0) {
        return Err(Error::invalid(format!("l2_leaf must be non-negative, got {l2_leaf}")));
    }
    boost(x, labels, n_rounds, learning_rate, depth, Step::Newton { l2: l2_leaf })
}

fn boost(
    x: &Array2<f64>,
    labels: &[usize],
    n_rounds: usize,
    learning_rate: f64,
    depth: usize,
    step: Step,
) -> Result<BoostedTrees> {
    let c = check_training(x, labels)?;
    if !(learning_rate > 0.0) {
        return Err(Error::invalid(format!(
            "learning rate must be positive, got {learning_rate}"
        )));
    }
    let n = x.nrows();
    let mut counts = vec![0usize; c];
    for &y in labels {
        counts[y] += 1;
    }
    let init: Vec<f64> = counts.iter().map(|&k| (k as f64 / n as f64).max(1e-12).ln()).collect();
    let mut model = BoostedTrees {
        class_count: c,
        feature_count: x.ncols(),
        learning_rate,
        init,
        rounds: Vec::with_capacity(n_rounds),
    };
    let rows: Vec<usize> = (0..n).collect();
    let mut scores = Array2::from_shape_fn((n, c), |(_, k)| model.init[k]);
    for _ in 0..n_rounds {
        let mut p = scores.clone();
        softmax_rows(&mut p);
        let mut round = Vec::with_capacity(c);
        for k in 0..c {
            let g: Vec<f64> = (0..n).map(|i| f64::from(labels[i] == k) - p[[i, k]]).collect();
            let tree = match step {
                Step::FirstOrder => fit_regression_tree(x, &g, &vec![1.0; n], &rows, depth, 0.0),
                Step::Newton { l2 } => {
                    let h: Vec<f64> = (0..n).map(|i| p[[i, k]] * (1.0 - p[[i, k]])).collect();
                    fit_regression_tree(x, &g, &h, &rows, depth, l2)
                }
            };
            for (i, row) in x.rows().into_iter().enumerate() {
                scores[[i, k]] += learning_rate * tree.leaf_value(row)[0];
            }
            round.push(tree);
        }
        model.rounds.push(round);
    }
    Ok(model)
}

impl BoostedTrees {
    pub fn decision_scores(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        check_features(x, self.feature_count)?;
        let mut scores = Array2::from_shape_fn((x.nrows(), self.class_count), |(_, k)| self.init[k]);
        for (row, mut dst) in x.rows().into_iter().zip(scores.rows_mut()) {
            for round in &self.rounds {
                for (k, tree) in round.iter().enumerate() {
                    dst[k] += self.learning_rate * tree.leaf_value(row)[0];
                }
            }
        }
        Ok(scores)
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let mut p = self.decision_scores(x)?;
        softmax_rows(&mut p);
        Ok(p)
    }

    /// Mean negative log-likelihood of `labels` after each round, starting
    /// from the prior (round 0).
    pub fn staged_log_loss(&self, x: &Array2<f64>, labels: &[usize]) -> Result<Vec<f64>> {
        check_features(x, self.feature_count)?;
        let n = x.nrows();
        let mut scores = Array2::from_shape_fn((n, self.class_count), |(_, k)| self.init[k]);
        let loss = |s: &Array2<f64>| {
            let mut p = s.clone();
            softmax_rows(&mut p);
            -p.axis_iter(Axis(0))
                .zip(labels)
                .map(|(r, &y)| r[y].max(1e-12).ln())
                .sum::<f64>()
                / n as f64
        };
        let mut out = vec![loss(&scores)];
        for round in &self.rounds {
            for (i, row) in x.rows().into_iter().enumerate() {
                for (k, tree) in round.iter().enumerate() {
                    scores[[i, k]] += self.learning_rate * tree.leaf_value(row)[0];
                }
            }
            out.push(loss(&scores));
        }
        Ok(out)
    }
}
