//! Soft-voting ensemble over node embeddings: a random forest, two tree
//! boosters, and a small neural network, mixed with simplex weights chosen
//! by out-of-fold cross-entropy.

mod boosting;
mod config;
mod forest;
mod mlp;
mod tree;
mod weights;

use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

pub use boosting::{train_gradient_boosting, train_regularized_boosting, BoostedTrees};
pub use config::EnsembleConfig;
pub use forest::{train_random_forest, RandomForest};
pub use mlp::{mlp_loss, train_mlp_classifier, MlpClassifier};
pub use tree::{Node, Tree};
pub use weights::{
    cross_entropy, fit_ensemble_weights, simplex_grid, stratified_folds, WeightFit, PROB_FLOOR, TIE_TOLERANCE,
};

use crate::error::{Error, Result};

pub const ENSEMBLE_FORMAT_VERSION: u32 = 1;

/// Class count implied by `labels` (max label + 1), after checking shapes and
/// that at least two classes occur.
pub(crate) fn check_training(x: &Array2<f64>, labels: &[usize]) -> Result<usize> {
    if x.nrows() != labels.len() {
        return Err(Error::invalid(format!(
            "{} rows but {} labels",
            x.nrows(),
            labels.len()
        )));
    }
    if x.ncols() == 0 || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(
            "training features must be finite with at least one column",
        ));
    }
    let first = labels.first().ok_or_else(|| Error::invalid("no training samples"))?;
    if labels.iter().all(|y| y == first) {
        return Err(Error::invalid("training labels contain a single class"));
    }
    Ok(labels.iter().max().expect("non-empty") + 1)
}

pub(crate) fn check_features(x: &Array2<f64>, expected: usize) -> Result<()> {
    if x.ncols() != expected {
        return Err(Error::Shape {
            op: "predict_proba",
            left: x.dim(),
            right: (x.nrows(), expected),
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseClassifier {
    RandomForest(RandomForest),
    GradientBoosting(BoostedTrees),
    RegularizedBoosting(BoostedTrees),
    FeedForwardNet(MlpClassifier),
}

impl BaseClassifier {
    pub fn kind(&self) -> &'static str {
        match self {
            BaseClassifier::RandomForest(_) => "random_forest",
            BaseClassifier::GradientBoosting(_) => "gradient_boosting",
            BaseClassifier::RegularizedBoosting(_) => "regularized_boosting",
            BaseClassifier::FeedForwardNet(_) => "feed_forward_net",
        }
    }

    pub fn class_count(&self) -> usize {
        match self {
            BaseClassifier::RandomForest(m) => m.class_count,
            BaseClassifier::GradientBoosting(m) | BaseClassifier::RegularizedBoosting(m) => m.class_count,
            BaseClassifier::FeedForwardNet(m) => m.class_count,
        }
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        match self {
            BaseClassifier::RandomForest(m) => m.predict_proba(x),
            BaseClassifier::GradientBoosting(m) | BaseClassifier::RegularizedBoosting(m) => m.predict_proba(x),
            BaseClassifier::FeedForwardNet(m) => m.predict_proba(x),
        }
    }

    /// The four members in their fixed order, all fitted on the same rows.
    pub fn train_all(x: &Array2<f64>, labels: &[usize], cfg: &EnsembleConfig) -> Result<Vec<BaseClassifier>> {
        cfg.validate()?;
        Ok(vec![
            BaseClassifier::RandomForest(train_random_forest(x, labels, cfg.rf_trees, cfg.rf_depth, cfg.seed)?),
            BaseClassifier::GradientBoosting(train_gradient_boosting(
                x,
                labels,
                cfg.boost_rounds,
                cfg.boost_learning_rate,
                cfg.boost_depth,
                cfg.seed,
            )?),
            BaseClassifier::RegularizedBoosting(train_regularized_boosting(
                x,
                labels,
                cfg.boost_rounds,
                cfg.boost_learning_rate,
                cfg.boost_depth,
                cfg.l2_leaf,
                cfg.seed,
            )?),
            BaseClassifier::FeedForwardNet(train_mlp_classifier(
                x,
                labels,
                cfg.mlp_hidden,
                cfg.mlp_epochs,
                cfg.mlp_learning_rate,
                cfg.seed,
            )?),
        ])
    }
}

/// Fitted members, their simplex weights, and the out-of-fold search that
/// chose the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub format_version: u32,
    pub classes: Vec<usize>,
    pub config: EnsembleConfig,
    pub weights: Vec<f64>,
    pub members: Vec<BaseClassifier>,
    pub out_of_fold: WeightFit,
}

/// Out-of-fold probabilities of each member under stratified k-fold CV.
pub fn out_of_fold_probs(x: &Array2<f64>, labels: &[usize], cfg: &EnsembleConfig) -> Result<Vec<Array2<f64>>> {
    let c = check_training(x, labels)?;
    let folds = stratified_folds(labels, cfg.cv_folds, cfg.seed)?;
    let mut oof = vec![Array2::zeros((x.nrows(), c)); 4];
    for fold in 0..cfg.cv_folds {
        let (train, held): (Vec<usize>, Vec<usize>) = (0..x.nrows()).partition(|&i| folds[i] != fold);
        let xt = x.select(Axis(0), &train);
        let yt: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        if yt.iter().max() != Some(&(c - 1)) {
            return Err(Error::invalid(format!(
                "fold {fold}: training part misses the highest class"
            )));
        }
        let xh = x.select(Axis(0), &held);
        for (m, member) in BaseClassifier::train_all(&xt, &yt, cfg)?.iter().enumerate() {
            let p = member.predict_proba(&xh)?;
            for (r, &i) in held.iter().enumerate() {
                oof[m].row_mut(i).assign(&p.row(r));
            }
        }
    }
    Ok(oof)
}

/// Cross-validated weight search followed by a refit of every member on all
/// rows.
pub fn fit_ensemble(x: &Array2<f64>, labels: &[usize], cfg: &EnsembleConfig) -> Result<EnsembleModel> {
    let c = check_training(x, labels)?;
    let oof = out_of_fold_probs(x, labels, cfg)?;
    let fit = fit_ensemble_weights(&oof, labels, cfg.grid_step)?;
    let members = BaseClassifier::train_all(x, labels, cfg)?;
    log::info!(
        "ensemble weights {:?}, out-of-fold cross-entropy {:.4} (members {:?})",
        fit.weights,
        fit.cross_entropy,
        fit.member_cross_entropy
    );
    Ok(EnsembleModel {
        format_version: ENSEMBLE_FORMAT_VERSION,
        classes: (0..c).collect(),
        config: cfg.clone(),
        weights: fit.weights.clone(),
        members,
        out_of_fold: fit,
    })
}

/// Weighted sum of the members' probabilities.
pub fn ensemble_predict_proba(model: &EnsembleModel, x: &Array2<f64>) -> Result<Array2<f64>> {
    if model.weights.len() != model.members.len() || model.members.is_empty() {
        return Err(Error::invalid("ensemble weights and members disagree in number"));
    }
    let c = model.classes.len();
    let mut out = Array2::zeros((x.nrows(), c));
    for (w, member) in model.weights.iter().zip(&model.members) {
        let p = member.predict_proba(x)?;
        if p.ncols() != c {
            return Err(Error::Shape {
                op: "ensemble_predict_proba",
                left: p.dim(),
                right: (x.nrows(), c),
            });
        }
        out.scaled_add(*w, &p);
    }
    Ok(out)
}

/// Row-wise argmax; ties go to the lowest class id.
pub fn argmax_rows(p: &Array2<f64>) -> Vec<usize> {
    p.rows()
        .into_iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
                )
                .0
        })
        .collect()
}

impl EnsembleModel {
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        ensemble_predict_proba(self, x)
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.predict_proba(x)?))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: EnsembleModel = serde_json::from_str(text)?;
        if model.format_version != ENSEMBLE_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "ensemble format version {} (expected {ENSEMBLE_FORMAT_VERSION})",
                model.format_version
            )));
        }
        let sum: f64 = model.weights.iter().sum();
        if model.weights.len() != model.members.len()
            || model.weights.iter().any(|&w| w < 0.0)
            || (sum - 1.0).abs() > 1e-12
        {
            return Err(Error::invalid("ensemble weights are not on the simplex"));
        }
        if model.members.iter().any(|m| m.class_count() != model.classes.len()) {
            return Err(Error::invalid("ensemble member class counts disagree"));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
