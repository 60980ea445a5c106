use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{fit_classification_tree, ClassTreeParams, Tree};
use super::{check_features, check_training};
use crate::error::Result;

/// Bagged Gini trees with `floor(sqrt(d))` candidate features per split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub class_count: usize,
    pub feature_count: usize,
    pub trees: Vec<Tree>,
}

pub fn train_random_forest(
    x: &Array2<f64>,
    labels: &[usize],
    n_trees: usize,
    max_depth: usize,
    seed: u64,
) -> Result<RandomForest> {
    let class_count = check_training(x, labels)?;
    let (n, d) = x.dim();
    let params = ClassTreeParams {
        class_count,
        max_depth,
        max_features: Some(((d as f64).sqrt().floor() as usize).max(1)),
        min_samples_split: 2,
    };
    let trees = (0..n_trees)
        .map(|t| {
            // one stream per tree keeps each tree independent of the others' draws
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            fit_classification_tree(x, labels, &rows, &params, &mut rng)
        })
        .collect();
    Ok(RandomForest {
        class_count,
        feature_count: d,
        trees,
    })
}

impl RandomForest {
    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        check_features(x, self.feature_count)?;
        let mut out = Array2::zeros((x.nrows(), self.class_count));
        let scale = 1.0 / self.trees.len() as f64;
        for (row, mut dst) in x.rows().into_iter().zip(out.rows_mut()) {
            for tree in &self.trees {
                for (o, v) in dst.iter_mut().zip(tree.leaf_value(row)) {
                    *o += v;
                }
            }
            dst *= scale;
        }
        Ok(out)
    }
}
