use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of the four base classifiers and the weight search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub rf_trees: usize,
    pub rf_depth: usize,
    pub boost_rounds: usize,
    pub boost_learning_rate: f64,
    pub boost_depth: usize,
    pub l2_leaf: f64,
    pub mlp_hidden: usize,
    pub mlp_epochs: usize,
    pub mlp_learning_rate: f64,
    pub cv_folds: usize,
    pub grid_step: f64,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            rf_trees: 100,
            rf_depth: 8,
            boost_rounds: 100,
            boost_learning_rate: 0.1,
            boost_depth: 3,
            l2_leaf: 1.0,
            mlp_hidden: 32,
            mlp_epochs: 200,
            mlp_learning_rate: 0.01,
            cv_folds: 5,
            grid_step: 0.05,
            seed: 0,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rf_trees == 0 || self.mlp_hidden == 0 {
            return Err(Error::invalid("rf_trees and mlp_hidden must be positive"));
        }
        if !(self.boost_learning_rate > 0.0 && self.mlp_learning_rate > 0.0) {
            return Err(Error::invalid("learning rates must be positive"));
        }
        if !(self.l2_leaf >= 0.0) {
            return Err(Error::invalid("l2_leaf must be non-negative"));
        }
        if self.cv_folds < 2 {
            return Err(Error::invalid("cv_folds must be at least 2"));
        }
        let steps = 1.0 / self.grid_step;
        if !(self.grid_step > 0.0 && self.grid_step <= 1.0) || (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "grid_step {} must divide 1 evenly",
                self.grid_step
            )));
        }
        Ok(())
    }
}
