use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::GaeConfig;
use super::model::{attention_row_error, standard_normal, ForwardVars, Gae};
use crate::autodiff::{AdamConfig, AdamState, Matrix, Tape};
use crate::error::{Error, Result};
use crate::graph::FaultGraph;

/// Node indices of the three evaluation sets, each sorted ascending.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Split nodes class by class. Each class contributes
/// `round(train_fraction * n_c)` training nodes and `round(val_fraction * n_c)`
/// validation nodes; the rest go to test. A class that would get no training
/// nodes is an error.
pub fn stratified_split(labels: &[usize], config: &GaeConfig, seed: u64) -> Result<NodeSplit> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = NodeSplit::default();
    for (class, mut nodes) in by_class {
        nodes.shuffle(&mut rng);
        let n = nodes.len() as f64;
        let n_train = ((config.train_fraction * n).round() as usize).min(nodes.len());
        if n_train == 0 {
            return Err(Error::invalid(format!(
                "class {class} is absent from the training split"
            )));
        }
        let n_val = ((config.val_fraction * n).round() as usize).min(nodes.len() - n_train);
        split.train.extend_from_slice(&nodes[..n_train]);
        split.val.extend_from_slice(&nodes[n_train..n_train + n_val]);
        split.test.extend_from_slice(&nodes[n_train + n_val..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Per-epoch training diagnostics. Reconstruction losses are measured on
/// the forward pass that precedes each epoch's update; an empty evaluation
/// set records NaN.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCurves {
    pub train_rec: Vec<f64>,
    pub val_rec: Vec<f64>,
    pub test_rec: Vec<f64>,
    pub train_kl: Vec<f64>,
    /// Largest deviation of any attention row sum from 1, over all layers and heads.
    pub attention_error: Vec<f64>,
}

impl LossCurves {
    pub fn len(&self) -> usize {
        self.train_rec.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_rec.is_empty()
    }

    /// CSV with columns `epoch,train_rec,val_rec,test_rec`, epochs from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_rec,val_rec,test_rec\n");
        for e in 0..self.len() {
            writeln!(
                out,
                "{},{:?},{:?},{:?}",
                e + 1,
                self.train_rec[e],
                self.val_rec[e],
                self.test_rec[e]
            )
            .expect("string write");
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TrainedGae {
    pub model: Gae,
    pub curves: LossCurves,
    pub split: NodeSplit,
}

fn rec_loss(x: &Matrix, x_hat: &Matrix, rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return f64::NAN;
    }
    let total: f64 = rows
        .iter()
        .map(|&i| {
            x.index_axis(Axis(0), i)
                .iter()
                .zip(x_hat.index_axis(Axis(0), i))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum();
    total / rows.len() as f64
}

/// Full-graph training with Adam; the loss only sees training nodes.
pub fn train(graph: &FaultGraph, config: &GaeConfig) -> Result<TrainedGae> {
    config.validate()?;
    let m = graph.node_count();
    if m < 10 {
        return Err(Error::invalid(format!(
            "graph has {m} nodes, training needs at least 10"
        )));
    }
    let mut model = Gae::new(config.clone())?;
    if graph.features.ncols() != config.input_dim {
        return Err(Error::invalid(format!(
            "graph has {} features per node, config expects {}",
            graph.features.ncols(),
            config.input_dim
        )));
    }
    let split = stratified_split(&graph.labels, config, config.seed.wrapping_add(1))?;
    let nb = graph.neighborhoods();
    let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(2));
    let mut adam = AdamState::new(model.params(), AdamConfig::with_learning_rate(config.learning_rate));
    let mut curves = LossCurves::default();
    let x_value = graph.features.clone();

    for epoch in 0..config.epochs {
        let tape = Tape::new();
        let bound = model.params().bind(&tape);
        let x = tape.constant(x_value.clone());
        let eps = tape.constant(standard_normal((m, config.latent_dim), &mut noise_rng));
        let ForwardVars {
            encoder: enc,
            x_hat,
            loss,
        } = model.forward_loss(&bound, x, &nb, eps, &split.train)?;

        let x_hat_value = x_hat.value().clone();
        curves.train_rec.push(loss.reconstruction.item());
        curves.val_rec.push(rec_loss(&x_value, &x_hat_value, &split.val));
        curves.test_rec.push(rec_loss(&x_value, &x_hat_value, &split.test));
        curves.train_kl.push(loss.kl.item());
        curves.attention_error.push(
            enc.attention
                .iter()
                .map(|a| attention_row_error(&a.value(), &nb))
                .fold(0.0, f64::max),
        );

        let grads = tape.backward(loss.total)?;
        model.params_mut().accumulate(&grads, &bound)?;
        adam.step(model.params_mut())?;
        log::debug!(
            "epoch {}: train_rec {:.6} kl {:.6}",
            epoch + 1,
            curves.train_rec[epoch],
            curves.train_kl[epoch]
        );
    }
    Ok(TrainedGae { model, curves, split })
}
