use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::boosting::softmax_rows;
use super::{check_features, check_training};
use crate::autodiff::{AdamConfig, AdamState, Matrix, ParamSet, StoredMatrix, Tape, Var};
use crate::error::{Error, Result};

/// One hidden ReLU layer and a softmax output. Inputs are standardized with
/// the training mean and standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpClassifier {
    pub class_count: usize,
    pub feature_count: usize,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub hidden_weight: StoredMatrix,
    pub hidden_bias: StoredMatrix,
    pub output_weight: StoredMatrix,
    pub output_bias: StoredMatrix,
}

/// Mean cross-entropy of softmax(relu(x w1 + b1) w2 + b2) against one-hot
/// targets. `params` is `[w1, b1, w2, b2]`.
pub fn mlp_loss<'t>(x: &Var<'t>, params: &[Var<'t>], onehot: &Var<'t>) -> Result<Var<'t>> {
    let logits = forward(x, params)?;
    let n = x.shape().0 as f64;
    Ok(logits.row_log_softmax().mul(onehot)?.sum().scale(-1.0 / n))
}

fn forward<'t>(x: &Var<'t>, params: &[Var<'t>]) -> Result<Var<'t>> {
    let h = x.matmul(&params[0])?.add(&params[1])?.relu();
    h.matmul(&params[2])?.add(&params[3])
}

fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut ChaCha8Rng) -> Matrix {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
}

pub fn train_mlp_classifier(
    x: &Array2<f64>,
    labels: &[usize],
    hidden: usize,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<MlpClassifier> {
    let c = check_training(x, labels)?;
    if hidden == 0 || !(learning_rate > 0.0) {
        return Err(Error::invalid("MLP needs a positive hidden width and learning rate"));
    }
    let (n, d) = x.dim();
    let mean: Vec<f64> = x.mean_axis(Axis(0)).expect("non-empty").to_vec();
    let scale: Vec<f64> = x
        .std_axis(Axis(0), 0.0)
        .iter()
        .map(|&s| if s > 1e-12 { s } else { 1.0 })
        .collect();
    let xs = standardize(x, &mean, &scale);
    let onehot = Array2::from_shape_fn((n, c), |(i, k)| f64::from(labels[i] == k));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamSet::new();
    params.insert(
        "hidden.weight",
        uniform(d, hidden, (6.0 / (d + hidden) as f64).sqrt(), &mut rng),
    );
    params.insert("hidden.bias", Array2::zeros((1, hidden)));
    // small output weights start the classifier near uniform
    params.insert("output.weight", uniform(hidden, c, 0.01, &mut rng));
    params.insert("output.bias", Array2::zeros((1, c)));
    let mut adam = AdamState::new(&params, AdamConfig::with_learning_rate(learning_rate));
    for _ in 0..epochs {
        let tape = Tape::new();
        let bound = params.bind(&tape);
        let loss = mlp_loss(&tape.constant(xs.clone()), &bound, &tape.constant(onehot.clone()))?;
        let grads = tape.backward(loss)?;
        params.accumulate(&grads, &bound)?;
        adam.step(&mut params)?;
    }
    let stored: Vec<StoredMatrix> = params
        .iter()
        .map(|(_, t)| StoredMatrix::from_matrix(&t.value))
        .collect();
    let [w1, b1, w2, b2]: [StoredMatrix; 4] = stored.try_into().expect("four parameters");
    Ok(MlpClassifier {
        class_count: c,
        feature_count: d,
        mean,
        scale,
        hidden_weight: w1,
        hidden_bias: b1,
        output_weight: w2,
        output_bias: b2,
    })
}

fn standardize(x: &Array2<f64>, mean: &[f64], scale: &[f64]) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        for ((v, m), s) in row.iter_mut().zip(mean).zip(scale) {
            *v = (*v - m) / s;
        }
    }
    out
}

impl MlpClassifier {
    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        check_features(x, self.feature_count)?;
        let xs = standardize(x, &self.mean, &self.scale);
        let h = (xs.dot(&self.hidden_weight.to_matrix()?) + &self.hidden_bias.to_matrix()?).mapv(|v| v.max(0.0));
        let mut p = h.dot(&self.output_weight.to_matrix()?) + &self.output_bias.to_matrix()?;
        softmax_rows(&mut p);
        Ok(p)
    }
}
