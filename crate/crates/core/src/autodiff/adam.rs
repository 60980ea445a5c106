use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::tape::Matrix;
use super::tensor::ParamSet;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..Default::default()
        }
    }
}

/// Bias-corrected adaptive-moment optimizer state.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        let zeros: Vec<Matrix> = params.iter().map(|(_, t)| Array2::zeros(t.shape())).collect();
        AdamState {
            config,
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one update using the gradients stored on `params`, then clear them.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        if params.len() != self.first.len() {
            return Err(Error::invalid(format!(
                "optimizer tracks {} parameters, got {}",
                self.first.len(),
                params.len()
            )));
        }
        for id in params.ids() {
            let t = params.get(id);
            if t.requires_grad && t.grad.is_none() {
                return Err(Error::invalid(format!("parameter {} has no gradient", params.name(id))));
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for ((t, m), v) in params
            .tensors_mut()
            .iter_mut()
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            let Some(g) = t.grad.take() else { continue };
            Zip::from(&mut t.value).and(m).and(v).and(&g).for_each(|w, m, v, &g| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use ndarray::array;

    fn quadratic_step(ps: &mut ParamSet, adam: &mut AdamState, target: f64) {
        let tape = Tape::new();
        let vars = ps.bind(&tape);
        let t = tape.scalar(target);
        let loss = vars[0].sub(&t).unwrap().square().sum();
        let grads = tape.backward(loss).unwrap();
        ps.accumulate(&grads, &vars).unwrap();
        adam.step(ps).unwrap();
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut ps = ParamSet::new();
        let id = ps.insert("x", array![[1.5, -2.0]]);
        let mut adam = AdamState::new(&ps, AdamConfig::default());
        ps.get_mut(id).grad = Some(Array2::zeros((1, 2)));
        adam.step(&mut ps).unwrap();
        assert_eq!(ps.get(id).value, array![[1.5, -2.0]]);
        assert_eq!(adam.step_count(), 1);
        assert!(ps.get(id).grad.is_none());
    }

    #[test]
    fn one_step_descends() {
        let mut ps = ParamSet::new();
        let id = ps.insert("x", array![[1.0]]);
        let mut adam = AdamState::new(&ps, AdamConfig::with_learning_rate(0.1));
        quadratic_step(&mut ps, &mut adam, 0.0);
        let x = ps.get(id).value[[0, 0]];
        assert!(0.0 < x && x < 1.0, "x = {x}");
    }

    #[test]
    fn converges_on_shifted_quadratic() {
        let mut ps = ParamSet::new();
        let id = ps.insert("x", array![[0.0]]);
        let mut adam = AdamState::new(&ps, AdamConfig::with_learning_rate(0.1));
        for _ in 0..500 {
            quadratic_step(&mut ps, &mut adam, 2.0);
        }
        let x = ps.get(id).value[[0, 0]];
        assert!((x - 2.0).abs() < 1e-3, "x = {x}");
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let mut ps = ParamSet::new();
        ps.insert("x", array![[0.0]]);
        let mut adam = AdamState::new(&ps, AdamConfig::default());
        assert!(adam.step(&mut ps).is_err());
    }
}
