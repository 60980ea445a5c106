use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::tape::{Gradients, Matrix, Tape, Var};
use crate::error::{Error, Result};

/// A dense matrix with an optional gradient buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub value: Matrix,
    pub requires_grad: bool,
    pub grad: Option<Matrix>,
}

impl Tensor {
    pub fn new(value: Matrix, requires_grad: bool) -> Self {
        Tensor {
            value,
            requires_grad,
            grad: None,
        }
    }

    pub fn param(value: Matrix) -> Self {
        Self::new(value, true)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.dim()
    }

    fn accumulate_grad(&mut self, g: &Matrix) -> Result<()> {
        if g.dim() != self.value.dim() {
            return Err(Error::Shape {
                op: "accumulate_grad",
                left: self.value.dim(),
                right: g.dim(),
            });
        }
        match &mut self.grad {
            Some(acc) => *acc += g,
            None => self.grad = Some(g.clone()),
        }
        Ok(())
    }
}

/// Named, ordered collection of trainable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

/// Index of a parameter inside a [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        let name = name.into();
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.tensors.push(Tensor::param(value));
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter())
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    /// Record every parameter as a leaf on `tape`.
    pub fn bind<'t>(&self, tape: &'t Tape) -> Vec<Var<'t>> {
        self.tensors
            .iter()
            .map(|t| tape.leaf(t.value.clone(), t.requires_grad))
            .collect()
    }

    /// Add the gradients of bound leaves into each tensor's grad buffer.
    pub fn accumulate(&mut self, grads: &Gradients, bound: &[Var<'_>]) -> Result<()> {
        for (tensor, var) in self.tensors.iter_mut().zip(bound) {
            if !tensor.requires_grad {
                continue;
            }
            match grads.get(*var) {
                Some(g) => tensor.accumulate_grad(g)?,
                None => tensor.accumulate_grad(&Array2::zeros(tensor.shape()))?,
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for t in &mut self.tensors {
            t.grad = None;
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let params = self
            .iter()
            .map(|(name, t)| {
                (
                    name.to_string(),
                    StoredMatrix {
                        shape: [t.value.nrows(), t.value.ncols()],
                        data: t.value.iter().copied().collect(),
                    },
                )
            })
            .collect();
        Checkpoint { params }
    }

    /// Overwrite values from a checkpoint. Every parameter must be present
    /// with a matching shape.
    pub fn load_checkpoint(&mut self, ckpt: &Checkpoint) -> Result<()> {
        for (name, tensor) in self.names.iter().zip(self.tensors.iter_mut()) {
            let stored = ckpt
                .params
                .get(name)
                .ok_or_else(|| Error::invalid(format!("checkpoint is missing parameter {name}")))?;
            let m = stored.to_matrix()?;
            if m.dim() != tensor.shape() {
                return Err(Error::Shape {
                    op: "load_checkpoint",
                    left: tensor.shape(),
                    right: m.dim(),
                });
            }
            tensor.value = m;
            tensor.grad = None;
        }
        Ok(())
    }
}

/// Row-major matrix as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredMatrix {
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

impl StoredMatrix {
    pub fn from_matrix(m: &Matrix) -> Self {
        StoredMatrix {
            shape: [m.nrows(), m.ncols()],
            data: m.iter().copied().collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        Array2::from_shape_vec((self.shape[0], self.shape[1]), self.data.clone())
            .map_err(|e| Error::invalid(format!("stored matrix: {e}")))
    }
}

/// Parameter checkpoint: `{name -> {shape, data}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub params: BTreeMap<String, StoredMatrix>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let mut ps = ParamSet::new();
        ps.insert("w", array![[0.1, 1.0 / 3.0], [-2.5e-17, 7.0]]);
        ps.insert("a", array![[std::f64::consts::PI]]);
        let json = serde_json::to_string(&ps.to_checkpoint()).unwrap();
        let back: Checkpoint = serde_json::from_str(&json).unwrap();

        let mut fresh = ParamSet::new();
        fresh.insert("w", Array2::zeros((2, 2)));
        fresh.insert("a", Array2::zeros((1, 1)));
        fresh.load_checkpoint(&back).unwrap();
        assert_eq!(fresh, ps);
    }

    #[test]
    fn checkpoint_shape_mismatch_is_rejected() {
        let mut ps = ParamSet::new();
        ps.insert("w", Array2::zeros((2, 2)));
        let mut other = ParamSet::new();
        other.insert("w", Array2::zeros((3, 2)));
        assert!(other.load_checkpoint(&ps.to_checkpoint()).is_err());
    }
}
