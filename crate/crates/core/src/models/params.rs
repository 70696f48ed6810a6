use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Named parameter tensors in registration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl ParamStore {
    pub(crate) fn new() -> Self {
        Self { names: Vec::new(), values: Vec::new() }
    }

    pub(crate) fn push(&mut self, name: String, value: Matrix) -> usize {
        self.names.push(name);
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Matrix] {
        &mut self.values
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.names.iter().position(|n| n == name).map(|i| &self.values[i])
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.values.iter().map(Matrix::shape).collect()
    }

    pub fn count(&self) -> usize {
        self.values.iter().map(|m| m.as_slice().len()).sum()
    }

    /// Replaces every tensor, keeping names; shapes must agree.
    pub fn set_values(&mut self, values: Vec<Matrix>) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::LengthMismatch { expected: self.values.len(), got: values.len() });
        }
        for (name, (old, new)) in self.names.iter().zip(self.values.iter().zip(&values)) {
            if old.shape() != new.shape() {
                return Err(Error::ShapeMismatch {
                    op: "set_values",
                    detail: format!("{name}: {:?} vs {:?}", old.shape(), new.shape()),
                });
            }
        }
        self.values = values;
        Ok(())
    }

    /// Registers every tensor on `tape`, as parameters or as constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.values
            .iter()
            .map(|v| if trainable { tape.param(v.clone()) } else { tape.constant(v.clone()) })
            .collect()
    }
}

/// Seeded uniform fan-in initializer: entries in `±1/√fan_in`.
pub(crate) struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    pub(crate) fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub(crate) fn uniform(&mut self, rows: usize, cols: usize, fan_in: usize) -> Matrix {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let data = (0..rows * cols).map(|_| self.rng.random_range(-bound..bound)).collect();
        Matrix::from_vec(rows, cols, data)
    }
}
