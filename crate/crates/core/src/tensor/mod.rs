//! Dense `f64` tensors, the layer types the classifiers need, losses, Adam
//! and a finite-difference gradient checker.
//!
//! Gradients are computed by hand-written reverse passes over recorded
//! forward caches rather than a general graph: the only layers are LSTM
//! (with backpropagation through time), dense and softmax.

mod adam;
mod dense;
mod gradcheck;
mod loss;
mod lstm;
mod network;

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

pub use adam::{Adam, AdamConfig};
pub use dense::{Activation, DenseCache, DenseLayer};
pub use gradcheck::{
    gradcheck, standard_suite, BlockReport, ClassifierObjective, GradcheckReport, Objective, GRADCHECK_STEP,
};
pub use loss::{sparse_crossentropy, sparse_crossentropy_grad, PROB_FLOOR};
pub use lstm::{Dropout, LstmCache, LstmLayer};
pub use network::{Gradients, Mode, Network, Tape};

/// Row-major dense tensor of `f64` values.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(
                format!("{n} values for shape {shape:?}"),
                format!("{} values", data.len()),
            ));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![],
            data: vec![v],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Row `r` of a 2-D tensor.
    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.shape[1];
        &self.data[r * w..(r + 1) * w]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let w = self.shape[1];
        &mut self.data[r * w..(r + 1) * w]
    }

    /// Glorot/Xavier uniform fill for a `fan_out × fan_in` block.
    pub(crate) fn fill_glorot<R: Rng + ?Sized>(
        data: &mut [f64],
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in data {
            *v = rng.random_range(-limit..limit);
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
