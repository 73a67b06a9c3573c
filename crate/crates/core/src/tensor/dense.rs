use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{axpy, dot, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Softmax,
}

/// Fully connected layer `activation(W·x + b)` with `W` of shape `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

/// Forward values kept for the reverse pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Tensor,
    output: Tensor,
}

impl DenseLayer {
    /// Glorot-uniform weights, zero bias.
    pub fn new<R: Rng + ?Sized>(
        input_size: usize,
        output_size: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut weights = Tensor::zeros(&[output_size, input_size]);
        Tensor::fill_glorot(weights.data_mut(), input_size, output_size, rng);
        DenseLayer {
            weights,
            bias: Tensor::zeros(&[output_size]),
            activation,
        }
    }

    pub fn zeroed(input_size: usize, output_size: usize, activation: Activation) -> Self {
        DenseLayer {
            weights: Tensor::zeros(&[output_size, input_size]),
            bias: Tensor::zeros(&[output_size]),
            activation,
        }
    }

    pub fn input_size(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn output_size(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Applies the layer to a `[batch, in]` input.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let (n_in, n_out) = (self.input_size(), self.output_size());
        if input.shape().len() != 2 || input.shape()[1] != n_in {
            return Err(Error::shape(format!("[batch, {n_in}]"), format!("{:?}", input.shape())));
        }
        let batch = input.shape()[0];
        let mut out = Tensor::zeros(&[batch, n_out]);
        for b in 0..batch {
            let x = input.row(b);
            let y = out.row_mut(b);
            for (o, yo) in y.iter_mut().enumerate() {
                *yo = dot(self.weights.row(o), x) + self.bias.data()[o];
            }
            activate(self.activation, y);
        }
        Ok(out)
    }

    pub(crate) fn forward_cached(&self, input: Tensor) -> Result<(Tensor, DenseCache)> {
        let output = self.forward(&input)?;
        Ok((
            output.clone(),
            DenseCache { input, output },
        ))
    }

    /// Reverse pass. `d_output` is the loss gradient w.r.t. the activated
    /// output; gradients for `W` and `b` are accumulated into `d_weights`
    /// and `d_bias`; the gradient w.r.t. the input is returned.
    pub(crate) fn backward(
        &self,
        cache: &DenseCache,
        d_output: &Tensor,
        d_weights: &mut Tensor,
        d_bias: &mut Tensor,
    ) -> Tensor {
        let batch = cache.input.shape()[0];
        let (n_in, n_out) = (self.input_size(), self.output_size());
        let mut d_input = Tensor::zeros(&[batch, n_in]);
        let mut dz = vec![0.0; n_out];
        for b in 0..batch {
            let y = cache.output.row(b);
            let dy = d_output.row(b);
            match self.activation {
                Activation::Identity => dz.copy_from_slice(dy),
                Activation::Relu => {
                    for ((d, &g), &v) in dz.iter_mut().zip(dy).zip(y) {
                        *d = if v > 0.0 { g } else { 0.0 };
                    }
                }
                Activation::Softmax => {
                    let s = dot(y, dy);
                    for ((d, &g), &p) in dz.iter_mut().zip(dy).zip(y) {
                        *d = p * (g - s);
                    }
                }
            }
            let x = cache.input.row(b);
            let dx = d_input.row_mut(b);
            for (o, &g) in dz.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                axpy(g, x, d_weights.row_mut(o));
                d_bias.data_mut()[o] += g;
                axpy(g, self.weights.row(o), dx);
            }
        }
        d_input
    }
}

fn activate(activation: Activation, y: &mut [f64]) {
    match activation {
        Activation::Identity => {}
        Activation::Relu => {
            for v in y.iter_mut() {
                *v = v.max(0.0);
            }
        }
        Activation::Softmax => softmax_in_place(y),
    }
}

/// Max-subtracted softmax.
pub(crate) fn softmax_in_place(y: &mut [f64]) {
    let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in y.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in y.iter_mut() {
        *v /= sum;
    }
}
