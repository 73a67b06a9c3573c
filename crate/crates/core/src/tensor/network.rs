use rand::Rng;

use super::dense::{DenseCache, DenseLayer};
use super::lstm::{Dropout, LstmCache, LstmLayer};
use super::loss::{sparse_crossentropy, sparse_crossentropy_grad};
use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// dropout active
    Train,
    /// deterministic
    Eval,
}

/// Stacked LSTM layers followed by dense layers.
///
/// With LSTM layers present the input is `[B, T, i]` and the last time
/// step's hidden state of the top LSTM layer feeds the dense stack;
/// without them the input is `[B, features]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub lstm: Vec<LstmLayer>,
    pub dense: Vec<DenseLayer>,
    /// input dropout rate of every LSTM layer during training
    pub dropout: f64,
}

/// Records one forward pass so that [`Network::backward`] can replay it.
#[derive(Debug, Default)]
pub struct Tape {
    record: Option<Record>,
}

#[derive(Debug)]
struct Record {
    batch: usize,
    steps: usize,
    lstm: Vec<LstmCache>,
    dense: Vec<DenseCache>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_recorded(&self) -> bool {
        self.record.is_some()
    }

    pub fn clear(&mut self) {
        self.record = None;
    }
}

/// One gradient tensor per parameter block, in [`Network::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub blocks: Vec<Tensor>,
}

impl Network {
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::with_capacity(2 * (self.lstm.len() + self.dense.len()));
        for l in &self.lstm {
            out.push(&l.weights);
            out.push(&l.bias);
        }
        for d in &self.dense {
            out.push(&d.weights);
            out.push(&d.bias);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::with_capacity(2 * (self.lstm.len() + self.dense.len()));
        for l in &mut self.lstm {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
        }
        for d in &mut self.dense {
            out.push(&mut d.weights);
            out.push(&mut d.bias);
        }
        out
    }

    /// Block names, e.g. `lstm0.weights`, `dense0.bias`.
    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for k in 0..self.lstm.len() {
            out.push(format!("lstm{k}.weights"));
            out.push(format!("lstm{k}.bias"));
        }
        for k in 0..self.dense.len() {
            out.push(format!("dense{k}.weights"));
            out.push(format!("dense{k}.bias"));
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.lstm.iter().map(LstmLayer::parameter_count).sum::<usize>()
            + self.dense.iter().map(DenseLayer::parameter_count).sum::<usize>()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            blocks: self.params().iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    /// Checks that every layer consumes what the previous one produces.
    pub fn validate(&self) -> Result<()> {
        let mut width = None;
        for (k, l) in self.lstm.iter().enumerate() {
            if let Some(w) = width {
                if l.input_size() != w {
                    return Err(Error::InvalidConfig(format!(
                        "lstm{k} expects {} inputs but receives {w}",
                        l.input_size()
                    )));
                }
            }
            width = Some(l.hidden_size());
        }
        for (k, d) in self.dense.iter().enumerate() {
            if let Some(w) = width {
                if d.input_size() != w {
                    return Err(Error::InvalidConfig(format!(
                        "dense{k} expects {} inputs but receives {w}",
                        d.input_size()
                    )));
                }
            }
            width = Some(d.output_size());
        }
        if width.is_none() {
            return Err(Error::InvalidConfig("network has no layers".into()));
        }
        Dropout::new(self.dropout)?;
        Ok(())
    }

    /// Forward pass recording everything [`Network::backward`] needs.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &Tensor,
        mode: Mode,
        rng: &mut R,
        tape: &mut Tape,
    ) -> Result<Tensor> {
        tape.clear();
        let batch = input.shape().first().copied().unwrap_or(0);
        let mut record = Record {
            batch,
            steps: 0,
            lstm: Vec::with_capacity(self.lstm.len()),
            dense: Vec::with_capacity(self.dense.len()),
        };
        let mut features = if self.lstm.is_empty() {
            input.clone()
        } else {
            let dropout = Dropout::new(self.dropout)?;
            let mut seq: Option<Tensor> = None;
            for layer in &self.lstm {
                let x = seq.as_ref().unwrap_or(input);
                let mask = (mode == Mode::Train && dropout.rate > 0.0)
                    .then(|| dropout.sample_mask(batch * layer.input_size(), rng));
                let (out, cache) = layer.forward_batch(x, mask)?;
                record.lstm.push(cache);
                seq = Some(out);
            }
            let seq = seq.expect("at least one lstm layer");
            record.steps = seq.shape()[1];
            last_step(&seq)
        };
        for layer in &self.dense {
            let (out, cache) = layer.forward_cached(features)?;
            record.dense.push(cache);
            features = out;
        }
        tape.record = Some(record);
        Ok(features)
    }

    /// Inference without recording, dropout off.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        let mut features = if self.lstm.is_empty() {
            input.clone()
        } else {
            let mut seq: Option<Tensor> = None;
            for layer in &self.lstm {
                let x = seq.as_ref().unwrap_or(input);
                seq = Some(layer.forward_batch(x, None)?.0);
            }
            last_step(&seq.expect("at least one lstm layer"))
        };
        for layer in &self.dense {
            features = layer.forward(&features)?;
        }
        Ok(features)
    }

    /// Reverse pass for the recorded forward. `d_output` is the loss
    /// gradient w.r.t. the network output.
    pub fn backward(&self, tape: &Tape, d_output: &Tensor) -> Result<Gradients> {
        let record = tape.record.as_ref().ok_or(Error::NoRecordedForward)?;
        let mut grads = self.zero_gradients();
        let n_lstm = self.lstm.len();
        let mut upstream = d_output.clone();
        for (k, layer) in self.dense.iter().enumerate().rev() {
            let (dw, rest) = grads.blocks[2 * (n_lstm + k)..].split_at_mut(1);
            upstream = layer.backward(&record.dense[k], &upstream, &mut dw[0], &mut rest[0]);
        }
        if n_lstm > 0 {
            let c = self.lstm[n_lstm - 1].hidden_size();
            let (batch, steps) = (record.batch, record.steps);
            let mut d_seq = Tensor::zeros(&[batch, steps, c]);
            for b in 0..batch {
                let dst = (b * steps + steps - 1) * c;
                d_seq.data_mut()[dst..dst + c].copy_from_slice(upstream.row(b));
            }
            for (k, layer) in self.lstm.iter().enumerate().rev() {
                let (dw, rest) = grads.blocks[2 * k..].split_at_mut(1);
                d_seq = layer.backward(&record.lstm[k], &d_seq, &mut dw[0], &mut rest[0]);
            }
        }
        Ok(grads)
    }

    /// Mean sparse cross-entropy of a softmax-headed network and its
    /// gradients, computed in one forward/backward pass.
    pub fn loss_and_gradients<R: Rng + ?Sized>(
        &self,
        input: &Tensor,
        labels: &[usize],
        mode: Mode,
        rng: &mut R,
    ) -> Result<(f64, Gradients)> {
        let mut tape = Tape::new();
        let probs = self.forward(input, mode, rng, &mut tape)?;
        let loss = sparse_crossentropy(&probs, labels)?;
        let d_probs = sparse_crossentropy_grad(&probs, labels)?;
        let grads = self.backward(&tape, &d_probs)?;
        Ok((loss, grads))
    }
}

fn last_step(seq: &Tensor) -> Tensor {
    let (batch, steps, c) = (seq.shape()[0], seq.shape()[1], seq.shape()[2]);
    let mut out = Tensor::zeros(&[batch, c]);
    for b in 0..batch {
        let src = (b * steps + steps - 1) * c;
        out.row_mut(b).copy_from_slice(&seq.data()[src..src + c]);
    }
    out
}
