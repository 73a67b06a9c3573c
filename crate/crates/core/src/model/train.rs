//! Mini-batch Adam training with validation-accuracy early stopping,
//! shared by the name classifier and the leaf-vector mapper.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{EncodedName, CHANNELS, MAX_LEN};
use crate::error::{Error, Result};
use crate::tensor::{
    sparse_crossentropy, sparse_crossentropy_grad, Adam, AdamConfig, Mode, Network, Tape, Tensor,
};

/// Chunk size used when running inference over many samples.
pub(crate) const PREDICT_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stopping_patience: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Train for exactly this many epochs without validation (final fit).
    pub fixed_epochs: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            max_epochs: 50,
            early_stopping_patience: 7,
            learning_rate: 0.0025,
            seed: 42,
            fixed_epochs: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.early_stopping_patience == 0 {
            return Err(Error::InvalidConfig(
                "batch_size, max_epochs and early_stopping_patience must be >= 1".into(),
            ));
        }
        if self.fixed_epochs == Some(0) {
            return Err(Error::InvalidConfig("fixed_epochs must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// A labeled collection the trainer can batch.
pub trait Examples {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Shape of one input, e.g. `[30, 28]` or `[39]`.
    fn sample_shape(&self) -> Vec<usize>;
    fn label(&self, index: usize) -> usize;
    fn write_input(&self, index: usize, out: &mut [f64]);

    /// Stacks the selected samples into one batch tensor.
    fn batch(&self, indices: &[usize]) -> Tensor {
        let shape = self.sample_shape();
        let width: usize = shape.iter().product();
        let mut data = vec![0.0; indices.len() * width];
        for (chunk, &i) in data.chunks_exact_mut(width).zip(indices) {
            self.write_input(i, chunk);
        }
        let mut full = vec![indices.len()];
        full.extend(shape);
        Tensor::from_vec(&full, data).expect("batch shape is consistent")
    }
}

/// Encoded names with their labels.
#[derive(Debug, Clone, Default)]
pub struct NameExamples {
    pub names: Vec<EncodedName>,
    pub labels: Vec<usize>,
}

impl Examples for NameExamples {
    fn len(&self) -> usize {
        self.names.len()
    }
    fn sample_shape(&self) -> Vec<usize> {
        vec![MAX_LEN, CHANNELS]
    }
    fn label(&self, index: usize) -> usize {
        self.labels[index]
    }
    fn write_input(&self, index: usize, out: &mut [f64]) {
        self.names[index].write_f64(out);
    }
}

/// Flat feature vectors with their labels.
#[derive(Debug, Clone, Default)]
pub struct FeatureExamples {
    pub width: usize,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Examples for FeatureExamples {
    fn len(&self) -> usize {
        self.features.len()
    }
    fn sample_shape(&self) -> Vec<usize> {
        vec![self.width]
    }
    fn label(&self, index: usize) -> usize {
        self.labels[index]
    }
    fn write_input(&self, index: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.features[index]);
    }
}

/// Patience bookkeeping on a score that should increase.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    since_best: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// strict improvement; keep these weights
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            best_epoch: 0,
            since_best: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, score: f64) -> Verdict {
        if self.best.is_none_or(|b| score > b) {
            self.best = Some(score);
            self.best_epoch = epoch;
            self.since_best = 0;
            Verdict::Improved
        } else {
            self.since_best += 1;
            if self.since_best >= self.patience {
                Verdict::Stop
            } else {
                Verdict::Continue
            }
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// accuracy of the training forward passes (dropout active)
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// epoch whose weights were kept (the last one in fixed-epoch mode)
    pub best_epoch: usize,
    pub best_validation_accuracy: Option<f64>,
}

impl History {
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| Error::Parse {
            line: 0,
            message: e.to_string(),
        };
        wtr.write_record(["epoch", "train_loss", "train_accuracy", "validation_accuracy"])
            .map_err(err)?;
        for e in &self.epochs {
            wtr.write_record([
                e.epoch.to_string(),
                format!("{:.17e}", e.train_loss),
                format!("{:.17e}", e.train_accuracy),
                e.validation_accuracy
                    .map(|v| format!("{v:.17e}"))
                    .unwrap_or_default(),
            ])
            .map_err(err)?;
        }
        wtr.flush().map_err(|e| Error::io("<history csv>", e))
    }
}

/// Runs the network over every sample in chunks (dropout off) and returns
/// the `[N, K]` outputs row by row.
pub fn predict_all(network: &Network, data: &dyn Examples) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(data.len());
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(PREDICT_CHUNK) {
        let y = network.predict(&data.batch(chunk))?;
        let k = y.shape()[1];
        out.extend(y.data().chunks_exact(k).map(<[f64]>::to_vec));
    }
    Ok(out)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(network: &Network, data: &dyn Examples) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let preds = predict_all(network, data)?;
    let hits = preds
        .iter()
        .enumerate()
        .filter(|(i, p)| argmax(p) == data.label(*i))
        .count();
    Ok(hits as f64 / data.len() as f64)
}

/// Trains `network` in place.
///
/// Each epoch shuffles the training set (seeded), walks it in mini-batches
/// (the last partial batch included) and takes one Adam step per batch.
/// With a validation set, accuracy is measured after every epoch and
/// training stops once `early_stopping_patience` epochs pass without a
/// strict improvement; the best epoch's weights are restored. Without one,
/// `fixed_epochs` must be set and the final weights are kept.
pub fn fit(
    network: &mut Network,
    train: &dyn Examples,
    validation: Option<&dyn Examples>,
    config: &TrainConfig,
) -> Result<History> {
    config.validate()?;
    network.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let classes = network
        .dense
        .last()
        .map(|d| d.output_size())
        .ok_or_else(|| Error::InvalidConfig("network needs an output layer".into()))?;
    let check_labels = |set: &dyn Examples| -> Result<()> {
        for i in 0..set.len() {
            let label = set.label(i);
            if label >= classes {
                return Err(Error::LabelOutOfRange { label, classes });
            }
        }
        Ok(())
    };
    check_labels(train)?;

    let validation = validation.filter(|v| !v.is_empty());
    if let Some(v) = validation {
        check_labels(v)?;
    }
    let epochs = match (validation, config.fixed_epochs) {
        (_, Some(n)) => n,
        (Some(_), None) => config.max_epochs,
        (None, None) => {
            return Err(Error::InvalidConfig(
                "training without validation data requires fixed_epochs".into(),
            ))
        }
    };
    let use_validation = validation.is_some() && config.fixed_epochs.is_none();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    });
    let mut stopper = EarlyStopping::new(config.early_stopping_patience);
    let mut best_params: Option<Network> = None;
    let mut history = History::default();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut tape = Tape::new();

    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut hits = 0usize;
        for batch_idx in order.chunks(config.batch_size) {
            let x = train.batch(batch_idx);
            let labels: Vec<usize> = batch_idx.iter().map(|&i| train.label(i)).collect();
            let probs = network.forward(&x, Mode::Train, &mut rng, &mut tape)?;
            let loss = sparse_crossentropy(&probs, &labels)?;
            let d_probs = sparse_crossentropy_grad(&probs, &labels)?;
            let grads = network.backward(&tape, &d_probs)?;
            adam.step(&mut network.params_mut(), &grads.blocks)?;

            loss_sum += loss * labels.len() as f64;
            hits += labels
                .iter()
                .enumerate()
                .filter(|(r, &l)| argmax(probs.row(*r)) == l)
                .count();
        }
        tape.clear();
        if !loss_sum.is_finite() {
            return Err(Error::Diverged { epoch });
        }

        let validation_accuracy = match (use_validation, validation) {
            (true, Some(v)) => Some(accuracy(network, v)?),
            _ => None,
        };
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_accuracy: hits as f64 / train.len() as f64,
            validation_accuracy,
        });
        if let Some(score) = validation_accuracy {
            match stopper.observe(epoch, score) {
                Verdict::Improved => best_params = Some(network.clone()),
                Verdict::Continue => {}
                Verdict::Stop => break,
            }
        }
    }

    if use_validation {
        if let Some(best) = best_params {
            *network = best;
        }
        history.best_epoch = stopper.best_epoch();
        history.best_validation_accuracy = stopper.best();
    } else {
        history.best_epoch = history.epochs.len();
    }
    Ok(history)
}
