//! The name-origin classifier: stacked LSTM layers reading the 30×28
//! one-hot name, a softmax layer over the origin classes on the last
//! step's hidden state, training, inference and a binary model file.

mod file;
pub mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{EncodedName, CHANNELS, MAX_LEN};
use crate::error::{Error, Result};
use crate::taxonomy::Taxonomy;
use crate::tensor::{Activation, DenseLayer, LstmLayer, Network};

pub use file::{Dtype, FORMAT_VERSION, MAGIC};
pub use train::{
    accuracy, argmax, fit, predict_all, EarlyStopping, EpochRecord, Examples, FeatureExamples,
    History, NameExamples, TrainConfig, Verdict,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub lstm_sizes: Vec<usize>,
    pub dropout_rate: f64,
    pub num_classes: usize,
    pub input_channels: usize,
    pub max_seq_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            lstm_sizes: vec![512, 256, 64],
            dropout_rate: 0.2,
            num_classes: 17,
            input_channels: CHANNELS,
            max_seq_len: MAX_LEN,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lstm_sizes.is_empty() || self.lstm_sizes.contains(&0) {
            return Err(Error::InvalidConfig(
                "lstm_sizes must be non-empty with every size >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidConfig("num_classes must be >= 2".into()));
        }
        if self.input_channels != CHANNELS || self.max_seq_len != MAX_LEN {
            return Err(Error::InvalidConfig(format!(
                "names are encoded as {MAX_LEN}x{CHANNELS}; got {}x{}",
                self.max_seq_len, self.input_channels
            )));
        }
        Ok(())
    }

    /// Closed-form count of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        let mut total = 0;
        let mut input = self.input_channels;
        for &c in &self.lstm_sizes {
            total += 4 * (c * (input + c) + c);
            input = c;
        }
        total + input * self.num_classes + self.num_classes
    }
}

/// Class probabilities in taxonomy order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Accepts values in `[0, 1]` summing to 1 within `1e-9`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let sum: f64 = values.iter().sum();
        if values.is_empty()
            || values.iter().any(|p| !(0.0..=1.0).contains(p))
            || (sum - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidWeights(format!(
                "not a probability vector (sum {sum})"
            )));
        }
        Ok(ProbVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Softmax output rows are valid by construction.
    pub(crate) fn from_network_output(values: Vec<f64>) -> Self {
        ProbVector(values)
    }

    /// Most probable class; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OriginModel {
    config: ModelConfig,
    class_names: Vec<String>,
    network: Network,
    pub provenance: Provenance,
}

impl OriginModel {
    /// Freshly initialized model; identical seeds give identical weights.
    pub fn build(config: ModelConfig, taxonomy: &Taxonomy, seed: u64) -> Result<Self> {
        config.validate()?;
        if taxonomy.len() != config.num_classes {
            return Err(Error::InvalidConfig(format!(
                "taxonomy has {} classes but num_classes is {}",
                taxonomy.len(),
                config.num_classes
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lstm = Vec::with_capacity(config.lstm_sizes.len());
        let mut input = config.input_channels;
        for &c in &config.lstm_sizes {
            lstm.push(LstmLayer::new(input, c, &mut rng));
            input = c;
        }
        let dense = vec![DenseLayer::new(input, config.num_classes, Activation::Softmax, &mut rng)];
        let network = Network {
            lstm,
            dense,
            dropout: config.dropout_rate,
        };
        Ok(OriginModel {
            config,
            class_names: taxonomy.names().to_vec(),
            network,
            provenance: Provenance {
                seed,
                ..Provenance::default()
            },
        })
    }

    /// Wraps an existing network after checking it matches `config`.
    pub fn from_parts(
        config: ModelConfig,
        class_names: Vec<String>,
        network: Network,
        provenance: Provenance,
    ) -> Result<Self> {
        config.validate()?;
        network.validate()?;
        let sizes: Vec<usize> = network.lstm.iter().map(LstmLayer::hidden_size).collect();
        let fits = sizes == config.lstm_sizes
            && network.lstm[0].input_size() == config.input_channels
            && network.dense.len() == 1
            && network.dense[0].activation == Activation::Softmax
            && network.dense[0].output_size() == config.num_classes
            && class_names.len() == config.num_classes;
        if !fits {
            return Err(Error::InvalidModelFile(
                "parameters do not match the declared configuration".into(),
            ));
        }
        Ok(OriginModel {
            config,
            class_names,
            network,
            provenance,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.network
    }

    pub fn count_parameters(&self) -> usize {
        self.network.parameter_count()
    }

    /// Trains in place and records provenance. See [`fit`].
    pub fn train(
        &mut self,
        train: &NameExamples,
        validation: Option<&NameExamples>,
        config: &TrainConfig,
    ) -> Result<History> {
        let history = fit(
            &mut self.network,
            train,
            validation.map(|v| v as &dyn Examples),
            config,
        )?;
        self.provenance = Provenance {
            seed: config.seed,
            epochs_run: history.epochs.len(),
            best_epoch: history.best_epoch,
            best_validation_accuracy: history.best_validation_accuracy,
        };
        Ok(history)
    }

    pub fn predict(&self, names: &[EncodedName]) -> Result<Vec<ProbVector>> {
        let data = NameExamples {
            names: names.to_vec(),
            labels: vec![0; names.len()],
        };
        Ok(predict_all(&self.network, &data)?
            .into_iter()
            .map(ProbVector::from_network_output)
            .collect())
    }

    pub fn predict_one(&self, name: &EncodedName) -> Result<ProbVector> {
        Ok(self.predict(std::slice::from_ref(name))?.remove(0))
    }
}
