//! Feed-forward network mapping leaf-nationality vectors to origins.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::leaves::{LeafVector, LEAF_COUNT};
use crate::error::{Error, Result};
use crate::model::{fit, predict_all, Examples, FeatureExamples, History, ProbVector, TrainConfig};
use crate::tensor::{Activation, DenseLayer, Network};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapperConfig {
    /// ReLU hidden layer widths; empty gives multinomial logistic regression
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for MapperConfig {
    fn default() -> Self {
        MapperConfig {
            hidden: vec![64],
            train: TrainConfig {
                batch_size: 64,
                max_epochs: 100,
                early_stopping_patience: 10,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mapper {
    network: Network,
}

fn examples(data: &[LeafVector]) -> Result<FeatureExamples> {
    let labels = data
        .iter()
        .map(|v| {
            v.label.ok_or_else(|| {
                Error::InvalidConfig(format!("leaf vector `{}` has no label", v.name))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureExamples {
        width: LEAF_COUNT,
        features: data.iter().map(|v| v.probs().to_vec()).collect(),
        labels,
    })
}

impl Mapper {
    /// Untrained mapper with Glorot-initialized weights.
    pub fn build(hidden: &[usize], classes: usize, seed: u64) -> Result<Self> {
        if classes < 2 || hidden.contains(&0) {
            return Err(Error::InvalidConfig(
                "mapper needs >= 2 classes and nonzero hidden widths".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dense = Vec::new();
        let mut input = LEAF_COUNT;
        for &h in hidden {
            dense.push(DenseLayer::new(input, h, Activation::Relu, &mut rng));
            input = h;
        }
        dense.push(DenseLayer::new(input, classes, Activation::Softmax, &mut rng));
        Ok(Mapper {
            network: Network {
                lstm: Vec::new(),
                dense,
                dropout: 0.0,
            },
        })
    }

    pub fn from_network(network: Network) -> Result<Self> {
        network.validate()?;
        if !network.lstm.is_empty()
            || network.dense.first().map(DenseLayer::input_size) != Some(LEAF_COUNT)
            || network.dense.last().map(|d| d.activation) != Some(Activation::Softmax)
        {
            return Err(Error::InvalidConfig(
                "mapper must be dense layers from 39 inputs ending in softmax".into(),
            ));
        }
        Ok(Mapper { network })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn classes(&self) -> usize {
        self.network.dense.last().map_or(0, DenseLayer::output_size)
    }

    pub fn predict(&self, data: &[LeafVector]) -> Result<Vec<ProbVector>> {
        let features = FeatureExamples {
            width: LEAF_COUNT,
            features: data.iter().map(|v| v.probs().to_vec()).collect(),
            labels: vec![0; data.len()],
        };
        Ok(predict_all(&self.network, &features)?
            .into_iter()
            .map(ProbVector::from_network_output)
            .collect())
    }
}

/// Trains a fresh mapper on labeled vectors with the shared early-stopping
/// loop.
pub fn train_mapper(
    train: &[LeafVector],
    validation: Option<&[LeafVector]>,
    classes: usize,
    config: &MapperConfig,
) -> Result<(Mapper, History)> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut mapper = Mapper::build(&config.hidden, classes, config.train.seed)?;
    let train = examples(train)?;
    let validation = validation.map(examples).transpose()?;
    let history = fit(
        &mut mapper.network,
        &train,
        validation.as_ref().map(|v| v as &dyn Examples),
        &config.train,
    )?;
    Ok((mapper, history))
}
