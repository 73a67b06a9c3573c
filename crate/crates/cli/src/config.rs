//! Run configuration: defaults, overlaid by a TOML file, overlaid by
//! command-line flags. The resolved value is written next to every run's
//! outputs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use nameorigin::dataset::SplitSpec;
use nameorigin::model::{ModelConfig, TrainConfig};
use nameorigin::pseudo_label::{MapperConfig, ThresholdSets, Weights};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// class list file; the 17 default origins when absent
    pub taxonomy: Option<String>,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub split: SplitSection,
    pub mapper: MapperSection,
    pub thresholds: ThresholdSection,
    pub weights: WeightSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            taxonomy: None,
            model: ModelConfig::default(),
            train: TrainSection::default(),
            split: SplitSection::default(),
            mapper: MapperSection::default(),
            thresholds: ThresholdSection::default(),
            weights: WeightSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stopping_patience: usize,
    pub learning_rate: f64,
    /// after selection, retrain on every row for the best epoch count
    pub final_fit: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            batch_size: d.batch_size,
            max_epochs: d.max_epochs,
            early_stopping_patience: d.early_stopping_patience,
            learning_rate: d.learning_rate,
            final_fit: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub test_fraction: f64,
    pub validation_fraction: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        let d = SplitSpec::default();
        SplitSection {
            test_fraction: d.test_fraction,
            validation_fraction: d.validation_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapperSection {
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stopping_patience: usize,
    pub learning_rate: f64,
    /// share of labeled leaf vectors held out to score the threshold grid
    pub test_fraction: f64,
    pub validation_fraction: f64,
}

impl Default for MapperSection {
    fn default() -> Self {
        let d = MapperConfig::default();
        MapperSection {
            hidden: d.hidden,
            batch_size: d.train.batch_size,
            max_epochs: d.train.max_epochs,
            early_stopping_patience: d.train.early_stopping_patience,
            learning_rate: d.train.learning_rate,
            test_fraction: 0.2,
            validation_fraction: 0.15,
        }
    }
}

/// Threshold lists; `"none"` stands for an unconstrained entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSection {
    #[serde(with = "bound_list")]
    pub min_p_h: Vec<Option<f64>>,
    #[serde(with = "bound_list")]
    pub min_delta: Vec<Option<f64>>,
    #[serde(with = "bound_list")]
    pub max_entropy: Vec<Option<f64>>,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        let d = ThresholdSets::default();
        ThresholdSection {
            min_p_h: d.min_p_h,
            min_delta: d.min_delta,
            max_entropy: d.max_entropy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightSection {
    pub selection: Weights,
    /// alternative schemes for the robustness ranking; the 26 built-in
    /// schemes when absent
    pub schemes: Option<Vec<Weights>>,
}

mod bound_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Bound {
        Value(f64),
        Keyword(String),
    }

    pub fn serialize<S: Serializer>(v: &[Option<f64>], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|b| match b {
                Some(x) => Bound::Value(*x),
                None => Bound::Keyword("none".into()),
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Option<f64>>, D::Error> {
        Vec::<Bound>::deserialize(d)?
            .into_iter()
            .map(|b| match b {
                Bound::Value(x) => Ok(Some(x)),
                Bound::Keyword(k) if k.eq_ignore_ascii_case("none") => Ok(None),
                Bound::Keyword(k) => Err(serde::de::Error::custom(format!(
                    "threshold must be a number or \"none\", got {k:?}"
                ))),
            })
            .collect()
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(p) => Self::from_file(p),
            None => Ok(Self::default()),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes to TOML")
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.train.batch_size,
            max_epochs: self.train.max_epochs,
            early_stopping_patience: self.train.early_stopping_patience,
            learning_rate: self.train.learning_rate,
            seed: self.seed,
            fixed_epochs: None,
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            test_fraction: self.split.test_fraction,
            validation_fraction: self.split.validation_fraction,
            seed: self.seed,
        }
    }

    pub fn mapper_config(&self) -> MapperConfig {
        MapperConfig {
            hidden: self.mapper.hidden.clone(),
            train: TrainConfig {
                batch_size: self.mapper.batch_size,
                max_epochs: self.mapper.max_epochs,
                early_stopping_patience: self.mapper.early_stopping_patience,
                learning_rate: self.mapper.learning_rate,
                seed: self.seed,
                fixed_epochs: None,
            },
        }
    }

    pub fn threshold_sets(&self) -> ThresholdSets {
        ThresholdSets {
            min_p_h: self.thresholds.min_p_h.clone(),
            min_delta: self.thresholds.min_delta.clone(),
            max_entropy: self.thresholds.max_entropy.clone(),
        }
    }
}
