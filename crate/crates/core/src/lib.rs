//! Name-origin classification: character encoding, an LSTM classifier
//! trained from scratch, pseudo-label construction from leaf-nationality
//! probability vectors, multiclass evaluation and prevalence aggregation.

pub mod codec;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod model;
pub mod prevalence;
pub mod pseudo_label;
pub mod synthetic;
pub mod taxonomy;
pub mod tensor;

pub use error::{Error, Result};
