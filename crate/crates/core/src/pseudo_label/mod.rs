//! Pseudo-labels from leaf-nationality probability vectors: manual
//! crosswalk baselines, a learned mapper, confidence metrics and the
//! threshold-grid selection of clearly classified samples.

mod filter;
mod leaves;
mod mapper;
mod selection;

pub use filter::{apply_combo, confidence, grid, ConfidenceMetrics, ThresholdCombo, ThresholdSets};
pub use leaves::{
    leaf_index, leaf_names, load_leaf_csv, read_leaf_csv, write_leaf_csv, Crosswalk, LeafVector,
    LEAF_COUNT, SIMPLEX_TOLERANCE,
};
pub use mapper::{train_mapper, Mapper, MapperConfig};
pub use selection::{
    default_weight_schemes, evaluate_grid, rank_order, raw_metrics, robustness_ranks, score_combo,
    select_best, smallest_two_classes, ComboEvaluation, EvaluatedSample, GridReport, MetricRanges,
    RawMetrics, Weights, DEGENERATE_SCALE,
};

use crate::dataset::{LabeledName, Source};
use crate::error::Result;

/// Labels `data` with the mapper and keeps the vectors whose prediction
/// passes `combo`.
pub fn pseudo_label(mapper: &Mapper, data: &[LeafVector], combo: &ThresholdCombo) -> Result<Vec<LabeledName>> {
    let probs = mapper.predict(data)?;
    Ok(data
        .iter()
        .zip(&probs)
        .filter(|(_, p)| combo.accepts(&confidence(p.as_slice())))
        .map(|(v, p)| LabeledName {
            name: v.name.clone(),
            label: p.argmax(),
            source: Source::PseudoLabeled,
        })
        .collect())
}
