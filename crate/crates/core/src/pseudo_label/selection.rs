//! Scoring every threshold combination on a labeled sample and picking
//! the best one.
//!
//! Each combo gets four raw metrics on its surviving subset: weighted F1,
//! retained fraction of the baseline, variance of the per-origin shares and
//! the combined share of the two smallest origins. Each metric is min-max
//! scaled across the non-empty combos (variance inverted so higher is
//! better) and the scaled values are combined with fixed weights.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::filter::{apply_combo, confidence, ConfidenceMetrics, ThresholdCombo};
use crate::error::{Error, Result};
use crate::metrics::{confusion_from_classes, scores};
use crate::model::argmax;

/// Value used for every combo when a metric does not vary across the grid.
pub const DEGENERATE_SCALE: f64 = 0.5;

/// Weights on (F1, retained fraction, share variance, smallest-two share).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Weights([f64; 4]);

impl Weights {
    pub fn new(w: [f64; 4]) -> Result<Self> {
        let sum: f64 = w.iter().sum();
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights(format!(
                "weights must be nonnegative and sum to 1, got {w:?}"
            )));
        }
        Ok(Weights(w))
    }

    pub fn values(&self) -> [f64; 4] {
        self.0
    }

    fn apply(&self, scaled: &[f64; 4]) -> f64 {
        self.0.iter().zip(scaled).map(|(w, s)| w * s).sum()
    }
}

impl Default for Weights {
    fn default() -> Self {
        Weights([0.5, 0.25, 0.125, 0.125])
    }
}

impl TryFrom<[f64; 4]> for Weights {
    type Error = Error;
    fn try_from(w: [f64; 4]) -> Result<Self> {
        Weights::new(w)
    }
}

impl From<Weights> for [f64; 4] {
    fn from(w: Weights) -> Self {
        w.0
    }
}

/// 26 alternative schemes: the 12 distinct orderings of
/// (0.5, 0.25, 0.125, 0.125) and of (0.4, 0.3, 0.15, 0.15), equal weights,
/// and (0.7, 0.1, 0.1, 0.1).
pub fn default_weight_schemes() -> Vec<Weights> {
    let mut out = Vec::new();
    for base in [[0.5, 0.25, 0.125, 0.125], [0.4, 0.3, 0.15, 0.15]] {
        let mut seen: Vec<[f64; 4]> = Vec::new();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let idx = [a, b, c, d];
                        let mut sorted = idx;
                        sorted.sort_unstable();
                        if sorted != [0, 1, 2, 3] {
                            continue;
                        }
                        let w = idx.map(|i| base[i]);
                        if !seen.contains(&w) {
                            seen.push(w);
                        }
                    }
                }
            }
        }
        out.extend(seen.into_iter().map(Weights));
    }
    out.push(Weights([0.25; 4]));
    out.push(Weights([0.7, 0.1, 0.1, 0.1]));
    out
}

/// A labeled sample as seen by the filter: its true origin and the
/// mapper's probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedSample {
    pub truth: usize,
    pub predicted: usize,
    pub metrics: ConfidenceMetrics,
}

impl EvaluatedSample {
    pub fn new(truth: usize, probs: &[f64]) -> Self {
        EvaluatedSample {
            truth,
            predicted: argmax(probs),
            metrics: confidence(probs),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RawMetrics {
    pub f1: f64,
    pub fraction: f64,
    pub share_variance: f64,
    pub smallest_two_share: f64,
}

impl RawMetrics {
    fn as_array(&self) -> [f64; 4] {
        [self.f1, self.fraction, self.share_variance, self.smallest_two_share]
    }
}

/// The two origins with the fewest true labels in the full sample
/// (lowest index on ties).
pub fn smallest_two_classes(samples: &[EvaluatedSample], classes: usize) -> [usize; 2] {
    let mut counts = vec![0usize; classes];
    for s in samples {
        counts[s.truth] += 1;
    }
    let mut order: Vec<usize> = (0..classes).collect();
    order.sort_by_key(|&k| (counts[k], k));
    [order[0], order[1]]
}

/// Raw metrics of one subset; `None` when it is empty.
pub fn raw_metrics(
    samples: &[EvaluatedSample],
    subset: &[usize],
    baseline_size: usize,
    classes: usize,
    smallest_two: [usize; 2],
) -> Result<Option<RawMetrics>> {
    if subset.is_empty() {
        return Ok(None);
    }
    let truth: Vec<usize> = subset.iter().map(|&i| samples[i].truth).collect();
    let predicted: Vec<usize> = subset.iter().map(|&i| samples[i].predicted).collect();
    let f1 = scores(&confusion_from_classes(&truth, &predicted, classes)?)?.overall.f1;

    let mut counts = vec![0usize; classes];
    for &t in &truth {
        counts[t] += 1;
    }
    let n = subset.len() as f64;
    let shares: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let mean = 1.0 / classes as f64;
    let share_variance = shares.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / classes as f64;
    Ok(Some(RawMetrics {
        f1,
        fraction: subset.len() as f64 / baseline_size as f64,
        share_variance,
        smallest_two_share: shares[smallest_two[0]] + shares[smallest_two[1]],
    }))
}

/// Per-metric min and max over the non-empty combos.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricRanges {
    pub min: [f64; 4],
    pub max: [f64; 4],
}

impl MetricRanges {
    pub fn from_raw<'a>(raw: impl IntoIterator<Item = &'a RawMetrics>) -> Option<Self> {
        let mut ranges: Option<MetricRanges> = None;
        for r in raw {
            let a = r.as_array();
            let m = ranges.get_or_insert(MetricRanges { min: a, max: a });
            for (j, v) in a.into_iter().enumerate() {
                m.min[j] = m.min[j].min(v);
                m.max[j] = m.max[j].max(v);
            }
        }
        ranges
    }

    /// Scaled to [0, 1] with higher meaning better; variance is inverted.
    pub fn standardize(&self, raw: &RawMetrics) -> [f64; 4] {
        let a = raw.as_array();
        let mut out = [0.0; 4];
        for j in 0..4 {
            let span = self.max[j] - self.min[j];
            out[j] = if span <= 0.0 {
                DEGENERATE_SCALE
            } else {
                ((a[j] - self.min[j]) / span).clamp(0.0, 1.0)
            };
        }
        if self.max[2] > self.min[2] {
            out[2] = 1.0 - out[2];
        }
        out
    }
}

/// Weighted score of one combo; empty subsets score 0.
pub fn score_combo(raw: Option<&RawMetrics>, ranges: Option<&MetricRanges>, weights: &Weights) -> f64 {
    match (raw, ranges) {
        (Some(r), Some(m)) => weights.apply(&m.standardize(r)),
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComboEvaluation {
    pub combo: ThresholdCombo,
    pub retained: usize,
    pub raw: Option<RawMetrics>,
    pub standardized: Option<[f64; 4]>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub baseline_size: usize,
    pub weights: Weights,
    pub smallest_two: [usize; 2],
    pub ranges: Option<MetricRanges>,
    /// in grid order
    pub combos: Vec<ComboEvaluation>,
    /// combo indices, best first
    pub ranking: Vec<usize>,
}

impl GridReport {
    pub fn best(&self) -> Option<&ComboEvaluation> {
        self.ranking.first().map(|&i| &self.combos[i])
    }

    /// 1-based rank of each combo under the report's weights.
    pub fn rank_of(&self, index: usize) -> Option<usize> {
        self.ranking.iter().position(|&i| i == index).map(|p| p + 1)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| Error::Parse {
            line: 0,
            message: e.to_string(),
        };
        wtr.write_record([
            "index", "rank", "min_p_h", "min_delta", "max_entropy", "retained", "f1", "fraction",
            "share_variance", "smallest_two_share", "scaled_f1", "scaled_fraction",
            "scaled_variance", "scaled_smallest_two", "score",
        ])
        .map_err(err)?;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_else(|| "None".into());
        for (i, c) in self.combos.iter().enumerate() {
            let mut row = vec![
                i.to_string(),
                self.rank_of(i).unwrap_or(0).to_string(),
                opt(c.combo.min_p_h),
                opt(c.combo.min_delta),
                opt(c.combo.max_entropy),
                c.retained.to_string(),
            ];
            let raw = c.raw.map(|r| r.as_array());
            row.extend((0..4).map(|j| raw.map(|a| format!("{:.10}", a[j])).unwrap_or_default()));
            row.extend((0..4).map(|j| c.standardized.map(|a| format!("{:.10}", a[j])).unwrap_or_default()));
            row.push(format!("{:.10}", c.score));
            wtr.write_record(&row).map_err(err)?;
        }
        wtr.flush().map_err(|e| Error::io("<grid csv>", e))
    }
}

/// Best first: higher score, then higher retained fraction, then grid order.
pub fn rank_order(scores: &[f64], fractions: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then(fractions[b].total_cmp(&fractions[a]))
            .then(a.cmp(&b))
    });
    order
}

fn fractions(combos: &[ComboEvaluation]) -> Vec<f64> {
    combos.iter().map(|c| c.raw.map_or(0.0, |r| r.fraction)).collect()
}

/// Scores every combo on `samples` and ranks them.
pub fn evaluate_grid(
    samples: &[EvaluatedSample],
    combos: &[ThresholdCombo],
    baseline_size: usize,
    classes: usize,
    weights: Weights,
) -> Result<GridReport> {
    if baseline_size == 0 {
        return Err(Error::InvalidConfig("baseline size must be >= 1".into()));
    }
    if classes < 2 {
        return Err(Error::InvalidConfig("need at least 2 classes".into()));
    }
    if let Some(s) = samples.iter().find(|s| s.truth >= classes || s.predicted >= classes) {
        return Err(Error::LabelOutOfRange {
            label: s.truth.max(s.predicted),
            classes,
        });
    }
    let smallest_two = smallest_two_classes(samples, classes);
    let metrics: Vec<ConfidenceMetrics> = samples.iter().map(|s| s.metrics).collect();
    let mut evaluated = Vec::with_capacity(combos.len());
    for combo in combos {
        let subset = apply_combo(&metrics, combo);
        let raw = raw_metrics(samples, &subset, baseline_size, classes, smallest_two)?;
        evaluated.push((*combo, subset.len(), raw));
    }
    let ranges = MetricRanges::from_raw(evaluated.iter().filter_map(|(_, _, r)| r.as_ref()));
    let combos: Vec<ComboEvaluation> = evaluated
        .into_iter()
        .map(|(combo, retained, raw)| ComboEvaluation {
            combo,
            retained,
            standardized: raw.as_ref().zip(ranges.as_ref()).map(|(r, m)| m.standardize(r)),
            score: score_combo(raw.as_ref(), ranges.as_ref(), &weights),
            raw,
        })
        .collect();
    let scores: Vec<f64> = combos.iter().map(|c| c.score).collect();
    let ranking = rank_order(&scores, &fractions(&combos));
    Ok(GridReport {
        baseline_size,
        weights,
        smallest_two,
        ranges,
        combos,
        ranking,
    })
}

/// The top-ranked combo of the report.
pub fn select_best(report: &GridReport) -> Option<ThresholdCombo> {
    report.best().map(|c| c.combo)
}

/// Rank (1 = best) of combo `target` when the grid is re-scored under each
/// weight scheme.
pub fn robustness_ranks(report: &GridReport, schemes: &[Weights], target: usize) -> Result<Vec<usize>> {
    if target >= report.combos.len() {
        return Err(Error::InvalidConfig(format!(
            "combo {target} is outside a grid of {}",
            report.combos.len()
        )));
    }
    let fractions = fractions(&report.combos);
    schemes
        .iter()
        .map(|w| {
            let w = Weights::new(w.values())?;
            let scores: Vec<f64> = report
                .combos
                .iter()
                .map(|c| c.standardized.map_or(0.0, |s| w.apply(&s)))
                .collect();
            let order = rank_order(&scores, &fractions);
            Ok(order.iter().position(|&i| i == target).expect("target in grid") + 1)
        })
        .collect()
}
