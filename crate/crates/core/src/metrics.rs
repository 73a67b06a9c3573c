//! Confusion matrices and per-class / support-weighted precision, recall
//! and F1.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{argmax, ProbVector};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn add(&mut self, truth: usize, predicted: usize) -> Result<()> {
        for label in [truth, predicted] {
            if label >= self.classes {
                return Err(Error::LabelOutOfRange {
                    label,
                    classes: self.classes,
                });
            }
        }
        self.counts[truth * self.classes + predicted] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..self.classes).map(|p| self.get(truth, p)).sum()
    }

    pub fn column_sum(&self, predicted: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, predicted)).sum()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks_exact(self.classes.max(1))
    }
}

/// Tallies (true, argmax) pairs; argmax ties go to the lowest index.
pub fn confusion(labels: &[usize], predictions: &[ProbVector], classes: usize) -> Result<ConfusionMatrix> {
    if labels.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: predictions.len(),
        });
    }
    for p in predictions {
        if p.len() != classes {
            return Err(Error::shape(format!("{classes} probabilities"), p.len()));
        }
    }
    let predicted: Vec<usize> = predictions.iter().map(ProbVector::argmax).collect();
    confusion_from_classes(labels, &predicted, classes)
}

/// Same as [`confusion`] for raw probability rows.
pub fn confusion_from_rows(labels: &[usize], rows: &[Vec<f64>], classes: usize) -> Result<ConfusionMatrix> {
    if labels.len() != rows.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: rows.len(),
        });
    }
    let predicted: Vec<usize> = rows.iter().map(|r| argmax(r)).collect();
    confusion_from_classes(labels, &predicted, classes)
}

pub fn confusion_from_classes(labels: &[usize], predicted: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if labels.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::new(classes);
    for (&t, &p) in labels.iter().zip(predicted) {
        cm.add(t, p)?;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub per_class: Vec<ClassScore>,
    /// support-weighted averages; `support` is the sample count
    pub overall: ClassScore,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean with 0/0 taken as 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn scores(cm: &ConfusionMatrix) -> Result<ClassMetrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let per_class: Vec<ClassScore> = (0..cm.classes())
        .map(|k| {
            let diag = cm.get(k, k);
            let precision = ratio(diag, cm.column_sum(k));
            let recall = ratio(diag, cm.row_sum(k));
            ClassScore {
                precision,
                recall,
                f1: f1(precision, recall),
                support: cm.row_sum(k),
            }
        })
        .collect();
    let weighted = |f: fn(&ClassScore) -> f64| {
        per_class.iter().map(|s| s.support as f64 * f(s)).sum::<f64>() / total as f64
    };
    let overall = ClassScore {
        precision: weighted(|s| s.precision),
        recall: weighted(|s| s.recall),
        f1: weighted(|s| s.f1),
        support: total,
    };
    Ok(ClassMetrics { per_class, overall })
}

/// Writes `class,precision,recall,f1,support` rows plus a final
/// `__overall__` row.
pub fn write_report<W: Write, S: AsRef<str>>(writer: W, metrics: &ClassMetrics, class_names: &[S]) -> Result<()> {
    if class_names.len() != metrics.per_class.len() {
        return Err(Error::LengthMismatch {
            left: class_names.len(),
            right: metrics.per_class.len(),
        });
    }
    let mut wtr = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Parse {
        line: 0,
        message: e.to_string(),
    };
    wtr.write_record(["class", "precision", "recall", "f1", "support"])
        .map_err(err)?;
    let rows = class_names
        .iter()
        .map(AsRef::as_ref)
        .zip(&metrics.per_class)
        .chain(std::iter::once(("__overall__", &metrics.overall)));
    for (name, s) in rows {
        wtr.write_record([
            name.to_string(),
            format!("{:.6}", s.precision),
            format!("{:.6}", s.recall),
            format!("{:.6}", s.f1),
            s.support.to_string(),
        ])
        .map_err(err)?;
    }
    wtr.flush().map_err(|e| Error::io("<report csv>", e))
}
