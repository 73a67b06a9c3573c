//! Confidence metrics of a class-probability vector and the threshold grid
//! used to keep only clearly classified samples.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceMetrics {
    /// highest probability
    pub p_h: f64,
    /// highest minus second highest
    pub delta: f64,
    /// Shannon entropy, natural log, 0·ln 0 = 0
    pub entropy: f64,
}

pub fn confidence(p: &[f64]) -> ConfidenceMetrics {
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &v in p {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    if second == f64::NEG_INFINITY {
        second = 0.0;
    }
    let entropy = -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>();
    ConfidenceMetrics {
        p_h: first,
        delta: first - second,
        entropy: entropy.max(0.0),
    }
}

/// One grid cell; `None` leaves that metric unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThresholdCombo {
    pub min_p_h: Option<f64>,
    pub min_delta: Option<f64>,
    pub max_entropy: Option<f64>,
}

impl ThresholdCombo {
    /// Inclusive on every bound.
    pub fn accepts(&self, m: &ConfidenceMetrics) -> bool {
        self.min_p_h.is_none_or(|t| m.p_h >= t)
            && self.min_delta.is_none_or(|t| m.delta >= t)
            && self.max_entropy.is_none_or(|t| m.entropy <= t)
    }

    /// True when every constraint of `self` is at least as strict as the
    /// matching one in `other`.
    pub fn at_least_as_strict_as(&self, other: &ThresholdCombo) -> bool {
        let lower = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(a), Some(b)) => a >= b,
        };
        let upper = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(a), Some(b)) => a <= b,
        };
        lower(self.min_p_h, other.min_p_h)
            && lower(self.min_delta, other.min_delta)
            && upper(self.max_entropy, other.max_entropy)
    }
}

impl fmt::Display for ThresholdCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: Option<f64>| v.map_or("None".to_string(), |v| v.to_string());
        write!(
            f,
            "P_h>={} delta>={} E<={}",
            show(self.min_p_h),
            show(self.min_delta),
            show(self.max_entropy)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdSets {
    pub min_p_h: Vec<Option<f64>>,
    pub min_delta: Vec<Option<f64>>,
    pub max_entropy: Vec<Option<f64>>,
}

impl Default for ThresholdSets {
    fn default() -> Self {
        ThresholdSets {
            min_p_h: vec![None, Some(0.45), Some(0.50), Some(0.55), Some(0.60), Some(0.65), Some(0.70)],
            min_delta: vec![None, Some(0.2), Some(0.3), Some(0.4), Some(0.5)],
            max_entropy: vec![Some(1.75), Some(2.0), None],
        }
    }
}

/// Cartesian product, P_h-major, then delta, then entropy.
pub fn grid(sets: &ThresholdSets) -> Vec<ThresholdCombo> {
    let mut out = Vec::with_capacity(sets.min_p_h.len() * sets.min_delta.len() * sets.max_entropy.len());
    for &min_p_h in &sets.min_p_h {
        for &min_delta in &sets.min_delta {
            for &max_entropy in &sets.max_entropy {
                out.push(ThresholdCombo {
                    min_p_h,
                    min_delta,
                    max_entropy,
                });
            }
        }
    }
    out
}

/// Indices of the samples that pass `combo`, in input order.
pub fn apply_combo(metrics: &[ConfidenceMetrics], combo: &ThresholdCombo) -> Vec<usize> {
    metrics
        .iter()
        .enumerate()
        .filter(|(_, m)| combo.accepts(m))
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_and_uniform() {
        let m = confidence(&[0.0, 1.0, 0.0]);
        assert_eq!((m.p_h, m.delta, m.entropy), (1.0, 1.0, 0.0));
        let u = confidence(&[1.0 / 17.0; 17]);
        assert!((u.p_h - 1.0 / 17.0).abs() < 1e-15);
        assert_eq!(u.delta, 0.0);
        assert!((u.entropy - 17f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn delta_by_hand() {
        let mut p = vec![0.65, 0.20, 0.15];
        p.extend([0.0; 14]);
        let m = confidence(&p);
        assert!((m.delta - 0.45).abs() < 1e-15);
    }

    #[test]
    fn default_grid_has_105_distinct_combos() {
        let g = grid(&ThresholdSets::default());
        assert_eq!(g.len(), 105);
        for (i, a) in g.iter().enumerate() {
            assert!(g[i + 1..].iter().all(|b| a != b));
        }
        assert_eq!(g[0], ThresholdCombo { min_p_h: None, min_delta: None, max_entropy: Some(1.75) });
        assert_eq!(g[3].min_delta, Some(0.2));
        assert_eq!(g[15].min_p_h, Some(0.45));
    }

    #[test]
    fn small_grids() {
        let none = ThresholdSets {
            min_p_h: vec![None],
            min_delta: vec![None],
            max_entropy: vec![None],
        };
        assert_eq!(grid(&none), vec![ThresholdCombo::default()]);
        let two = ThresholdSets {
            min_p_h: vec![None, Some(0.5)],
            min_delta: vec![None, Some(0.2)],
            max_entropy: vec![None, Some(2.0)],
        };
        assert_eq!(grid(&two).len(), 8);
    }

    #[test]
    fn bounds_are_inclusive() {
        let m = ConfidenceMetrics { p_h: 0.65, delta: 0.2, entropy: 2.0 };
        let c = ThresholdCombo { min_p_h: Some(0.65), min_delta: Some(0.2), max_entropy: Some(2.0) };
        assert!(c.accepts(&m));
        assert_eq!(apply_combo(&[m], &ThresholdCombo::default()), vec![0]);
    }
}
