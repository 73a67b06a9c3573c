//! Leaf-nationality vectors and the manual leaf → origin crosswalk.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::argmax;
use crate::taxonomy::Taxonomy;

pub const LEAF_COUNT: usize = 39;

/// Tolerance on the probability simplex for ingested vectors.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// Leaf → origin rows of the published crosswalk, in published order.
/// Origins use the default taxonomy's class names.
const CROSSWALK_ROWS: [(&str, &str); 31] = [
    ("Celtic-English", "Anglo-Saxon"),
    ("Muslim, Pakistanis, Bangladesh", "Arabic"),
    ("Muslim, Maghreb", "Arabic"),
    ("Muslim, Pakistanis, Pakistan", "Arabic"),
    ("Muslim, ArabianPeninsula", "Arabic"),
    ("European, SouthSlavs", "Balkans"),
    ("EastAsian, Chinese", "Chinese"),
    ("European, Baltics", "East-Europe"),
    ("European, EastEuropean", "East-Europe"),
    ("European, French", "French"),
    ("European, German", "German"),
    ("Hispanic, Portuguese", "Hispanic-Iberian"),
    ("Hispanic, Spanish", "Hispanic-Iberian"),
    ("SouthAsian", "India"),
    ("European, Italian, Italy", "Italian"),
    ("European, Italian, Romania", "Italian"),
    ("EastAsian, Japan", "Japanese"),
    ("EastAsian, South Korea", "Korean"),
    ("Muslim, Persian", "Persian"),
    ("Nordic, Scandinavian, Denmark", "Scandinavian"),
    ("Nordic, Finland", "Scandinavian"),
    ("Nordic, Scandinavian, Sweden", "Scandinavian"),
    ("Nordic, Scandinavian, Norway", "Scandinavian"),
    ("European, Russian", "Slavic-Russian"),
    ("EastAsian, Indochina, Thailand", "South-East Asia"),
    ("EastAsian, Indochina, Vietnam", "South-East Asia"),
    ("EastAsian, Indochina, Cambodia", "South-East Asia"),
    ("EastAsian, Indochina, Myanmar", "South-East Asia"),
    ("EastAsian, Malay, Malaysia", "South-East Asia"),
    ("EastAsian, Malay, Indonesia", "South-East Asia"),
    ("Muslim, Turkic, Turkey", "Turkish"),
];

/// Leaves with no crosswalk entry.
const UNMAPPED_LEAVES: [&str; 8] = [
    "Greek",
    "Jewish",
    "Muslim, Nubian",
    "Muslim, Turkic, CentralAsian",
    "Hispanic, Philippines",
    "African, EastAfrican",
    "African, WestAfrican",
    "African, SouthAfrican",
];

/// All 39 leaf names: crosswalk rows first, then the unmapped leaves.
pub fn leaf_names() -> Vec<&'static str> {
    CROSSWALK_ROWS
        .iter()
        .map(|(leaf, _)| *leaf)
        .chain(UNMAPPED_LEAVES)
        .collect()
}

pub fn leaf_index(name: &str) -> Option<usize> {
    leaf_names().iter().position(|l| *l == name)
}

/// One name's leaf-nationality probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafVector {
    pub name: String,
    pub label: Option<usize>,
    probs: Vec<f64>,
}

impl LeafVector {
    /// Checks the 39 entries lie in `[0, 1]` and sum to 1 within
    /// [`SIMPLEX_TOLERANCE`].
    pub fn new(name: impl Into<String>, label: Option<usize>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != LEAF_COUNT {
            return Err(Error::shape(format!("{LEAF_COUNT} leaf probabilities"), probs.len()));
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidWeights(format!(
                "leaf probabilities must lie on the simplex (sum {sum})"
            )));
        }
        Ok(LeafVector {
            name: name.into(),
            label,
            probs,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Leaf → origin assignment; unmapped leaves hold `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Crosswalk {
    targets: Vec<Option<usize>>,
    classes: usize,
}

impl Crosswalk {
    /// The published crosswalk resolved against `taxonomy`.
    pub fn published(taxonomy: &Taxonomy) -> Result<Self> {
        let mut targets = vec![None; LEAF_COUNT];
        for (i, (_, origin)) in CROSSWALK_ROWS.iter().enumerate() {
            let k = taxonomy
                .index_of(origin)
                .ok_or_else(|| Error::UnknownOrigin(origin.to_string()))?;
            targets[i] = Some(k);
        }
        Ok(Crosswalk {
            targets,
            classes: taxonomy.len(),
        })
    }

    pub fn from_targets(targets: Vec<Option<usize>>, classes: usize) -> Result<Self> {
        if targets.len() != LEAF_COUNT {
            return Err(Error::shape(format!("{LEAF_COUNT} leaves"), targets.len()));
        }
        if let Some(&label) = targets.iter().flatten().find(|&&k| k >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        Ok(Crosswalk { targets, classes })
    }

    pub fn target(&self, leaf: usize) -> Option<usize> {
        self.targets.get(leaf).copied().flatten()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn mapped_count(&self) -> usize {
        self.targets.iter().flatten().count()
    }

    /// Leaves mapped to `origin`, ascending.
    pub fn leaves_of(&self, origin: usize) -> Vec<usize> {
        (0..LEAF_COUNT).filter(|&l| self.target(l) == Some(origin)).collect()
    }

    /// Origin of the most probable leaf, falling back to the most probable
    /// mapped leaf. Leaf ties go to the lower leaf index.
    pub fn highest(&self, leaf: &LeafVector) -> Result<usize> {
        if let Some(k) = self.target(argmax(leaf.probs())) {
            return Ok(k);
        }
        let mut best: Option<(usize, f64)> = None;
        for (l, &p) in leaf.probs().iter().enumerate() {
            if self.target(l).is_some() && p > 0.0 && best.is_none_or(|(_, b)| p > b) {
                best = Some((l, p));
            }
        }
        best.and_then(|(l, _)| self.target(l)).ok_or(Error::Unclassifiable)
    }

    /// Sums leaf mass per origin, renormalized over the mapped mass; returns
    /// the argmax (lowest index on ties) and the grouped vector.
    pub fn grouped(&self, leaf: &LeafVector) -> Result<(usize, Vec<f64>)> {
        let mut grouped = vec![0.0; self.classes];
        for (l, &p) in leaf.probs().iter().enumerate() {
            if let Some(k) = self.target(l) {
                grouped[k] += p;
            }
        }
        let mass: f64 = grouped.iter().sum();
        if mass <= 0.0 {
            return Err(Error::Unclassifiable);
        }
        for g in &mut grouped {
            *g /= mass;
        }
        Ok((argmax(&grouped), grouped))
    }
}

/// Reads `name,label?,<39 leaf columns>`. Leaf columns are matched by
/// header name in any order; an empty or missing label means unlabeled.
pub fn read_leaf_csv<R: Read>(reader: R, taxonomy: &Taxonomy) -> Result<Vec<LeafVector>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let parse = |line: usize, message: String| Error::Parse { line, message };
    let headers = rdr.headers().map_err(|e| parse(1, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let name_col = col("name").ok_or_else(|| parse(1, "missing `name` column".into()))?;
    let label_col = col("label");
    let leaf_cols = leaf_names()
        .iter()
        .map(|leaf| col(leaf).ok_or_else(|| parse(1, format!("missing leaf column `{leaf}`"))))
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse(line, e.to_string()))?;
        let label = match label_col.map(|c| record[c].trim()) {
            None | Some("") => None,
            Some(l) => Some(taxonomy.index_of(l).ok_or_else(|| Error::UnknownLabel {
                line,
                label: l.to_string(),
            })?),
        };
        let probs = leaf_cols
            .iter()
            .map(|&c| {
                record[c]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| parse(line, format!("column {}: {e}", &headers[c])))
            })
            .collect::<Result<Vec<_>>>()?;
        let v = LeafVector::new(&record[name_col], label, probs)
            .map_err(|e| parse(line, e.to_string()))?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok(out)
}

pub fn load_leaf_csv(path: impl AsRef<Path>, taxonomy: &Taxonomy) -> Result<Vec<LeafVector>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_leaf_csv(file, taxonomy)
}

pub fn write_leaf_csv<W: std::io::Write>(writer: W, data: &[LeafVector], taxonomy: &Taxonomy) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Parse {
        line: 0,
        message: e.to_string(),
    };
    let mut header = vec!["name", "label"];
    header.extend(leaf_names());
    wtr.write_record(&header).map_err(err)?;
    for v in data {
        let mut row = vec![
            v.name.clone(),
            v.label
                .and_then(|k| taxonomy.name(k))
                .unwrap_or_default()
                .to_string(),
        ];
        row.extend(v.probs().iter().map(|p| format!("{p:.17e}")));
        wtr.write_record(&row).map_err(err)?;
    }
    wtr.flush().map_err(|e| Error::io("<leaf csv>", e))
}
