//! Labeled-name corpora: CSV ingestion, the three-way split, stratified
//! sampling and class distributions.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec;
use crate::error::{Error, Result};
use crate::taxonomy::Taxonomy;

/// Where a label came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// observed labels (national-team athletes)
    #[default]
    Athletes,
    PseudoLabeled,
    Synthetic,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Athletes => "athletes",
            Source::PseudoLabeled => "pseudo_labeled",
            Source::Synthetic => "synthetic",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "athletes" => Some(Source::Athletes),
            "pseudo_labeled" => Some(Source::PseudoLabeled),
            "synthetic" => Some(Source::Synthetic),
            _ => None,
        }
    }
}

/// Anything carrying a class index.
pub trait Labeled {
    fn label(&self) -> usize;
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabeledName {
    pub name: String,
    pub label: usize,
    pub source: Source,
}

impl Labeled for LabeledName {
    fn label(&self) -> usize {
        self.label
    }
}

impl Labeled for usize {
    fn label(&self) -> usize {
        *self
    }
}

/// Drops rows of `country` whose year is `from_year` or later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionRule {
    pub country: String,
    pub from_year: i32,
}

/// Optional row filter applied while loading, for corpora that carry
/// extra country and year columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestFilter {
    pub country_column: String,
    pub year_column: String,
    pub exclude: Vec<ExclusionRule>,
}

impl Default for IngestFilter {
    fn default() -> Self {
        IngestFilter {
            country_column: "country".into(),
            year_column: "year".into(),
            exclude: Vec::new(),
        }
    }
}

/// Reads a `name,label[,source]` CSV.
pub fn load_labeled_csv(path: impl AsRef<Path>, taxonomy: &Taxonomy) -> Result<Vec<LabeledName>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_labeled_csv(file, taxonomy, None)
}

pub fn load_labeled_csv_filtered(
    path: impl AsRef<Path>,
    taxonomy: &Taxonomy,
    filter: &IngestFilter,
) -> Result<Vec<LabeledName>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_labeled_csv(file, taxonomy, Some(filter))
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

pub fn read_labeled_csv<R: Read>(
    reader: R,
    taxonomy: &Taxonomy,
    filter: Option<&IngestFilter>,
) -> Result<Vec<LabeledName>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let name_col = column("name").ok_or(Error::Parse {
        line: 1,
        message: "missing `name` column".into(),
    })?;
    let label_col = column("label").ok_or(Error::Parse {
        line: 1,
        message: "missing `label` column".into(),
    })?;
    let source_col = column("source");
    let filter_cols = match filter {
        Some(f) if !f.exclude.is_empty() => {
            let c = column(&f.country_column).ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("missing `{}` column required by filter", f.country_column),
            })?;
            let y = column(&f.year_column).ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("missing `{}` column required by filter", f.year_column),
            })?;
            Some((f, c, y))
        }
        _ => None,
    };

    let mut out = Vec::new();
    let mut seen = 0usize;
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        seen += 1;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(seen + 1);
        let field = |i: usize| record.get(i).unwrap_or("");

        if let Some((f, c, y)) = filter_cols {
            let year: i32 = field(y).trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid year {:?}", field(y)),
            })?;
            let country = field(c).trim();
            if f.exclude
                .iter()
                .any(|r| r.country == country && year >= r.from_year)
            {
                continue;
            }
        }

        let name = field(name_col).to_string();
        codec::normalize(&name).map_err(|_| Error::Parse {
            line,
            message: format!("name {name:?} has no letters"),
        })?;
        let label_text = field(label_col).trim();
        let label = taxonomy.index_of(label_text).ok_or_else(|| Error::UnknownLabel {
            line,
            label: label_text.to_string(),
        })?;
        let source = match source_col.map(field).map(str::trim) {
            None | Some("") => Source::default(),
            Some(s) => Source::parse(s).ok_or_else(|| Error::Parse {
                line,
                message: format!("unknown source {s:?}"),
            })?,
        };
        out.push(LabeledName { name, label, source });
    }
    if seen == 0 {
        return Err(Error::EmptyFile);
    }
    Ok(out)
}

pub fn write_labeled_csv<W: Write>(writer: W, data: &[LabeledName], taxonomy: &Taxonomy) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Parse {
        line: 0,
        message: e.to_string(),
    };
    wtr.write_record(["name", "label", "source"]).map_err(io)?;
    for row in data {
        let label = taxonomy.name(row.label).ok_or(Error::LabelOutOfRange {
            label: row.label,
            classes: taxonomy.len(),
        })?;
        wtr.write_record([row.name.as_str(), label, row.source.as_str()])
            .map_err(io)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    /// validation share of what remains after the test cut
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: 0.10,
            validation_fraction: 0.15,
            seed: 42,
        }
    }
}

/// `ceil(fraction * n)`, treating products within 1e-9 of an integer as
/// that integer so that decimal fractions like 0.15 behave exactly.
pub fn ceil_share(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Split sizes `(train, validation, test)` for `n` samples.
pub fn split_sizes(n: usize, spec: &SplitSpec) -> (usize, usize, usize) {
    let test = ceil_share(spec.test_fraction, n).min(n);
    let validation = ceil_share(spec.validation_fraction, n - test).min(n - test);
    (n - test - validation, validation, test)
}

/// Seeded shuffle, then a test cut and a validation cut of the remainder,
/// both rounded up.
pub fn split<T: Clone>(data: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    for f in [spec.test_fraction, spec.validation_fraction] {
        if !(0.0..1.0).contains(&f) {
            return Err(Error::InvalidConfig(format!("split fraction {f} not in [0, 1)")));
        }
    }
    if data.len() < 3 {
        return Err(Error::TooFewSamples(data.len()));
    }
    let (_, n_val, n_test) = split_sizes(data.len(), spec);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| data[i].clone()).collect::<Vec<_>>();
    let test = pick(&order[..n_test]);
    let validation = pick(&order[n_test..n_test + n_val]);
    let train = pick(&order[n_test + n_val..]);
    Ok((train, validation, test))
}

/// Up to `per_class_target` items of every class, drawn uniformly without
/// replacement. Output is grouped by ascending class index.
pub fn stratified_sample<T: Labeled + Clone>(data: &[T], per_class_target: usize, seed: u64) -> Vec<T> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, item) in data.iter().enumerate() {
        by_class.entry(item.label()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (_, mut members) in by_class {
        members.shuffle(&mut rng);
        members.truncate(per_class_target);
        members.sort_unstable();
        out.extend(members.into_iter().map(|i| data[i].clone()));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassShare {
    pub class: String,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassDistribution {
    pub total: usize,
    pub classes: Vec<ClassShare>,
}

impl ClassDistribution {
    pub fn get(&self, class: &str) -> Option<&ClassShare> {
        self.classes.iter().find(|c| c.class == class)
    }
}

/// Per-class counts and fractions; every taxonomy class is listed unless
/// the data is empty.
pub fn class_distribution<T: Labeled>(data: &[T], taxonomy: &Taxonomy) -> ClassDistribution {
    if data.is_empty() {
        return ClassDistribution::default();
    }
    let mut counts = vec![0usize; taxonomy.len()];
    for item in data {
        if let Some(c) = counts.get_mut(item.label()) {
            *c += 1;
        }
    }
    let total: usize = counts.iter().sum();
    ClassDistribution {
        total,
        classes: counts
            .iter()
            .enumerate()
            .map(|(k, &count)| ClassShare {
                class: taxonomy.name(k).unwrap_or_default().to_string(),
                count,
                fraction: count as f64 / total as f64,
            })
            .collect(),
    }
}

/// Class counts of the 95,202-name training corpus, in default taxonomy order.
pub const REFERENCE_DISTRIBUTION: [(&str, usize); 17] = [
    ("Anglo-Saxon", 7_933),
    ("Arabic", 3_795),
    ("Balkans", 2_320),
    ("Chinese", 6_567),
    ("East-Europe", 6_820),
    ("French", 7_737),
    ("German", 6_311),
    ("Hispanic-Iberian", 6_383),
    ("India", 4_205),
    ("Italian", 6_171),
    ("Japanese", 8_835),
    ("Korean", 5_917),
    ("Persian", 1_614),
    ("Scandinavian", 6_938),
    ("Slavic-Russian", 6_357),
    ("South-East Asia", 2_895),
    ("Turkish", 4_404),
];

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const FIXTURE: &str = "name,label,source\n\
        Mahatma Gandhi,India,athletes\n\
        \"Smith, John\",Anglo-Saxon,\n\
        Yuki Tanaka,Japanese,pseudo_labeled\n";

    #[test]
    fn reads_three_rows() {
        let t = Taxonomy::default();
        let rows = read_labeled_csv(FIXTURE.as_bytes(), &t, None).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].label, 8);
        assert_eq!(rows[1].name, "Smith, John");
        assert_eq!(rows[1].source, Source::Athletes);
        assert_eq!(rows[2].source, Source::PseudoLabeled);
    }

    #[test]
    fn unknown_label_reports_line() {
        let t = Taxonomy::default();
        let csv = "name,label\nJohn Smith,Anglo-Saxon\nNemo,Atlantis\n";
        match read_labeled_csv(csv.as_bytes(), &t, None) {
            Err(Error::UnknownLabel { line, label }) => {
                assert_eq!(line, 3);
                assert_eq!(label, "Atlantis");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_only_is_empty() {
        let t = Taxonomy::default();
        assert!(matches!(
            read_labeled_csv("name,label\n".as_bytes(), &t, None),
            Err(Error::EmptyFile)
        ));
        assert!(matches!(
            read_labeled_csv("label\nGerman\n".as_bytes(), &t, None),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            read_labeled_csv("name,label\n123,German\n".as_bytes(), &t, None),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn duplicates_are_kept() {
        let t = Taxonomy::default();
        let csv = "name,label\nAnna Berg,German\nAnna Berg,German\n";
        assert_eq!(read_labeled_csv(csv.as_bytes(), &t, None).unwrap().len(), 2);
    }

    #[test]
    fn olympic_style_filter() {
        let t = Taxonomy::default();
        let csv = "name,label,country,year\n\
            Jean Dupont,French,France,1964\n\
            Marie Curie,French,France,1972\n\
            Hans Meier,German,Germany,1980\n\
            Karl Huber,German,Germany,1984\n\
            Ivan Petrov,Slavic-Russian,Russia,2012\n";
        let filter = IngestFilter {
            exclude: vec![
                ExclusionRule { country: "France".into(), from_year: 1970 },
                ExclusionRule { country: "Germany".into(), from_year: 1981 },
            ],
            ..Default::default()
        };
        let rows = read_labeled_csv(csv.as_bytes(), &t, Some(&filter)).unwrap();
        let names: Vec<_> = rows.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["Jean Dupont", "Hans Meier", "Ivan Petrov"]);
    }

    #[test]
    fn write_then_read() {
        let t = Taxonomy::default();
        let rows = read_labeled_csv(FIXTURE.as_bytes(), &t, None).unwrap();
        let mut buf = Vec::new();
        write_labeled_csv(&mut buf, &rows, &t).unwrap();
        assert_eq!(read_labeled_csv(buf.as_slice(), &t, None).unwrap(), rows);
    }

    #[test]
    fn published_split_sizes() {
        assert_eq!(split_sizes(95_202, &SplitSpec::default()), (72_828, 12_853, 9_521));
    }

    #[test]
    fn small_split_by_hand() {
        // test = ceil(1.0) = 1, validation = ceil(0.15 * 9 = 1.35) = 2, train = 7
        assert_eq!(split_sizes(10, &SplitSpec::default()), (7, 2, 1));
        let data: Vec<usize> = (0..10).collect();
        let (tr, va, te) = split(&data, &SplitSpec::default()).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (7, 2, 1));
    }

    #[test]
    fn zero_fractions_keep_everything_in_train() {
        let spec = SplitSpec {
            test_fraction: 0.0,
            validation_fraction: 0.0,
            seed: 1,
        };
        let data: Vec<usize> = (0..5).collect();
        let (tr, va, te) = split(&data, &spec).unwrap();
        assert_eq!(tr.len(), 5);
        assert!(va.is_empty() && te.is_empty());
    }

    #[test]
    fn split_needs_three_samples() {
        assert!(matches!(
            split(&[1usize, 2], &SplitSpec::default()),
            Err(Error::TooFewSamples(2))
        ));
    }

    #[test]
    fn stratified_caps_each_class() {
        let data: Vec<usize> = (0..30).map(|i| i % 3).chain([0, 0]).collect();
        let s = stratified_sample(&data, 5, 9);
        assert_eq!(s.len(), 15);
        assert_eq!(stratified_sample(&data, 1, 9), vec![0, 1, 2]);
        assert_eq!(stratified_sample(&data, 100, 9).len(), data.len());
        assert_eq!(stratified_sample(&data, 5, 9), s);
    }

    #[test]
    fn reference_distribution_totals() {
        let t = Taxonomy::default();
        let data: Vec<usize> = REFERENCE_DISTRIBUTION
            .iter()
            .enumerate()
            .flat_map(|(k, &(name, n))| {
                assert_eq!(t.name(k), Some(name));
                std::iter::repeat_n(k, n)
            })
            .collect();
        let d = class_distribution(&data, &t);
        assert_eq!(d.total, 95_202);
        let anglo = d.get("Anglo-Saxon").unwrap();
        assert_eq!(anglo.count, 7_933);
        assert_eq!((anglo.fraction * 1000.0).round() / 1000.0, 0.083);
        let sum: f64 = d.classes.iter().map(|c| c.fraction).sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_distributions() {
        let t = Taxonomy::default();
        assert_eq!(class_distribution::<usize>(&[], &t), ClassDistribution::default());
        let d = class_distribution(&[4usize, 4, 4], &t);
        assert_eq!(d.classes[4].fraction, 1.0);
    }
}
