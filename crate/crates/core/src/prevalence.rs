//! Origin prevalence over classified inventor records: the mean predicted
//! probability of each origin per group and priority year.
//!
//! Every record counts once, so an inventor on several patents in a year
//! contributes once per patent.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProbVector;
use crate::taxonomy::Taxonomy;

/// One inventor on one patent as read from disk; `prediction` is absent
/// when the file carries no probability columns.
#[derive(Debug, Clone, PartialEq)]
pub struct InventorRow {
    pub inventor_id: String,
    pub name: String,
    pub country: String,
    pub tech_field: String,
    pub priority_year: i32,
    pub prediction: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InventorRecord {
    pub inventor_id: String,
    pub name: String,
    pub country: String,
    pub tech_field: String,
    pub priority_year: i32,
    pub prediction: ProbVector,
}

impl InventorRow {
    pub fn with_prediction(self, prediction: ProbVector) -> InventorRecord {
        InventorRecord {
            inventor_id: self.inventor_id,
            name: self.name,
            country: self.country,
            tech_field: self.tech_field,
            priority_year: self.priority_year,
            prediction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Country,
    TechField,
    /// country → region lookup supplied by the caller
    Region,
    Global,
}

impl GroupBy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "country" => Some(GroupBy::Country),
            "tech_field" => Some(GroupBy::TechField),
            "region" => Some(GroupBy::Region),
            "global" => Some(GroupBy::Global),
            _ => None,
        }
    }
}

/// Label used for the single group of [`GroupBy::Global`].
pub const GLOBAL_GROUP: &str = "global";

/// Per-origin prevalence for one (group, year).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrevalencePoint {
    pub group: String,
    pub year: i32,
    pub values: Vec<f64>,
    pub n: usize,
}

/// One number per (group, year), e.g. a subset sum or a single origin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarPoint {
    pub group: String,
    pub year: i32,
    pub value: f64,
    pub n: usize,
}

fn group_key(record: &InventorRecord, by: GroupBy, regions: &BTreeMap<String, String>) -> Result<String> {
    Ok(match by {
        GroupBy::Country => record.country.clone(),
        GroupBy::TechField => record.tech_field.clone(),
        GroupBy::Global => GLOBAL_GROUP.to_string(),
        GroupBy::Region => regions
            .get(&record.country)
            .cloned()
            .ok_or_else(|| Error::MissingMapping(format!("no region for country {}", record.country)))?,
    })
}

/// Mean prediction per (group, year), sorted by group then year.
/// `regions` is only consulted for [`GroupBy::Region`].
pub fn prevalence(
    records: &[InventorRecord],
    by: GroupBy,
    regions: &BTreeMap<String, String>,
    classes: usize,
) -> Result<Vec<PrevalencePoint>> {
    let mut sums: BTreeMap<(String, i32), (Vec<f64>, usize)> = BTreeMap::new();
    for r in records {
        if r.prediction.len() != classes {
            return Err(Error::shape(format!("{classes} probabilities"), r.prediction.len()));
        }
        let key = (group_key(r, by, regions)?, r.priority_year);
        let (sum, n) = sums.entry(key).or_insert_with(|| (vec![0.0; classes], 0));
        for (s, p) in sum.iter_mut().zip(r.prediction.as_slice()) {
            *s += p;
        }
        *n += 1;
    }
    Ok(sums
        .into_iter()
        .map(|((group, year), (sum, n))| PrevalencePoint {
            group,
            year,
            values: sum.into_iter().map(|s| s / n as f64).collect(),
            n,
        })
        .collect())
}

fn resolve(names: &[&str], taxonomy: &Taxonomy) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| taxonomy.index_of(n).ok_or_else(|| Error::UnknownOrigin(n.to_string())))
        .collect()
}

/// Sum of the listed origins' prevalence per (group, year).
pub fn aggregate_subset(series: &[PrevalencePoint], subset: &[&str], taxonomy: &Taxonomy) -> Result<Vec<ScalarPoint>> {
    let idx = resolve(subset, taxonomy)?;
    Ok(aggregate_indices(series, &idx))
}

pub fn aggregate_indices(series: &[PrevalencePoint], subset: &[usize]) -> Vec<ScalarPoint> {
    series
        .iter()
        .map(|p| ScalarPoint {
            group: p.group.clone(),
            year: p.year,
            value: subset.iter().map(|&k| p.values[k]).sum(),
            n: p.n,
        })
        .collect()
}

/// Prevalence of each group's mapped origin. Every group in `series`
/// needs an entry in `mapping` (group → origin name).
pub fn dominant_series(
    series: &[PrevalencePoint],
    mapping: &BTreeMap<String, String>,
    taxonomy: &Taxonomy,
) -> Result<Vec<ScalarPoint>> {
    series
        .iter()
        .map(|p| {
            let origin = mapping
                .get(&p.group)
                .ok_or_else(|| Error::MissingMapping(format!("no dominant origin for group {}", p.group)))?;
            let k = taxonomy
                .index_of(origin)
                .ok_or_else(|| Error::UnknownOrigin(origin.clone()))?;
            Ok(ScalarPoint {
                group: p.group.clone(),
                year: p.year,
                value: p.values[k],
                n: p.n,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocationSplit {
    pub origin: usize,
    pub year: i32,
    pub domestic: usize,
    pub abroad: usize,
}

impl LocationSplit {
    pub fn domestic_share(&self) -> f64 {
        let n = self.domestic + self.abroad;
        if n == 0 {
            0.0
        } else {
            self.domestic as f64 / n as f64
        }
    }

    pub fn abroad_share(&self) -> f64 {
        let n = self.domestic + self.abroad;
        if n == 0 {
            0.0
        } else {
            self.abroad as f64 / n as f64
        }
    }
}

/// Counts inventors whose most probable origin is one of `origins`, split
/// by whether they reside in that origin's home countries. Sorted by
/// origin then year; years without such inventors are omitted.
pub fn location_split(
    records: &[InventorRecord],
    origins: &[usize],
    homes: &BTreeMap<usize, BTreeSet<String>>,
    taxonomy: &Taxonomy,
) -> Result<Vec<LocationSplit>> {
    for k in origins {
        if !homes.contains_key(k) {
            let name = taxonomy.name(*k).map_or_else(|| k.to_string(), str::to_string);
            return Err(Error::MissingHomeSet(name));
        }
    }
    let mut counts: BTreeMap<(usize, i32), (usize, usize)> = BTreeMap::new();
    for r in records {
        let k = r.prediction.argmax();
        if !origins.contains(&k) {
            continue;
        }
        let entry = counts.entry((k, r.priority_year)).or_default();
        if homes[&k].contains(&r.country) {
            entry.0 += 1;
        } else {
            entry.1 += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|((origin, year), (domestic, abroad))| LocationSplit {
            origin,
            year,
            domestic,
            abroad,
        })
        .collect())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse {
        line: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    }
}

/// Long format: `group,year,origin,value,n`, one row per origin.
pub fn write_series_csv<W: Write, S: AsRef<str>>(writer: W, series: &[PrevalencePoint], class_names: &[S]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["group", "year", "origin", "value", "n"]).map_err(csv_err)?;
    for p in series {
        for (name, v) in class_names.iter().zip(&p.values) {
            wtr.write_record([
                p.group.as_str(),
                &p.year.to_string(),
                name.as_ref(),
                &format!("{v:.17e}"),
                &p.n.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<series csv>", e))
}

/// Same layout as [`write_series_csv`] with a fixed `origin` label.
pub fn write_scalar_csv<W: Write>(writer: W, series: &[ScalarPoint], label: &str) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["group", "year", "origin", "value", "n"]).map_err(csv_err)?;
    for p in series {
        wtr.write_record([
            p.group.as_str(),
            &p.year.to_string(),
            label,
            &format!("{:.17e}", p.value),
            &p.n.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<series csv>", e))
}

/// Reads `inventor_id,name,country,tech_field,priority_year[,p_1..p_K]`.
/// Probability columns must be all present or all absent.
pub fn read_inventor_csv<R: Read>(reader: R, classes: usize) -> Result<Vec<InventorRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let parse = |line: usize, message: String| Error::Parse { line, message };
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let need = |name: &str| col(name).ok_or_else(|| parse(1, format!("missing `{name}` column")));
    let cols = [
        need("inventor_id")?,
        need("name")?,
        need("country")?,
        need("tech_field")?,
        need("priority_year")?,
    ];
    let prob_cols: Vec<Option<usize>> = (1..=classes).map(|k| col(&format!("p_{k}"))).collect();
    let prob_cols: Option<Vec<usize>> = match prob_cols.iter().filter(|c| c.is_some()).count() {
        0 => None,
        n if n == classes => Some(prob_cols.into_iter().flatten().collect()),
        n => return Err(parse(1, format!("found {n} of {classes} probability columns p_1..p_{classes}"))),
    };

    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse(line, e.to_string()))?;
        let field = |c: usize| record[c].trim().to_string();
        let country = field(cols[2]);
        if country.is_empty() {
            return Err(parse(line, "empty country".into()));
        }
        let priority_year = field(cols[4])
            .parse::<i32>()
            .map_err(|e| parse(line, format!("priority_year: {e}")))?;
        let prediction = match &prob_cols {
            None => None,
            Some(pc) => {
                let values = pc
                    .iter()
                    .map(|&c| field(c).parse::<f64>().map_err(|e| parse(line, format!("{}: {e}", &headers[c]))))
                    .collect::<Result<Vec<_>>>()?;
                ProbVector::new(values.clone()).map_err(|e| parse(line, e.to_string()))?;
                Some(values)
            }
        };
        out.push(InventorRow {
            inventor_id: field(cols[0]),
            name: record[cols[1]].to_string(),
            country,
            tech_field: field(cols[3]),
            priority_year,
            prediction,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok(out)
}

pub fn load_inventor_csv(path: impl AsRef<Path>, classes: usize) -> Result<Vec<InventorRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_inventor_csv(file, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(country: &str, year: i32, p: &[f64]) -> InventorRecord {
        InventorRecord {
            inventor_id: "i".into(),
            name: "n".into(),
            country: country.into(),
            tech_field: "Chemistry".into(),
            priority_year: year,
            prediction: ProbVector::new(p.to_vec()).unwrap(),
        }
    }

    fn two_class() -> Taxonomy {
        Taxonomy::new(&["A", "B"]).unwrap().with_non_western(&["A"]).unwrap()
    }

    #[test]
    fn two_inventor_example() {
        let records = [rec("US", 2000, &[1.0, 0.0]), rec("US", 2000, &[0.5, 0.5])];
        let s = prevalence(&records, GroupBy::Country, &BTreeMap::new(), 2).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].values, vec![0.75, 0.25]);
        assert_eq!(s[0].n, 2);

        let t = two_class();
        let nw: Vec<&str> = t.non_western().iter().map(|&k| t.name(k).unwrap()).collect();
        assert_eq!(aggregate_subset(&s, &nw, &t).unwrap()[0].value, 0.75);
        assert_eq!(aggregate_subset(&s, &["A", "B"], &t).unwrap()[0].value, 1.0);
        assert_eq!(aggregate_subset(&s, &[], &t).unwrap()[0].value, 0.0);
        assert!(matches!(aggregate_subset(&s, &["Z"], &t), Err(Error::UnknownOrigin(_))));
    }

    #[test]
    fn single_inventor_equals_prediction() {
        let records = [rec("DE", 1990, &[0.3, 0.7])];
        let s = prevalence(&records, GroupBy::Global, &BTreeMap::new(), 2).unwrap();
        assert_eq!(s[0].group, GLOBAL_GROUP);
        assert_eq!(s[0].values, vec![0.3, 0.7]);
    }

    #[test]
    fn regions_need_a_lookup() {
        let records = [rec("DE", 1990, &[0.3, 0.7]), rec("FR", 1990, &[0.5, 0.5])];
        let regions: BTreeMap<String, String> =
            [("DE".to_string(), "EU".to_string())].into_iter().collect();
        assert!(matches!(
            prevalence(&records, GroupBy::Region, &regions, 2),
            Err(Error::MissingMapping(_))
        ));
        let mut regions = regions;
        regions.insert("FR".into(), "EU".into());
        let s = prevalence(&records, GroupBy::Region, &regions, 2).unwrap();
        assert_eq!((s[0].group.as_str(), s[0].n), ("EU", 2));
        assert!((s[0].values[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn dominant_origin_per_group() {
        // 4 records: US 2000 x2, DE 2000, DE 2001
        let records = [
            rec("US", 2000, &[0.8, 0.2]),
            rec("US", 2000, &[0.6, 0.4]),
            rec("DE", 2000, &[0.1, 0.9]),
            rec("DE", 2001, &[0.3, 0.7]),
        ];
        let t = two_class();
        let s = prevalence(&records, GroupBy::Country, &BTreeMap::new(), 2).unwrap();
        let mapping: BTreeMap<String, String> = [("US", "A"), ("DE", "B")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let d = dominant_series(&s, &mapping, &t).unwrap();
        let got: Vec<(&str, i32, f64)> = d.iter().map(|p| (p.group.as_str(), p.year, p.value)).collect();
        assert_eq!(got, [("DE", 2000, 0.9), ("DE", 2001, 0.7), ("US", 2000, 0.7)]);

        let partial: BTreeMap<String, String> = [("US".to_string(), "A".to_string())].into_iter().collect();
        assert!(matches!(dominant_series(&s, &partial, &t), Err(Error::MissingMapping(_))));
    }

    #[test]
    fn domestic_and_abroad() {
        let t = Taxonomy::new(&["Chinese", "Other"]).unwrap();
        let records = [
            rec("CN", 2000, &[0.9, 0.1]),
            rec("US", 2000, &[0.6, 0.4]),
            rec("US", 2000, &[0.2, 0.8]),
            rec("CN", 2001, &[0.5, 0.5]),
            rec("DE", 2001, &[0.7, 0.3]),
        ];
        let homes: BTreeMap<usize, BTreeSet<String>> =
            [(0, ["CN".to_string()].into_iter().collect())].into_iter().collect();
        let s = location_split(&records, &[0], &homes, &t).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].year, s[0].domestic, s[0].abroad), (2000, 1, 1));
        // the 0.5/0.5 tie goes to class 0
        assert_eq!((s[1].year, s[1].domestic, s[1].abroad), (2001, 1, 1));
        assert_eq!(s[0].domestic_share() + s[0].abroad_share(), 1.0);
        assert!(matches!(location_split(&records, &[1], &homes, &t), Err(Error::MissingHomeSet(_))));
    }

    #[test]
    fn inventor_csv() {
        let text = "inventor_id,name,country,tech_field,priority_year,p_1,p_2\n\
                    1,Li Wei,CN,Optics,2001,0.9,0.1\n\
                    2,\"Smith, John\",US,Optics,2002,0.2,0.8\n";
        let rows = read_inventor_csv(text.as_bytes(), 2).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].name, "Smith, John");
        assert_eq!(rows[0].prediction, Some(vec![0.9, 0.1]));

        let bare = "inventor_id,name,country,tech_field,priority_year\n1,Li Wei,CN,Optics,2001\n";
        assert_eq!(read_inventor_csv(bare.as_bytes(), 2).unwrap()[0].prediction, None);

        let bad = "inventor_id,name,country,tech_field,priority_year,p_1,p_2\n1,Li,CN,Optics,2001,0.9,0.3\n";
        assert!(matches!(read_inventor_csv(bad.as_bytes(), 2), Err(Error::Parse { line: 2, .. })));
        let partial = "inventor_id,name,country,tech_field,priority_year,p_1\n1,Li,CN,Optics,2001,1\n";
        assert!(matches!(read_inventor_csv(partial.as_bytes(), 2), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn series_csv_layout() {
        let records = [rec("US", 2000, &[1.0, 0.0])];
        let s = prevalence(&records, GroupBy::Country, &BTreeMap::new(), 2).unwrap();
        let mut out = Vec::new();
        write_series_csv(&mut out, &s, &["A", "B"]).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "group,year,origin,value,n");
        assert!(lines[1].starts_with("US,2000,A,1"));
        assert!(lines[2].ends_with(",1"));
    }
}
