use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nameorigin::codec::{encode_raw, EncodedName};
use nameorigin::dataset::{load_labeled_csv, split, write_labeled_csv, LabeledName, SplitSpec};
use nameorigin::metrics::{confusion, confusion_from_classes, scores, write_report};
use nameorigin::model::{NameExamples, OriginModel, TrainConfig};
use nameorigin::prevalence::{
    aggregate_indices, dominant_series, load_inventor_csv, location_split, prevalence,
    write_scalar_csv, write_series_csv, GroupBy,
};
use nameorigin::pseudo_label::{
    default_weight_schemes, evaluate_grid, grid, load_leaf_csv, pseudo_label, robustness_ranks,
    train_mapper, Crosswalk, EvaluatedSample, LeafVector,
};
use nameorigin::taxonomy::Taxonomy;
use nameorigin::tensor::standard_suite;

use crate::config::{RunConfig, WeightSection};
use crate::meta::{write_file, Metadata};
use crate::{AggregateArgs, ClassifyArgs, CliError, Common, EvaluateArgs, FilterArgs, GradcheckArgs, TrainArgs};

type Result<T> = std::result::Result<T, CliError>;

fn out_dir(path: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn with_file(dir: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> nameorigin::Result<()>) -> Result<()> {
    let path = dir.join(name);
    let mut w = create(&path)?;
    f(&mut w)?;
    w.flush()
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaxonomyFile {
    classes: Vec<String>,
    #[serde(default)]
    non_western: Vec<String>,
}

fn load_taxonomy(path: Option<&str>) -> Result<Taxonomy> {
    let Some(path) = path else {
        return Ok(Taxonomy::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read taxonomy {path}: {e}")))?;
    let file: TaxonomyFile =
        toml::from_str(&text).map_err(|e| CliError::Input(format!("taxonomy {path}: {e}")))?;
    Ok(Taxonomy::new(&file.classes)?.with_non_western(&file.non_western)?)
}

/// Taxonomy matching a model's classes: the `--taxonomy` file if given
/// (it must agree), the default one if the names match, else a plain
/// taxonomy from the names.
fn model_taxonomy(model: &OriginModel, path: Option<&str>) -> Result<Taxonomy> {
    let from_file = load_taxonomy(path)?;
    if from_file.names() == model.class_names() {
        return Ok(from_file);
    }
    if path.is_some() {
        return Err(CliError::Usage("taxonomy file does not match the model's classes".into()));
    }
    Ok(Taxonomy::new(model.class_names())?)
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(t) = &common.taxonomy {
        cfg.taxonomy = Some(t.display().to_string());
    }
    Ok(cfg)
}

fn encode_all(data: &[LabeledName]) -> Result<NameExamples> {
    let names = data
        .iter()
        .map(|d| encode_raw(&d.name))
        .collect::<nameorigin::Result<Vec<_>>>()?;
    Ok(NameExamples {
        names,
        labels: data.iter().map(|d| d.label).collect(),
    })
}

fn load_model(path: &Path) -> Result<OriginModel> {
    OriginModel::load(path).map_err(|e| CliError::Input(format!("model {}: {e}", path.display())))
}

pub(crate) fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = resolve(&a.common)?;
    if let Some(v) = a.val_fraction {
        cfg.split.validation_fraction = v;
    }
    if let Some(v) = a.test_fraction {
        cfg.split.test_fraction = v;
    }
    if let Some(v) = a.lstm_sizes {
        cfg.model.lstm_sizes = v;
    }
    if let Some(v) = a.dropout {
        cfg.model.dropout_rate = v;
    }
    if let Some(v) = a.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = a.max_epochs {
        cfg.train.max_epochs = v;
    }
    if let Some(v) = a.patience {
        cfg.train.early_stopping_patience = v;
    }
    if let Some(v) = a.learning_rate {
        cfg.train.learning_rate = v;
    }
    cfg.train.final_fit |= a.final_fit;
    let taxonomy = load_taxonomy(cfg.taxonomy.as_deref())?;
    cfg.model.num_classes = taxonomy.len();
    cfg.model.validate()?;
    cfg.train_config().validate()?;

    let data = load_labeled_csv(&a.data, &taxonomy)?;
    let (train, validation, test) = split(&data, &cfg.split_spec())?;
    let train_ex = encode_all(&train)?;
    let val_ex = encode_all(&validation)?;
    let test_ex = encode_all(&test)?;
    let out = out_dir(&a.out)?;

    let mut model = OriginModel::build(cfg.model.clone(), &taxonomy, cfg.seed)?;
    let history = model.train(&train_ex, Some(&val_ex), &cfg.train_config())?;
    with_file(&out, "history.csv", |w| history.write_csv(w))?;
    let mut outputs = vec!["history.csv"];

    let mut meta = Metadata::new("train", Some(&cfg));
    meta.input("data", &a.data)?;
    if let Some(t) = &cfg.taxonomy {
        meta.input("taxonomy", Path::new(t))?;
    }
    meta.note("split_sizes", [train.len(), validation.len(), test.len()]);
    meta.note("parameter_count", model.count_parameters());
    meta.note("provenance", &model.provenance);

    if !test.is_empty() {
        let probs = model.predict(&test_ex.names)?;
        let metrics = scores(&confusion(&test_ex.labels, &probs, taxonomy.len())?)?;
        with_file(&out, "test_report.csv", |w| write_report(w, &metrics, taxonomy.names()))?;
        outputs.push("test_report.csv");
        meta.note("test_weighted_f1", metrics.overall.f1);
    }

    if cfg.train.final_fit {
        model.save(out.join("selection_model.bin"))?;
        outputs.push("selection_model.bin");
        let all = encode_all(&data)?;
        let mut full = OriginModel::build(cfg.model.clone(), &taxonomy, cfg.seed)?;
        let fixed = TrainConfig {
            fixed_epochs: Some(history.best_epoch.max(1)),
            ..cfg.train_config()
        };
        full.train(&all, None, &fixed)?;
        model = full;
        meta.note("final_fit_epochs", history.best_epoch.max(1));
    }
    model.save(out.join("model.bin"))?;
    outputs.push("model.bin");
    write_file(&out.join("config.toml"), cfg.to_toml().as_bytes())?;
    outputs.push("config.toml");
    meta.finish(&out, &outputs)?;
    println!(
        "trained {} epochs (best {}), model written to {}",
        history.epochs.len(),
        history.best_epoch,
        out.join("model.bin").display()
    );
    Ok(())
}

pub(crate) fn evaluate(a: EvaluateArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let taxonomy = model_taxonomy(&model, None)?;
    let data = load_labeled_csv(&a.data, &taxonomy)?;
    let ex = encode_all(&data)?;
    let probs = model.predict(&ex.names)?;
    let cm = confusion(&ex.labels, &probs, taxonomy.len())?;
    let metrics = scores(&cm)?;
    let out = out_dir(&a.out)?;
    with_file(&out, "report.csv", |w| write_report(w, &metrics, taxonomy.names()))?;
    with_file(&out, "confusion.csv", |w| {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(taxonomy.names().iter().cloned());
        let err = |e: csv::Error| nameorigin::Error::Parse { line: 0, message: e.to_string() };
        wtr.write_record(&header).map_err(err)?;
        for (name, row) in taxonomy.names().iter().zip(cm.rows()) {
            let mut r = vec![name.clone()];
            r.extend(row.iter().map(u64::to_string));
            wtr.write_record(&r).map_err(err)?;
        }
        wtr.flush().map_err(|e| nameorigin::Error::Parse { line: 0, message: e.to_string() })
    })?;
    let mut meta = Metadata::new("evaluate", None);
    meta.input("model", &a.model)?;
    meta.input("data", &a.data)?;
    meta.note("weighted_f1", metrics.overall.f1);
    meta.finish(&out, &["report.csv", "confusion.csv"])?;
    println!(
        "weighted precision {:.4} recall {:.4} f1 {:.4} on {} names",
        metrics.overall.precision, metrics.overall.recall, metrics.overall.f1, metrics.overall.support
    );
    Ok(())
}

fn read_names(path: &Path) -> Result<Vec<(String, EncodedName)>> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .clone();
    let col = headers
        .iter()
        .position(|h| h.trim() == "name")
        .ok_or_else(|| CliError::Input(format!("{}: missing `name` column", path.display())))?;
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| CliError::Input(format!("{} line {line}: {e}", path.display())))?;
        let raw = record[col].to_string();
        let enc = encode_raw(&raw)
            .map_err(|e| CliError::Input(format!("{} line {line}: {e}", path.display())))?;
        out.push((raw, enc));
    }
    if out.is_empty() {
        return Err(CliError::Input(format!("{}: no names", path.display())));
    }
    Ok(out)
}

pub(crate) fn classify(a: ClassifyArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let names = read_names(&a.names)?;
    let encoded: Vec<EncodedName> = names.iter().map(|(_, e)| e.clone()).collect();
    let probs = model.predict(&encoded)?;
    let out = out_dir(&a.out)?;
    with_file(&out, "predictions.csv", |w| {
        let mut wtr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| nameorigin::Error::Parse { line: 0, message: e.to_string() };
        let mut header = vec!["name".to_string(), "origin".to_string()];
        header.extend((1..=model.class_names().len()).map(|k| format!("p_{k}")));
        wtr.write_record(&header).map_err(err)?;
        for ((raw, _), p) in names.iter().zip(&probs) {
            let mut row = vec![raw.clone(), model.class_names()[p.argmax()].clone()];
            row.extend(p.as_slice().iter().map(|v| format!("{v:.17e}")));
            wtr.write_record(&row).map_err(err)?;
        }
        wtr.flush().map_err(|e| nameorigin::Error::Parse { line: 0, message: e.to_string() })
    })?;
    let mut meta = Metadata::new("classify", None);
    meta.input("model", &a.model)?;
    meta.input("names", &a.names)?;
    meta.finish(&out, &["predictions.csv"])?;
    println!("classified {} names", names.len());
    Ok(())
}

#[derive(Serialize)]
struct MethodScore {
    method: &'static str,
    accuracy: f64,
    f1: f64,
}

/// Accuracy and weighted F1 where `None` predictions count as wrong: they
/// go to an extra column with no true support.
fn method_score(method: &'static str, truth: &[usize], predicted: &[Option<usize>], classes: usize) -> Result<MethodScore> {
    let pred: Vec<usize> = predicted.iter().map(|p| p.unwrap_or(classes)).collect();
    let cm = confusion_from_classes(truth, &pred, classes + 1)?;
    let hits = truth.iter().zip(&pred).filter(|(t, p)| t == p).count();
    Ok(MethodScore {
        method,
        accuracy: hits as f64 / truth.len() as f64,
        f1: scores(&cm)?.overall.f1,
    })
}

#[derive(Serialize)]
struct SelectionSummary {
    index: usize,
    min_p_h: Option<f64>,
    min_delta: Option<f64>,
    max_entropy: Option<f64>,
    score: f64,
    retained: usize,
    baseline_size: usize,
    f1: Option<f64>,
    fraction: Option<f64>,
    /// rank of the selected combo under each alternative weight scheme
    robustness_ranks: Vec<usize>,
    share_top5: f64,
    share_top20: f64,
}

pub(crate) fn filter(a: FilterArgs) -> Result<()> {
    let mut cfg = resolve(&a.common)?;
    if let Some(path) = &a.weights {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        cfg.weights = toml::from_str::<WeightSection>(&text)
            .map_err(|e| CliError::Usage(format!("weights {}: {e}", path.display())))?;
    }
    let taxonomy = load_taxonomy(cfg.taxonomy.as_deref())?;
    let classes = taxonomy.len();
    let rows = load_leaf_csv(&a.leaf_data, &taxonomy)?;
    let (labeled, unlabeled): (Vec<LeafVector>, Vec<LeafVector>) =
        rows.into_iter().partition(|v| v.label.is_some());
    let spec = SplitSpec {
        test_fraction: cfg.mapper.test_fraction,
        validation_fraction: cfg.mapper.validation_fraction,
        seed: cfg.seed,
    };
    let (train, validation, test) = split(&labeled, &spec)?;
    if test.is_empty() {
        return Err(CliError::Usage("mapper test_fraction leaves no held-out vectors".into()));
    }
    let (mapper, history) = train_mapper(&train, Some(&validation), classes, &cfg.mapper_config())?;
    let truth: Vec<usize> = test.iter().map(|v| v.label.expect("labeled")).collect();
    let probs = mapper.predict(&test)?;
    let out = out_dir(&a.out)?;

    let mut methods = Vec::new();
    if let Ok(cw) = Crosswalk::published(&taxonomy) {
        let highest: Vec<Option<usize>> = test.iter().map(|v| cw.highest(v).ok()).collect();
        let grouped: Vec<Option<usize>> = test.iter().map(|v| cw.grouped(v).ok().map(|g| g.0)).collect();
        methods.push(method_score("crosswalk_highest", &truth, &highest, classes)?);
        methods.push(method_score("crosswalk_grouped", &truth, &grouped, classes)?);
    }
    let mapped: Vec<Option<usize>> = probs.iter().map(|p| Some(p.argmax())).collect();
    methods.push(method_score("mapper", &truth, &mapped, classes)?);
    with_file(&out, "mapping_report.csv", |w| {
        let mut wtr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| nameorigin::Error::Parse { line: 0, message: e.to_string() };
        wtr.write_record(["method", "accuracy", "f1"]).map_err(err)?;
        for m in &methods {
            wtr.write_record([m.method.to_string(), format!("{:.6}", m.accuracy), format!("{:.6}", m.f1)])
                .map_err(err)?;
        }
        wtr.flush().map_err(|e| nameorigin::Error::Parse { line: 0, message: e.to_string() })
    })?;

    let samples: Vec<EvaluatedSample> = truth
        .iter()
        .zip(&probs)
        .map(|(&t, p)| EvaluatedSample::new(t, p.as_slice()))
        .collect();
    let combos = grid(&cfg.threshold_sets());
    if combos.is_empty() {
        return Err(CliError::Usage("threshold grid is empty".into()));
    }
    let baseline = a.baseline_size.unwrap_or(test.len());
    let report = evaluate_grid(&samples, &combos, baseline, classes, cfg.weights.selection)?;
    with_file(&out, "grid.csv", |w| report.write_csv(w))?;

    let best_index = report.ranking[0];
    let best = &report.combos[best_index];
    let schemes = cfg.weights.schemes.clone().unwrap_or_else(default_weight_schemes);
    let ranks = robustness_ranks(&report, &schemes, best_index)?;
    let share = |k: usize| {
        if ranks.is_empty() {
            0.0
        } else {
            ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64
        }
    };
    let summary = SelectionSummary {
        index: best_index,
        min_p_h: best.combo.min_p_h,
        min_delta: best.combo.min_delta,
        max_entropy: best.combo.max_entropy,
        score: best.score,
        retained: best.retained,
        baseline_size: baseline,
        f1: best.raw.map(|r| r.f1),
        fraction: best.raw.map(|r| r.fraction),
        share_top5: share(5),
        share_top20: share(20),
        robustness_ranks: ranks,
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(&out.join("selection.json"), text.as_bytes())?;

    let pseudo = pseudo_label(&mapper, &unlabeled, &best.combo)?;
    with_file(&out, "pseudo_labeled.csv", |w| write_labeled_csv(w, &pseudo, &taxonomy))?;

    let mut meta = Metadata::new("filter", Some(&cfg));
    meta.input("leaf_data", &a.leaf_data)?;
    if let Some(w) = &a.weights {
        meta.input("weights", w)?;
    }
    meta.note("split_sizes", [train.len(), validation.len(), test.len()]);
    meta.note("mapper_epochs", history.epochs.len());
    meta.note("unlabeled", unlabeled.len());
    meta.note("pseudo_labeled", pseudo.len());
    meta.finish(
        &out,
        &["mapping_report.csv", "grid.csv", "selection.json", "pseudo_labeled.csv"],
    )?;
    println!(
        "selected {} (score {:.4}); kept {} of {} unlabeled vectors",
        best.combo,
        best.score,
        pseudo.len(),
        unlabeled.len()
    );
    Ok(())
}

fn read_pairs(path: &Path, left: &str, right: &str) -> Result<Vec<(String, String)>> {
    let bad = |m: String| CliError::Input(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |n: &str| {
        headers
            .iter()
            .position(|h| h.trim() == n)
            .ok_or_else(|| bad(format!("missing `{n}` column")))
    };
    let (l, r) = (col(left)?, col(right)?);
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            Ok((rec[l].trim().to_string(), rec[r].trim().to_string()))
        })
        .collect()
}

pub(crate) fn aggregate(a: AggregateArgs) -> Result<()> {
    let cfg = resolve(&a.common)?;
    let model = a.model.as_deref().map(load_model).transpose()?;
    let taxonomy = match &model {
        Some(m) => model_taxonomy(m, cfg.taxonomy.as_deref())?,
        None => load_taxonomy(cfg.taxonomy.as_deref())?,
    };
    let classes = taxonomy.len();
    let group_by = GroupBy::parse(&a.group_by).expect("validated by the argument parser");
    let rows = load_inventor_csv(&a.inventors, classes)?;

    let missing: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].prediction.is_none()).collect();
    let mut computed = Vec::new();
    if !missing.is_empty() {
        let model = model.as_ref().ok_or_else(|| {
            CliError::Usage("inventor CSV has no p_1..p_K columns; pass --model".into())
        })?;
        let names = missing
            .iter()
            .map(|&i| {
                encode_raw(&rows[i].name).map_err(|e| {
                    CliError::Input(format!("{} line {}: {e}", a.inventors.display(), i + 2))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        computed = model.predict(&names)?;
    }
    let mut computed = computed.into_iter();
    let records: Vec<_> = rows
        .into_iter()
        .map(|r| {
            let p = match &r.prediction {
                Some(v) => nameorigin::model::ProbVector::new(v.clone()).expect("validated on load"),
                None => computed.next().expect("one prediction per missing row"),
            };
            r.with_prediction(p)
        })
        .collect();

    let regions: BTreeMap<String, String> = match &a.regions {
        Some(p) => read_pairs(p, "country", "region")?.into_iter().collect(),
        None if group_by == GroupBy::Region => {
            return Err(CliError::Usage("--group-by region needs --regions".into()))
        }
        None => BTreeMap::new(),
    };
    let series = prevalence(&records, group_by, &regions, classes)?;
    let out = out_dir(&a.out)?;
    with_file(&out, "prevalence.csv", |w| write_series_csv(w, &series, taxonomy.names()))?;
    let mut outputs = vec!["prevalence.csv"];

    if !taxonomy.non_western().is_empty() {
        let nw = aggregate_indices(&series, taxonomy.non_western());
        with_file(&out, "non_western.csv", |w| write_scalar_csv(w, &nw, "non_western"))?;
        outputs.push("non_western.csv");
    }
    if let Some(p) = &a.dominant {
        let mapping: BTreeMap<String, String> = read_pairs(p, "group", "origin")?.into_iter().collect();
        let wanted: Vec<_> = series.iter().filter(|s| mapping.contains_key(&s.group)).cloned().collect();
        let d = dominant_series(&wanted, &mapping, &taxonomy)?;
        with_file(&out, "dominant.csv", |w| write_scalar_csv(w, &d, "dominant"))?;
        outputs.push("dominant.csv");
    }
    if let Some(p) = &a.homes {
        let mut homes: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        for (origin, country) in read_pairs(p, "origin", "country")? {
            let k = taxonomy
                .index_of(&origin)
                .ok_or(nameorigin::Error::UnknownOrigin(origin))?;
            homes.entry(k).or_default().insert(country);
        }
        let origins: Vec<usize> = homes.keys().copied().collect();
        let split = location_split(&records, &origins, &homes, &taxonomy)?;
        with_file(&out, "location.csv", |w| {
            let mut wtr = csv::Writer::from_writer(w);
            let err = |e: csv::Error| nameorigin::Error::Parse { line: 0, message: e.to_string() };
            wtr.write_record(["origin", "year", "domestic", "abroad", "domestic_share", "abroad_share"])
                .map_err(err)?;
            for s in &split {
                wtr.write_record([
                    taxonomy.names()[s.origin].clone(),
                    s.year.to_string(),
                    s.domestic.to_string(),
                    s.abroad.to_string(),
                    format!("{:.17e}", s.domestic_share()),
                    format!("{:.17e}", s.abroad_share()),
                ])
                .map_err(err)?;
            }
            wtr.flush().map_err(|e| nameorigin::Error::Parse { line: 0, message: e.to_string() })
        })?;
        outputs.push("location.csv");
    }

    let mut meta = Metadata::new("aggregate", Some(&cfg));
    meta.input("inventors", &a.inventors)?;
    for (role, p) in [("model", &a.model), ("regions", &a.regions), ("dominant", &a.dominant), ("homes", &a.homes)] {
        if let Some(p) = p {
            meta.input(role, p)?;
        }
    }
    meta.note("group_by", &a.group_by);
    meta.note("records", records.len());
    meta.finish(&out, &outputs)?;
    println!("aggregated {} records into {} group-years", records.len(), series.len());
    Ok(())
}

pub(crate) fn gradcheck(a: GradcheckArgs) -> Result<()> {
    let reports = standard_suite(a.tolerance, a.seed)?;
    let mut failed = Vec::new();
    for (name, report) in &reports {
        println!("{name}: max relative error {:.3e}", report.max_relative_error());
        print!("{report}");
        if !report.passed() {
            failed.push(name.as_str());
        }
    }
    if failed.is_empty() {
        println!("all gradients within {:e}", a.tolerance);
        Ok(())
    } else {
        Err(CliError::Numerical(format!("{} exceeded tolerance", failed.join(", "))))
    }
}
