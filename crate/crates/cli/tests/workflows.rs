use std::path::{Path, PathBuf};

use nameorigin::dataset::write_labeled_csv;
use nameorigin::pseudo_label::write_leaf_csv;
use nameorigin::synthetic::{leaf_corpus, suffix_corpus, suffix_taxonomy, LeafCorpusConfig};
use nameorigin::taxonomy::Taxonomy;
use nameorigin_cli::{fnv1a64, run, Metadata, EXIT_INPUT, EXIT_OK, EXIT_USAGE, METADATA_FILE};

fn cli(args: &[&str]) -> i32 {
    let mut argv = vec!["nameorigin"];
    argv.extend_from_slice(args);
    run(argv)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a 4-class suffix corpus and its taxonomy file into `dir`.
fn suffix_inputs(dir: &Path, n: usize) -> (PathBuf, PathBuf) {
    let data = dir.join("names.csv");
    write_labeled_csv(std::fs::File::create(&data).unwrap(), &suffix_corpus(n, 3), &suffix_taxonomy()).unwrap();
    let taxonomy = dir.join("taxonomy.toml");
    std::fs::write(&taxonomy, "classes = [\"ov\", \"son\", \"oglu\", \"elli\"]\nnon_western = [\"oglu\"]\n").unwrap();
    (data, taxonomy)
}

fn train_small(dir: &Path) -> PathBuf {
    let (data, taxonomy) = suffix_inputs(dir, 120);
    let out = dir.join("trained");
    let code = cli(&[
        "train", "--data", s(&data), "--out", s(&out), "--taxonomy", s(&taxonomy),
        "--lstm-sizes", "8", "--batch-size", "16", "--max-epochs", "2", "--seed", "1",
    ]);
    assert_eq!(code, EXIT_OK);
    out
}

fn read_meta(dir: &Path) -> Metadata {
    serde_json::from_str(&std::fs::read_to_string(dir.join(METADATA_FILE)).unwrap()).unwrap()
}

#[test]
fn help_and_bad_flags() {
    assert_eq!(cli(&["--help"]), EXIT_OK);
    assert_eq!(cli(&["train", "--data", "x.csv"]), EXIT_USAGE);
    assert_eq!(cli(&["aggregate", "--inventors", "x", "--group-by", "planet", "--out", "o"]), EXIT_USAGE);
}

#[test]
fn gradcheck_passes() {
    assert_eq!(cli(&["gradcheck"]), EXIT_OK);
}

#[test]
fn missing_and_corrupt_inputs_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(cli(&["classify", "--model", "/no/such/model.bin", "--names", "n.csv", "--out", s(&out)]), EXIT_INPUT);
    let model = dir.path().join("junk.bin");
    std::fs::write(&model, b"NOMLSTM1 not really a model").unwrap();
    let names = dir.path().join("names.csv");
    std::fs::write(&names, "name\nanna smith\n").unwrap();
    assert_eq!(cli(&["classify", "--model", s(&model), "--names", s(&names), "--out", s(&out)]), EXIT_INPUT);
}

#[test]
fn bad_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = suffix_inputs(dir.path(), 40);
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "[train]\nbatch_sise = 3\n").unwrap();
    let out = dir.path().join("o");
    assert_eq!(cli(&["train", "--data", s(&data), "--out", s(&out), "--config", s(&config)]), EXIT_USAGE);
    std::fs::write(&config, "[train]\nbatch_size = 0\n").unwrap();
    assert_eq!(cli(&["train", "--data", s(&data), "--out", s(&out), "--config", s(&config)]), EXIT_USAGE);
}

#[test]
fn train_writes_artifacts_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = train_small(dir.path());
    for f in ["model.bin", "history.csv", "test_report.csv", "config.toml", METADATA_FILE] {
        assert!(out.join(f).exists(), "{f}");
    }
    let meta = read_meta(&out);
    assert_eq!(meta.command, "train");
    assert_eq!(meta.seed, Some(1));
    assert_eq!(meta.config.as_ref().unwrap().model.lstm_sizes, vec![8]);
    assert_eq!(meta.config.as_ref().unwrap().model.num_classes, 4);
    let model = meta.outputs.iter().find(|d| d.path == "model.bin").unwrap();
    let bytes = std::fs::read(out.join("model.bin")).unwrap();
    assert_eq!(model.fnv1a64, format!("{:016x}", fnv1a64(&bytes)));
    // 120 names: 12 test, 17 validation, 91 train
    assert_eq!(meta.notes["split_sizes"], serde_json::json!([91, 17, 12]));
}

#[test]
fn config_file_and_flags_layer() {
    let dir = tempfile::tempdir().unwrap();
    let (data, taxonomy) = suffix_inputs(dir.path(), 60);
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "seed = 9\n[model]\nlstm_sizes = [6]\n[train]\nmax_epochs = 1\nbatch_size = 30\n").unwrap();
    let out = dir.path().join("o");
    let code = cli(&[
        "train", "--data", s(&data), "--out", s(&out), "--taxonomy", s(&taxonomy),
        "--config", s(&config), "--batch-size", "20",
    ]);
    assert_eq!(code, EXIT_OK);
    let c = read_meta(&out).config.unwrap();
    assert_eq!(c.seed, 9);
    assert_eq!(c.model.lstm_sizes, vec![6]);
    assert_eq!(c.train.batch_size, 20);
    assert_eq!(c.train.max_epochs, 1);
    assert_eq!(c.train.learning_rate, 0.0025);
}

#[test]
fn final_fit_keeps_selection_model() {
    let dir = tempfile::tempdir().unwrap();
    let (data, taxonomy) = suffix_inputs(dir.path(), 60);
    let out = dir.path().join("o");
    let code = cli(&[
        "train", "--data", s(&data), "--out", s(&out), "--taxonomy", s(&taxonomy),
        "--lstm-sizes", "6", "--max-epochs", "2", "--final-fit",
    ]);
    assert_eq!(code, EXIT_OK);
    let a = std::fs::read(out.join("model.bin")).unwrap();
    let b = std::fs::read(out.join("selection_model.bin")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn evaluate_and_classify() {
    let dir = tempfile::tempdir().unwrap();
    let trained = train_small(dir.path());
    let model = trained.join("model.bin");
    let eval = dir.path().join("eval");
    let data = dir.path().join("names.csv");
    assert_eq!(cli(&["evaluate", "--model", s(&model), "--data", s(&data), "--out", s(&eval)]), EXIT_OK);
    let report = std::fs::read_to_string(eval.join("report.csv")).unwrap();
    assert!(report.starts_with("class,precision,recall,f1,support\n"));
    assert!(report.contains("__overall__"));
    let confusion = std::fs::read_to_string(eval.join("confusion.csv")).unwrap();
    let counts: u64 = confusion
        .lines()
        .skip(1)
        .flat_map(|l| l.split(',').skip(1).map(|v| v.parse::<u64>().unwrap()).collect::<Vec<_>>())
        .sum();
    assert_eq!(counts, 120);

    let names = dir.path().join("list.csv");
    std::fs::write(&names, "id,name\n1,Zoë Petrov\n2,anna larson\n").unwrap();
    let out = dir.path().join("cls");
    assert_eq!(cli(&["classify", "--model", s(&model), "--names", s(&names), "--out", s(&out)]), EXIT_OK);
    let text = std::fs::read_to_string(out.join("predictions.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "name,origin,p_1,p_2,p_3,p_4");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "Zoë Petrov");
    assert!(["ov", "son", "oglu", "elli"].contains(&row[1]));
    let sum: f64 = row[2..].iter().map(|v| v.parse::<f64>().unwrap()).sum();
    assert!((sum - 1.0).abs() < 1e-9);

    std::fs::write(&names, "name\n12345\n").unwrap();
    assert_eq!(cli(&["classify", "--model", s(&model), "--names", s(&names), "--out", s(&out)]), EXIT_INPUT);
}

#[test]
fn filter_selects_and_pseudo_labels() {
    let dir = tempfile::tempdir().unwrap();
    let taxonomy = Taxonomy::default();
    let mut rows = leaf_corpus(900, &taxonomy, &LeafCorpusConfig::default(), 5).unwrap();
    for (i, r) in rows.iter_mut().enumerate() {
        r.name = format!("name {i}");
        if i >= 700 {
            r.label = None;
        }
    }
    let leaf = dir.path().join("leaf.csv");
    write_leaf_csv(std::fs::File::create(&leaf).unwrap(), &rows, &taxonomy).unwrap();
    let out = dir.path().join("f");
    assert_eq!(cli(&["filter", "--leaf-data", s(&leaf), "--out", s(&out), "--seed", "2"]), EXIT_OK);

    let grid = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 106);
    let report = std::fs::read_to_string(out.join("mapping_report.csv")).unwrap();
    let methods: Vec<&str> = report.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["crosswalk_highest", "crosswalk_grouped", "mapper"]);
    let sel: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("selection.json")).unwrap()).unwrap();
    assert_eq!(sel["robustness_ranks"].as_array().unwrap().len(), 26);
    // 700 labeled rows: 140 held out
    assert_eq!(sel["baseline_size"], 140);
    let pseudo = std::fs::read_to_string(out.join("pseudo_labeled.csv")).unwrap();
    let kept = pseudo.lines().count() - 1;
    assert!(kept <= 200);
    assert!(pseudo.lines().skip(1).all(|l| l.ends_with(",pseudo_labeled")));
    assert_eq!(read_meta(&out).notes["pseudo_labeled"], kept);

    let weights = dir.path().join("w.toml");
    std::fs::write(&weights, "selection = [0.5, 0.5, 0.5, 0.5]\n").unwrap();
    let code = cli(&["filter", "--leaf-data", s(&leaf), "--out", s(&out), "--weights", s(&weights)]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn aggregate_with_and_without_model() {
    let dir = tempfile::tempdir().unwrap();
    let trained = train_small(dir.path());
    let taxonomy = dir.path().join("taxonomy.toml");
    let inventors = dir.path().join("inv.csv");
    std::fs::write(
        &inventors,
        "inventor_id,name,country,tech_field,priority_year\n\
         1,ivan petrov,DE,chem,2001\n2,sven larson,DE,chem,2001\n3,ali yilmazoglu,US,bio,2002\n",
    )
    .unwrap();
    let out = dir.path().join("agg");
    let args = ["aggregate", "--inventors", s(&inventors), "--group-by", "country", "--out", s(&out)];
    // no probabilities and no model
    assert_eq!(cli(&[&args[..], &["--taxonomy", s(&taxonomy)]].concat()), EXIT_USAGE);
    let model = trained.join("model.bin");
    assert_eq!(cli(&[&args[..], &["--model", s(&model), "--taxonomy", s(&taxonomy)]].concat()), EXIT_OK);
    let text = std::fs::read_to_string(out.join("prevalence.csv")).unwrap();
    // two cells times four origins
    assert_eq!(text.lines().count(), 1 + 8);
    assert!(out.join("non_western.csv").exists());

    let with_probs = dir.path().join("inv_p.csv");
    std::fs::write(
        &with_probs,
        "inventor_id,name,country,tech_field,priority_year,p_1,p_2,p_3,p_4\n\
         1,a,DE,chem,2001,1,0,0,0\n2,b,DE,chem,2001,0.5,0.5,0,0\n3,c,FR,chem,2001,0,0,1,0\n",
    )
    .unwrap();
    let regions = dir.path().join("regions.csv");
    std::fs::write(&regions, "country,region\nDE,europe\nFR,europe\n").unwrap();
    let dominant = dir.path().join("dominant.csv");
    std::fs::write(&dominant, "group,origin\neurope,ov\n").unwrap();
    let homes = dir.path().join("homes.csv");
    std::fs::write(&homes, "origin,country\nov,DE\noglu,TR\n").unwrap();
    let out2 = dir.path().join("agg2");
    let base = ["aggregate", "--inventors", s(&with_probs), "--group-by", "region", "--out", s(&out2), "--taxonomy", s(&taxonomy)];
    assert_eq!(cli(&base), EXIT_USAGE);
    let code = cli(&[
        &base[..],
        &["--regions", s(&regions), "--dominant", s(&dominant), "--homes", s(&homes)],
    ]
    .concat());
    assert_eq!(code, EXIT_OK);
    let dom = std::fs::read_to_string(out2.join("dominant.csv")).unwrap();
    // (1 + 0.5 + 0) / 3
    let row: Vec<&str> = dom.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..3], ["europe", "2001", "dominant"]);
    assert!((row[3].parse::<f64>().unwrap() - 0.5).abs() < 1e-15, "{dom}");
    assert!(out2.join("location.csv").exists());
}
