use nameorigin::dataset::{split, SplitSpec};
use nameorigin::pseudo_label::{train_mapper, Crosswalk, MapperConfig};
use nameorigin::synthetic::{leaf_corpus, LeafCorpusConfig};
use nameorigin::taxonomy::Taxonomy;

#[test]
fn mapper_beats_both_crosswalk_rules() {
    let t = Taxonomy::default();
    let data = leaf_corpus(5000, &t, &LeafCorpusConfig::default(), 11).unwrap();
    let spec = SplitSpec { test_fraction: 0.2, validation_fraction: 0.15, seed: 3 };
    let (train, val, test) = split(&data, &spec).unwrap();
    let (mapper, _) = train_mapper(&train, Some(&val), t.len(), &MapperConfig::default()).unwrap();
    let n = test.len() as f64;
    let preds = mapper.predict(&test).unwrap();
    let acc = preds.iter().zip(&test).filter(|(p, v)| Some(p.argmax()) == v.label).count() as f64 / n;
    let cw = Crosswalk::published(&t).unwrap();
    let highest = test.iter().filter(|v| cw.highest(v).ok() == v.label).count() as f64 / n;
    let grouped = test.iter().filter(|v| cw.grouped(v).ok().map(|g| g.0) == v.label).count() as f64 / n;
    assert!(acc - highest >= 0.05, "mapper {acc} vs highest {highest}");
    assert!(acc - grouped >= 0.05, "mapper {acc} vs grouped {grouped}");
}
