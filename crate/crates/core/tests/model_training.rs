use nameorigin::codec::encode_raw;
use nameorigin::model::{accuracy, Examples, ModelConfig, NameExamples, OriginModel, TrainConfig};
use nameorigin::synthetic::{suffix_corpus, suffix_taxonomy};
use nameorigin::tensor::{Adam, AdamConfig, Mode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn examples(seed: u64, n: usize) -> NameExamples {
    let data = suffix_corpus(n, seed);
    NameExamples {
        names: data.iter().map(|d| encode_raw(&d.name).unwrap()).collect(),
        labels: data.iter().map(|d| d.label).collect(),
    }
}

fn small(sizes: &[usize]) -> ModelConfig {
    ModelConfig {
        lstm_sizes: sizes.to_vec(),
        num_classes: 4,
        ..ModelConfig::default()
    }
}

#[test]
fn small_model_overfits_suffix_corpus() {
    let mut model = OriginModel::build(small(&[32, 16]), &suffix_taxonomy(), 7).unwrap();
    let train = examples(1, 200);
    let held_out = examples(2, 50);
    let tc = TrainConfig {
        batch_size: 16,
        fixed_epochs: Some(80),
        seed: 7,
        ..TrainConfig::default()
    };
    let history = model.train(&train, None, &tc).unwrap();
    assert_eq!(history.epochs.len(), 80);
    assert!(accuracy(model.network(), &train).unwrap() >= 0.99);
    assert!(accuracy(model.network(), &held_out).unwrap() >= 0.90);
}

#[test]
fn first_adam_steps_reduce_loss() {
    let data = examples(5, 32);
    let idx: Vec<usize> = (0..data.len()).collect();
    let batch = data.batch(&idx);
    for seed in 0..12 {
        let mut model = OriginModel::build(small(&[16]), &suffix_taxonomy(), seed).unwrap();
        let mut adam = Adam::new(AdamConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut losses = Vec::new();
        for _ in 0..=5 {
            let net = model.network_mut();
            let (loss, grads) = net.loss_and_gradients(&batch, &data.labels, Mode::Eval, &mut rng).unwrap();
            losses.push(loss);
            adam.step(&mut net.params_mut(), &grads.blocks).unwrap();
        }
        let stalls = losses.windows(2).filter(|w| w[1] >= w[0]).count();
        assert!(stalls <= 1, "seed {seed}: {losses:?}");
    }
}

#[test]
fn predictions_do_not_depend_on_batching() {
    let model = OriginModel::build(small(&[12, 8]), &suffix_taxonomy(), 3).unwrap();
    let names = examples(9, 300).names;
    let together = model.predict(&names).unwrap();
    let mut reversed: Vec<_> = names.clone();
    reversed.reverse();
    let backwards = model.predict(&reversed).unwrap();
    for (i, name) in names.iter().enumerate() {
        let alone = model.predict_one(name).unwrap();
        assert_eq!(alone, together[i]);
        assert_eq!(backwards[names.len() - 1 - i], together[i]);
    }
    for p in &together {
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert!(p.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
    }
}

#[test]
fn early_stopping_keeps_best_validation_weights() {
    let mut model = OriginModel::build(small(&[8]), &suffix_taxonomy(), 11).unwrap();
    let train = examples(1, 120);
    let val = examples(4, 40);
    let tc = TrainConfig {
        batch_size: 16,
        max_epochs: 12,
        early_stopping_patience: 3,
        seed: 11,
        ..TrainConfig::default()
    };
    let history = model.train(&train, Some(&val), &tc).unwrap();
    let best = history
        .epochs
        .iter()
        .filter_map(|e| e.validation_accuracy)
        .fold(f64::MIN, f64::max);
    assert_eq!(history.best_validation_accuracy, Some(best));
    assert_eq!(accuracy(model.network(), &val).unwrap(), best);
}

#[test]
fn reload_predicts_identically() {
    let mut model = OriginModel::build(small(&[8]), &suffix_taxonomy(), 2).unwrap();
    let data = examples(1, 64);
    let tc = TrainConfig { batch_size: 16, fixed_epochs: Some(2), ..TrainConfig::default() };
    model.train(&data, None, &tc).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    model.save(&path).unwrap();
    let back = OriginModel::load(&path).unwrap();
    assert_eq!(back.count_parameters(), model.count_parameters());
    assert_eq!(back.predict(&data.names).unwrap(), model.predict(&data.names).unwrap());
    assert_eq!(back.provenance, model.provenance);
}
