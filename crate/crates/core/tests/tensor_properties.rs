use nameorigin::tensor::{standard_suite, Activation, DenseLayer, Dropout, LstmLayer, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn gradients_agree_over_twenty_seeds() {
    let mut failures = Vec::new();
    for seed in 0..20 {
        for (name, report) in standard_suite(1e-5, seed).unwrap() {
            if !report.passed() {
                let worst_abs = report.blocks.iter().map(|b| b.max_absolute_error).fold(0.0, f64::max);
                failures.push(format!(
                    "seed {seed} {name}: relative {:.3e}, absolute {worst_abs:.1e}",
                    report.max_relative_error()
                ));
            }
        }
    }
    assert!(failures.is_empty(), "{} of 60 checks above 1e-5:\n{}", failures.len(), failures.join("\n"));
}

#[test]
fn inverted_dropout_preserves_expected_preactivation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let width = 40;
    let x: Vec<f64> = (0..width).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..width).map(|_| rng.random_range(-1.0..1.0)).collect();
    let exact: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
    for rate in [0.2, 0.5] {
        let dropout = Dropout::new(rate).unwrap();
        let draws = 20_000;
        let samples: Vec<f64> = (0..draws)
            .map(|_| {
                let m = dropout.sample_mask(width, &mut rng);
                (0..width).map(|j| w[j] * x[j] * m[j]).sum()
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / draws as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        assert!((mean - exact).abs() <= 3.0 * se, "rate {rate}: {mean} vs {exact} (se {se})");
    }
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions(seed in any::<u64>(), batch in 1usize..6, scale in 0.1f64..30.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layer = DenseLayer::new(7, 5, Activation::Softmax, &mut rng);
        let data: Vec<f64> = (0..batch * 7).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let out = layer.forward(&Tensor::from_vec(&[batch, 7], data).unwrap()).unwrap();
        for b in 0..batch {
            let row = out.row(b);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|&v| v > 0.0 && v <= 1.0));
            // an entry reaches 1.0 only once the rest fall below rounding
            for (j, &v) in row.iter().enumerate() {
                if v == 1.0 {
                    let rest: f64 = row.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, &x)| x).sum();
                    prop_assert!(rest < f64::EPSILON);
                }
            }
        }
    }

    #[test]
    fn lstm_buffers_match_formula(i in 1usize..40, c in 1usize..40) {
        let layer = LstmLayer::new(i, c, &mut ChaCha8Rng::seed_from_u64(0));
        prop_assert_eq!(layer.weights.len() + layer.bias.len(), 4 * (c * (i + c) + c));
        prop_assert_eq!(layer.parameter_count(), 4 * (c * (i + c) + c));
    }
}
