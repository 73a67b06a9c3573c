use nameorigin::pseudo_label::{
    apply_combo, confidence, evaluate_grid, grid, Crosswalk, EvaluatedSample, LeafVector, ThresholdCombo,
    ThresholdSets, Weights, LEAF_COUNT,
};
use nameorigin::taxonomy::Taxonomy;
use proptest::prelude::*;

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, k).prop_filter_map("all zero", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
    })
}

fn bound() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![Just(None), (0.0f64..1.0).prop_map(Some)]
}

fn combo() -> impl Strategy<Value = ThresholdCombo> {
    (bound(), bound(), prop_oneof![Just(None), (0.0f64..3.0).prop_map(Some)])
        .prop_map(|(min_p_h, min_delta, max_entropy)| ThresholdCombo { min_p_h, min_delta, max_entropy })
}

proptest! {
    #[test]
    fn confidence_bounds(p in simplex(17)) {
        let m = confidence(&p);
        prop_assert!(m.delta >= 0.0 && m.delta <= m.p_h);
        prop_assert!(m.p_h >= 1.0 / 17.0 - 1e-12);
        prop_assert!(m.entropy >= -1e-12 && m.entropy <= 17f64.ln() + 1e-9);
    }

    #[test]
    fn only_uniform_reaches_max_entropy(p in simplex(5)) {
        let m = confidence(&p);
        let uniform = p.iter().all(|&x| (x - 0.2).abs() < 1e-6);
        if !uniform {
            prop_assert!(m.entropy < 5f64.ln() - 1e-9);
        }
    }

    #[test]
    fn stricter_combos_keep_subsets(
        probs in prop::collection::vec(simplex(6), 1..80),
        a in combo(),
        b in combo(),
    ) {
        let metrics: Vec<_> = probs.iter().map(|p| confidence(p)).collect();
        let (sa, sb) = (apply_combo(&metrics, &a), apply_combo(&metrics, &b));
        if a.at_least_as_strict_as(&b) {
            prop_assert!(sa.iter().all(|i| sb.contains(i)));
        }
        let brute: Vec<usize> = (0..metrics.len())
            .filter(|&i| {
                let m = &metrics[i];
                a.min_p_h.is_none_or(|t| m.p_h >= t)
                    && a.min_delta.is_none_or(|t| m.delta >= t)
                    && a.max_entropy.is_none_or(|t| m.entropy <= t)
            })
            .collect();
        prop_assert_eq!(sa, brute);
    }

    #[test]
    fn grouped_crosswalk_ignores_mapped_mass_scale(p in simplex(LEAF_COUNT), scale in 0.05f64..1.0) {
        let cw = Crosswalk::published(&Taxonomy::default()).unwrap();
        let mapped: f64 = (0..LEAF_COUNT).filter(|&l| cw.target(l).is_some()).map(|l| p[l]).sum();
        prop_assume!(mapped > 1e-6);
        let unmapped = (0..LEAF_COUNT).filter(|&l| cw.target(l).is_none()).count() as f64;
        // shrink the mapped leaves and spread the freed mass over unmapped ones
        let freed = mapped * (1.0 - scale);
        let q: Vec<f64> = (0..LEAF_COUNT)
            .map(|l| if cw.target(l).is_some() { p[l] * scale } else { p[l] + freed / unmapped })
            .collect();
        let (a, va) = cw.grouped(&LeafVector::new("a", None, p.clone()).unwrap()).unwrap();
        let (b, vb) = cw.grouped(&LeafVector::new("b", None, q).unwrap()).unwrap();
        prop_assert_eq!(a, b);
        for (x, y) in va.iter().zip(&vb) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn f1_only_weights_rank_by_f1() {
    let mut state = 12345u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let samples: Vec<EvaluatedSample> = (0..400)
        .map(|i| {
            let truth = i % 5;
            let mut p: Vec<f64> = (0..5).map(|_| next()).collect();
            p[truth] += 2.0 * next();
            let s: f64 = p.iter().sum();
            EvaluatedSample::new(truth, &p.iter().map(|x| x / s).collect::<Vec<_>>())
        })
        .collect();
    let combos = grid(&ThresholdSets::default());
    let report = evaluate_grid(&samples, &combos, samples.len(), 5, Weights::new([1.0, 0.0, 0.0, 0.0]).unwrap()).unwrap();
    let f1 = |i: usize| report.combos[i].raw.map_or(0.0, |r| r.f1);
    for w in report.ranking.windows(2) {
        assert!(f1(w[0]) >= f1(w[1]), "{} then {}", f1(w[0]), f1(w[1]));
    }
}
