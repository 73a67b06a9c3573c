use std::collections::{BTreeMap, BTreeSet};

use nameorigin::model::ProbVector;
use nameorigin::prevalence::{aggregate_indices, location_split, prevalence, GroupBy, InventorRecord};
use nameorigin::taxonomy::Taxonomy;
use proptest::prelude::*;

const K: usize = 6;
const COUNTRIES: [&str; 3] = ["DE", "FR", "JP"];

fn record() -> impl Strategy<Value = InventorRecord> {
    (0usize..3, 2000i32..2004, prop::collection::vec(0.001f64..1.0, K)).prop_map(|(c, year, raw)| {
        let s: f64 = raw.iter().sum();
        InventorRecord {
            inventor_id: String::new(),
            name: "n".into(),
            country: COUNTRIES[c].into(),
            tech_field: "t".into(),
            priority_year: year,
            prediction: ProbVector::new(raw.iter().map(|x| x / s).collect()).unwrap(),
        }
    })
}

fn series(records: &[InventorRecord]) -> Vec<nameorigin::prevalence::PrevalencePoint> {
    prevalence(records, GroupBy::Country, &BTreeMap::new(), K).unwrap()
}

proptest! {
    #[test]
    fn cells_are_distributions(records in prop::collection::vec(record(), 1..200)) {
        let s = series(&records);
        prop_assert_eq!(s.iter().map(|p| p.n).sum::<usize>(), records.len());
        for p in &s {
            prop_assert!((p.values.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(p.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn union_is_weighted_average(
        a in prop::collection::vec(record(), 1..100),
        b in prop::collection::vec(record(), 1..100),
    ) {
        let union: Vec<_> = a.iter().chain(&b).cloned().collect();
        let (sa, sb) = (series(&a), series(&b));
        for u in series(&union) {
            let pa = sa.iter().find(|p| p.group == u.group && p.year == u.year);
            let pb = sb.iter().find(|p| p.group == u.group && p.year == u.year);
            let (na, nb) = (pa.map_or(0, |p| p.n), pb.map_or(0, |p| p.n));
            prop_assert_eq!(na + nb, u.n);
            for k in 0..K {
                let w = (na as f64 * pa.map_or(0.0, |p| p.values[k]) + nb as f64 * pb.map_or(0.0, |p| p.values[k]))
                    / u.n as f64;
                prop_assert!((w - u.values[k]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn subset_sums_add_up(records in prop::collection::vec(record(), 1..100)) {
        let s = series(&records);
        let (x, y, both) = (aggregate_indices(&s, &[0, 2]), aggregate_indices(&s, &[5]), aggregate_indices(&s, &[0, 2, 5]));
        for ((p, q), r) in x.iter().zip(&y).zip(&both) {
            prop_assert!((p.value + q.value - r.value).abs() <= 1e-12);
        }
    }

    #[test]
    fn location_shares_sum_to_one(records in prop::collection::vec(record(), 1..150)) {
        let taxonomy = Taxonomy::new(&["a", "b", "c", "d", "e", "f"]).unwrap();
        let mut homes = BTreeMap::new();
        homes.insert(1, BTreeSet::from(["DE".to_string()]));
        homes.insert(4, BTreeSet::from(["FR".to_string(), "JP".to_string()]));
        for s in location_split(&records, &[1, 4], &homes, &taxonomy).unwrap() {
            if s.domestic + s.abroad > 0 {
                prop_assert!((s.domestic_share() + s.abroad_share() - 1.0).abs() <= 1e-12);
            }
        }
    }
}
