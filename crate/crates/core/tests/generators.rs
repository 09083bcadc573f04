mod common;

use common::{family_z, fps_inclusion_check, uss_frequency_check};
use pllbench::datagen::{all_subsets, apply_generation, estimate_flip_matrix, GaussianMixture, GenerationModel};
use pllbench::{load_dataset, save_dataset, CandidateSet, DatasetFormat, Example, PartialDataset};
use proptest::prelude::*;
use std::collections::BTreeMap;

#[test]
fn uss_frequencies_at_one_million() {
    for q in 2..=6 {
        let (p, z) = uss_frequency_check(q, q / 2, 1_000_000, 17);
        assert!(p > 1e-3, "q={q}: chi-square p-value {p}");
        let cells = (1usize << (q - 1)) - 1;
        assert!(z <= family_z(cells), "q={q}: worst |z| {z}");
    }
}

#[test]
fn uss_q4_seven_sets_each_one_seventh() {
    let (p, z) = uss_frequency_check(4, 2, 1_000_000, 3);
    assert!(p > 1e-3 && z <= family_z(7));
}

#[test]
fn fps_inclusions_independent() {
    for c in [0.1, 0.5] {
        let (z, corr) = fps_inclusion_check(5, c, 1_000_000, 23);
        assert!(z <= family_z(4), "c={c}: worst |z| {z}");
        assert!(corr < 0.01, "c={c}: correlation {corr}");
    }
}

fn labelled(n: usize, q: usize) -> PartialDataset {
    GaussianMixture::on_circle(q, 2, 1.0, 1.0, 5).to_dataset(n, "src").unwrap()
}

#[test]
fn average_candidate_counts() {
    let fps = apply_generation(&labelled(100_000, 5), &GenerationModel::fps(0.3, 8)).unwrap();
    assert!((fps.stats().avg_candidates - 2.2).abs() < 0.02);
    // Exact USS mean size by enumeration over the seven supported sets.
    let model = GenerationModel::uss(9);
    let exact: f64 = all_subsets(4).map(|s| s.len() as f64 * model.set_probability(0, &s)).sum();
    assert!((exact - 16.0 / 7.0).abs() < 1e-12);
    let uss = apply_generation(&labelled(100_000, 4), &model).unwrap();
    assert!((uss.stats().avg_candidates - exact).abs() < 0.02);
    let none = apply_generation(&labelled(1000, 3), &GenerationModel::fps(0.0, 1)).unwrap();
    assert_eq!(none.stats().avg_candidates, 1.0);
    assert_eq!(none.metadata()["generation"], serde_json::json!({"kind":"fps","flip":0.0,"seed":1}));
}

#[test]
fn flip_matrix_estimate() {
    let data = apply_generation(&labelled(100_000, 3), &GenerationModel::fps(0.5, 2)).unwrap();
    let m = estimate_flip_matrix(&data).unwrap();
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let v = v.unwrap();
            if i == j {
                assert_eq!(v, 1.0);
            } else {
                assert!((v - 0.5).abs() < 0.01, "({i},{j}) = {v}");
            }
        }
    }
}

#[test]
fn generation_is_order_independent() {
    let src = labelled(50, 4);
    let model = GenerationModel::uss(12);
    let whole = apply_generation(&src, &model).unwrap();
    let idx: Vec<usize> = (0..50).collect();
    let again = apply_generation(&src.subset(&idx, "src"), &model).unwrap();
    assert_eq!(whole.candidates(), again.candidates());
}

#[test]
fn missing_true_label_is_an_error() {
    let ex = Example {
        features: vec![0.0],
        candidates: CandidateSet::singleton(2, 0),
        true_label: None,
    };
    let d = PartialDataset::new("x", 2, 1, vec![ex], BTreeMap::new()).unwrap();
    assert!(apply_generation(&d, &GenerationModel::uss(0)).is_err());
}

fn dataset_strategy() -> impl Strategy<Value = PartialDataset> {
    (2usize..6, 1usize..4, 1usize..20).prop_flat_map(|(q, d, n)| {
        prop::collection::vec(
            (
                prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), d),
                prop::collection::btree_set(0..q, 1..=q),
                prop::option::of(0..q),
            ),
            n,
        )
        .prop_map(move |rows| {
            let examples = rows
                .into_iter()
                .map(|(features, s, y)| Example {
                    features,
                    candidates: CandidateSet::from_indices(q, s).unwrap(),
                    true_label: y,
                })
                .collect();
            PartialDataset::new("prop", q, d, examples, BTreeMap::new()).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn save_load_round_trip(data in dataset_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        // CSV carries no header for q, which is inferred from the largest label.
        let q = data.num_classes();
        let top_used = data.examples().iter().any(|e| e.candidates.contains(q - 1) || e.true_label == Some(q - 1));
        let mut formats = vec![("d.jsonl", DatasetFormat::Jsonl)];
        if top_used {
            formats.push(("d.csv", DatasetFormat::Csv));
        }
        for (file, fmt) in formats {
            let path = dir.path().join(file);
            save_dataset(&data, &path, fmt).unwrap();
            let back = load_dataset(&path, fmt).unwrap();
            prop_assert_eq!(back.examples(), data.examples());
            prop_assert_eq!(back.num_classes(), data.num_classes());
        }
    }
}
