use pllbench::nn::Matrix;
use pllbench::selection::{
    approximated_accuracy, covering_rate, oracle_accuracy, select_checkpoint, select_config, CheckpointRecord, Criterion,
    RunHistory,
};
use pllbench::CandidateSet;
use proptest::prelude::*;

fn history(values: &[(f64, f64)]) -> Vec<CheckpointRecord> {
    values
        .iter()
        .enumerate()
        .map(|(i, &(cr, test))| CheckpointRecord {
            iteration: 1000 * (i + 1),
            cr,
            aa: cr,
            oa: Some(1.0 - cr),
            test_accuracy: test,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn covering_rate_equals_accuracy_on_singletons(
        (q, pairs) in (2usize..8).prop_flat_map(|q| (Just(q), prop::collection::vec((0..q, 0..q), 1..50)))
    ) {
        let sets: Vec<CandidateSet> = pairs.iter().map(|&(y, _)| CandidateSet::singleton(q, y)).collect();
        let refs: Vec<&CandidateSet> = sets.iter().collect();
        let labels: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let preds: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let cr = covering_rate(&preds, &refs).unwrap();
        let oa = oracle_accuracy(&preds, &labels).unwrap();
        prop_assert_eq!(cr.to_bits(), oa.to_bits());
    }

    #[test]
    fn approximated_accuracy_bounds(
        (q, rows) in (2usize..6).prop_flat_map(|q| (
            Just(q),
            prop::collection::vec((prop::collection::vec(0.0f64..1.0, q), prop::collection::btree_set(0..q, 1..=q)), 1..30),
        ))
    ) {
        let n = rows.len();
        let mut data = Vec::new();
        let mut onehot = Vec::new();
        let mut preds = Vec::new();
        let mut sets = Vec::new();
        for (w, s) in &rows {
            let total: f64 = w.iter().sum::<f64>() + 1e-9;
            data.extend(w.iter().map(|v| (v + 1e-9 / q as f64) / total));
            let p = pllbench::nn::argmax(w);
            preds.push(p);
            onehot.extend((0..q).map(|j| if j == p { 1.0 } else { 0.0 }));
            sets.push(CandidateSet::from_indices(q, s.iter().copied()).unwrap());
        }
        let refs: Vec<&CandidateSet> = sets.iter().collect();
        let aa = approximated_accuracy(&Matrix::from_vec(n, q, data).unwrap(), &refs).unwrap();
        prop_assert!((0.0..=1.0).contains(&aa));
        let aa1 = approximated_accuracy(&Matrix::from_vec(n, q, onehot).unwrap(), &refs).unwrap();
        prop_assert_eq!(aa1, covering_rate(&preds, &refs).unwrap());
    }

    #[test]
    fn checkpoint_selection_matches_a_naive_scan(values in prop::collection::vec((0u8..5, 0.0f64..1.0), 1..20)) {
        let vals: Vec<(f64, f64)> = values.iter().map(|&(c, t)| (c as f64 / 4.0, t)).collect();
        let h = history(&vals);
        let (i, v) = select_checkpoint(Criterion::Cr, &h).unwrap();
        let best = vals.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
        let first = vals.iter().position(|v| v.0 == best).unwrap();
        prop_assert_eq!((i, v), (first, best));
        prop_assert_eq!(select_checkpoint(Criterion::Oa, &h).unwrap().0, h.len() - 1);
        prop_assert_eq!(select_checkpoint(Criterion::Cr, &h).unwrap(), select_checkpoint(Criterion::Cr, &h.clone()).unwrap());
    }
}

#[test]
fn config_ties_go_to_the_lower_index() {
    let a = history(&[(0.8, 0.1)]);
    let b = history(&[(0.8, 0.9)]);
    let runs = [RunHistory { history: &a, failed: false }, RunHistory { history: &b, failed: false }];
    let s = select_config(Criterion::Cr, &runs).unwrap();
    assert_eq!((s.config_index, s.test_accuracy), (0, 0.1));
}
