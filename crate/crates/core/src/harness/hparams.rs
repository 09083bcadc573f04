use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmId, AlgorithmSpec};

/// Optimizer settings and algorithm hyperparameters for one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub lr: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub algorithm: AlgorithmSpec,
}

impl HyperParams {
    /// Default values: lr 1e-3, batch 128, weight decay 1e-5, algorithm
    /// defaults.
    pub fn defaults(id: AlgorithmId) -> Self {
        HyperParams {
            lr: 1e-3,
            batch_size: 128,
            weight_decay: 1e-5,
            algorithm: AlgorithmSpec::with_defaults(id),
        }
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo..hi))
}

/// Draws one random-search configuration:
/// lr = 10^U(-4.5, -2.5), batch = 2^round(U(5, 8)), weight decay =
/// 10^U(-6, -3), plus the algorithm's own hyperparameters.
pub fn sample_hparams<R: Rng + ?Sized>(id: AlgorithmId, rng: &mut R) -> HyperParams {
    let lr = log_uniform(rng, -4.5, -2.5);
    let batch_size = 1usize << rng.random_range(5.0..8.0f64).round() as u32;
    let weight_decay = log_uniform(rng, -6.0, -3.0);
    let mut h = BTreeMap::new();
    match id {
        AlgorithmId::Lws => {
            h.insert("leverage".to_string(), [1.0, 2.0][rng.random_range(0..2)]);
        }
        AlgorithmId::Pop => {
            h.insert("window".to_string(), rng.random_range(3..=7) as f64);
            h.insert("warm_up".to_string(), [10.0, 15.0, 20.0][rng.random_range(0..3)]);
            h.insert("threshold".to_string(), log_uniform(rng, -4.5, -2.5));
            h.insert("step".to_string(), log_uniform(rng, -4.5, -2.5));
        }
        _ => {}
    }
    HyperParams {
        lr,
        batch_size,
        weight_decay,
        algorithm: AlgorithmSpec::new(id, h).expect("sampled values are in range"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn draws_stay_in_range() {
        let mut r = rng::stream(3, 0);
        for _ in 0..2000 {
            let h = sample_hparams(AlgorithmId::Pop, &mut r);
            assert!(h.lr >= 10f64.powf(-4.5) && h.lr <= 10f64.powf(-2.5));
            assert!([32, 64, 128, 256].contains(&h.batch_size));
            assert!(h.weight_decay >= 1e-6 && h.weight_decay <= 1e-3);
            let w = h.algorithm.hparams()["window"];
            assert!((3.0..=7.0).contains(&w));
        }
        let h = sample_hparams(AlgorithmId::AbsGce, &mut r);
        assert_eq!(h.algorithm.hparams()["rho"], 0.7);
    }
}
