#![allow(dead_code)]

use pllbench::algorithms::{self, AlgorithmId, AlgorithmSpec, AlgorithmState, Batch};
use pllbench::nn::{softmax_rows, Matrix};
use pllbench::rng;
use pllbench::CandidateSet;
use rand::Rng;
use rand_distr::StandardNormal;

pub struct Instance {
    pub spec: AlgorithmSpec,
    pub logits: Matrix,
    pub sets: Vec<CandidateSet>,
    pub state: AlgorithmState,
}

impl Instance {
    pub fn refs(&self) -> Vec<&CandidateSet> {
        self.sets.iter().collect()
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.sets.len()).collect()
    }

    pub fn loss_at(&self, logits: &Matrix) -> (f64, Matrix) {
        let probs = softmax_rows(logits);
        let refs = self.refs();
        let idx = self.indices();
        let batch = Batch {
            logits,
            probs: &probs,
            candidates: &refs,
            indices: &idx,
        };
        algorithms::loss_and_grad(&self.spec, &batch, &self.state).unwrap()
    }
}

/// A random batch with `q ≤ 6` and `B ≤ 8`; stateful algorithms get one
/// state refresh from unrelated outputs so their weights are not uniform.
pub fn random_instance(id: AlgorithmId, seed: u64) -> Instance {
    let mut r = rng::stream(seed, id as u64);
    let q = r.random_range(2..=6usize);
    let b = r.random_range(1..=8usize);
    let sets: Vec<CandidateSet> = (0..b)
        .map(|_| loop {
            let s = CandidateSet::from_indices(q, (0..q).filter(|_| r.random_bool(0.5))).unwrap();
            if !s.is_empty() && !(id.is_complementary() && s.is_full() && r.random_bool(0.7)) {
                break s;
            }
        })
        .collect();
    let data: Vec<f64> = (0..b * q).map(|_| 1.5 * r.sample::<f64, _>(StandardNormal)).collect();
    let logits = Matrix::from_vec(b, q, data).unwrap();
    let spec = if id == AlgorithmId::Lws {
        let mut h = std::collections::BTreeMap::new();
        h.insert("leverage".to_string(), if r.random_bool(0.5) { 1.0 } else { 2.0 });
        AlgorithmSpec::new(id, h).unwrap()
    } else {
        AlgorithmSpec::with_defaults(id)
    };
    let refs: Vec<&CandidateSet> = sets.iter().collect();
    let mut state = algorithms::make_initial_state(&spec, &refs);
    if id.has_state() {
        let other: Vec<f64> = (0..b * q).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let other = Matrix::from_vec(b, q, other).unwrap();
        let probs = softmax_rows(&other);
        let idx: Vec<usize> = (0..b).collect();
        let batch = Batch {
            logits: &other,
            probs: &probs,
            candidates: &refs,
            indices: &idx,
        };
        algorithms::update_state(&spec, &batch, &mut state).unwrap();
    }
    Instance {
        spec,
        logits,
        sets,
        state,
    }
}

/// Relative error with a small absolute floor in the denominator.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5)
}

/// Largest relative error between the analytic logit gradient and central
/// differences with step `1e-6`, over every logit.
pub fn max_logit_grad_error(inst: &Instance) -> f64 {
    let h = 1e-6;
    let (_, grad) = inst.loss_at(&inst.logits);
    let mut worst = 0.0f64;
    for k in 0..inst.logits.as_slice().len() {
        let mut plus = inst.logits.clone();
        plus.as_mut_slice()[k] += h;
        let mut minus = inst.logits.clone();
        minus.as_mut_slice()[k] -= h;
        let numeric = (inst.loss_at(&plus).0 - inst.loss_at(&minus).0) / (2.0 * h);
        worst = worst.max(rel_err(grad.as_slice()[k], numeric));
    }
    worst
}

/// Per-cell |z| limit that keeps the family-wise false-alarm rate of `cells`
/// simultaneous checks at the two-sided 3σ level (Bonferroni).
pub fn family_z(cells: usize) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let alpha = 2.0 * (1.0 - phi(3.0));
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - alpha / (2.0 * cells as f64))
}

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

fn mask(s: &CandidateSet) -> usize {
    s.iter().fold(0, |m, j| m | (1 << j))
}

/// USS frequency check for class `y`: returns the chi-square p-value over
/// the supported sets and the largest per-set |z| score.
pub fn uss_frequency_check(q: usize, y: usize, n: usize, seed: u64) -> (f64, f64) {
    use pllbench::datagen::{generate_candidates_uss, uss_support_size};
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let mut counts = vec![0usize; 1 << q];
    let mut r = rng::stream(seed, q as u64);
    for _ in 0..n {
        counts[mask(&generate_candidates_uss(y, q, &mut r))] += 1;
    }
    let k = uss_support_size(q);
    let p = 1.0 / k;
    let expected = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    let full = (1 << q) - 1;
    let mut chi2 = 0.0;
    let mut worst_z = 0.0f64;
    for (m, &c) in counts.iter().enumerate() {
        let supported = m & (1 << y) != 0 && m != full;
        if supported {
            chi2 += (c as f64 - expected).powi(2) / expected;
            if k > 1.0 {
                worst_z = worst_z.max((c as f64 - expected).abs() / sd);
            }
        } else {
            assert_eq!(c, 0, "unsupported set {m:b} drawn");
        }
    }
    let pvalue = if k > 1.0 {
        1.0 - ChiSquared::new(k - 1.0).unwrap().cdf(chi2)
    } else {
        1.0
    };
    (pvalue, worst_z)
}

/// FPS check with constant flip `c`: largest |z| of the per-label inclusion
/// frequencies and largest |correlation| between two wrong labels.
pub fn fps_inclusion_check(q: usize, c: f64, n: usize, seed: u64) -> (f64, f64) {
    use pllbench::datagen::{generate_candidates_fps, GenerationModel};
    let model = GenerationModel::fps(c, seed);
    let mut r = rng::stream(seed, 1);
    let mut single = vec![0usize; q];
    let mut joint = vec![vec![0usize; q]; q];
    let y = 0;
    for _ in 0..n {
        let s = generate_candidates_fps(y, q, &model, &mut r);
        assert!(s.contains(y));
        let members = s.to_vec();
        for &a in &members {
            single[a] += 1;
            for &b in &members {
                joint[a][b] += 1;
            }
        }
    }
    let nf = n as f64;
    let sd = (c * (1.0 - c) / nf).sqrt();
    let mut worst_z = 0.0f64;
    let mut worst_corr = 0.0f64;
    for a in 1..q {
        let fa = single[a] as f64 / nf;
        worst_z = worst_z.max((fa - c).abs() / sd);
        for b in a + 1..q {
            let fb = single[b] as f64 / nf;
            let fab = joint[a][b] as f64 / nf;
            let corr = (fab - fa * fb) / (fa * (1.0 - fa) * fb * (1.0 - fb)).sqrt();
            worst_corr = worst_corr.max(corr.abs());
        }
    }
    (worst_z, worst_corr)
}
