use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::candidate::CandidateSet;
use crate::dataset::{Example, PartialDataset};
use crate::error::{PllError, Result};
use crate::rng;

/// Isotropic Gaussian mixture with a closed-form Bayes posterior.
///
/// Class `k` has prior `priors[k]` and density `N(means[k], variance · I)`,
/// so `p(k | x) ∝ priors[k] · exp(-|x - means[k]|² / (2 · variance))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub means: Vec<Vec<f64>>,
    pub variance: f64,
    pub priors: Vec<f64>,
    pub seed: u64,
}

/// `n` i.i.d. draws from a mixture.
#[derive(Clone, Debug)]
pub struct SyntheticSample {
    pub d: usize,
    /// Row-major `n × d`.
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
}

impl SyntheticSample {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }
}

impl GaussianMixture {
    pub fn new(means: Vec<Vec<f64>>, variance: f64, priors: Vec<f64>, seed: u64) -> Result<Self> {
        let g = GaussianMixture {
            means,
            variance,
            priors,
            seed,
        };
        g.validate()?;
        Ok(g)
    }

    /// `q` equal-prior components on a circle of `radius` in the first two dimensions.
    pub fn on_circle(q: usize, d: usize, radius: f64, variance: f64, seed: u64) -> Self {
        assert!(d >= 2 && q >= 2);
        let means = (0..q)
            .map(|k| {
                let angle = std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * k as f64 / q as f64;
                let mut m = vec![0.0; d];
                m[0] = radius * angle.cos();
                m[1] = radius * angle.sin();
                m
            })
            .collect();
        GaussianMixture {
            means,
            variance,
            priors: vec![1.0 / q as f64; q],
            seed,
        }
    }

    /// `q` equal-prior components spaced `spacing` apart along the first axis.
    pub fn collinear(q: usize, d: usize, spacing: f64, variance: f64, seed: u64) -> Self {
        assert!(d >= 1 && q >= 2);
        let means = (0..q)
            .map(|k| {
                let mut m = vec![0.0; d];
                m[0] = spacing * (k as f64 - (q - 1) as f64 / 2.0);
                m
            })
            .collect();
        GaussianMixture {
            means,
            variance,
            priors: vec![1.0 / q as f64; q],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PllError::InvalidDataset(format!("gaussian mixture: {m}")));
        if self.means.len() < 2 || self.priors.len() != self.means.len() {
            return bad("need >= 2 components and one prior each");
        }
        let d = self.means[0].len();
        if d == 0 || self.means.iter().any(|m| m.len() != d) {
            return bad("means must share a positive dimension");
        }
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return bad("variance must be positive");
        }
        if self.priors.iter().any(|p| !(*p >= 0.0)) || (self.priors.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("priors must be non-negative and sum to 1");
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    /// Draw `i` of the mixture; depends only on `(seed, i)`.
    pub fn draw(&self, i: u64) -> (Vec<f64>, usize) {
        let mut r = rng::stream(self.seed, i);
        let u: f64 = r.random();
        let mut acc = 0.0;
        let mut label = self.priors.len() - 1;
        for (k, p) in self.priors.iter().enumerate() {
            acc += p;
            if u < acc {
                label = k;
                break;
            }
        }
        let sd = self.variance.sqrt();
        let x = self.means[label]
            .iter()
            .map(|m| m + sd * r.sample::<f64, _>(StandardNormal))
            .collect();
        (x, label)
    }

    pub fn sample(&self, n: usize) -> SyntheticSample {
        let d = self.dim();
        let mut features = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let (x, y) = self.draw(i as u64);
            features.extend_from_slice(&x);
            labels.push(y);
        }
        SyntheticSample { d, features, labels }
    }

    /// Exact Bayes posterior `p(· | x)`.
    pub fn posterior(&self, x: &[f64]) -> Vec<f64> {
        let scores: Vec<f64> = self
            .means
            .iter()
            .zip(&self.priors)
            .map(|(m, p)| {
                let dist2: f64 = m.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                p.ln() - dist2 / (2.0 * self.variance)
            })
            .collect();
        crate::nn::softmax(&scores)
    }

    /// A dataset of `n` draws with ordinary (singleton) labels and true labels kept.
    pub fn to_dataset(&self, n: usize, name: &str) -> Result<PartialDataset> {
        let q = self.num_classes();
        let s = self.sample(n);
        let examples = (0..n)
            .map(|i| Example {
                features: s.row(i).to_vec(),
                candidates: CandidateSet::singleton(q, s.labels[i]),
                true_label: Some(s.labels[i]),
            })
            .collect();
        let mut meta = BTreeMap::new();
        meta.insert("source".to_string(), serde_json::to_value(self)?);
        PartialDataset::new(name, q, self.dim(), examples, meta)
    }
}

/// Samples `n` draws and returns features, labels and the posterior oracle.
pub fn sample_synthetic(
    source: &GaussianMixture,
    n: usize,
) -> (SyntheticSample, impl Fn(&[f64]) -> Vec<f64> + '_) {
    (source.sample(n), move |x: &[f64]| source.posterior(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_posterior_is_uniform() {
        let g = GaussianMixture::new(vec![vec![-1.0, 0.0], vec![1.0, 0.0]], 1.0, vec![0.5, 0.5], 0).unwrap();
        let p = g.posterior(&[0.0, 0.0]);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn separated_components_give_confident_posterior() {
        // Means 10 apart, unit variance: log-odds at mu_0 = 100/2 = 50, delta = 1/(1+e^50).
        let g = GaussianMixture::new(vec![vec![0.0, 0.0], vec![10.0, 0.0]], 1.0, vec![0.5, 0.5], 0).unwrap();
        let p = g.posterior(&[0.0, 0.0]);
        let delta = 1.0 / (1.0 + 50f64.exp());
        assert!(p[1] < 1e-3);
        assert!((p[1] - delta).abs() < 1e-25);
    }

    #[test]
    fn class_frequencies_follow_priors() {
        let g = GaussianMixture::new(vec![vec![0.0], vec![1.0]], 1.0, vec![0.3, 0.7], 11).unwrap();
        let n = 1_000_000;
        let s = g.sample(n);
        let freq = s.labels.iter().filter(|&&y| y == 0).count() as f64 / n as f64;
        let sigma = (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((freq - 0.3).abs() <= 3.0 * sigma, "freq {freq}");
    }

    #[test]
    fn draws_are_order_independent() {
        let g = GaussianMixture::on_circle(3, 2, 1.5, 1.0, 4);
        let s = g.sample(10);
        assert_eq!(g.draw(7), (s.row(7).to_vec(), s.labels[7]));
    }

    #[test]
    fn invalid_sources_rejected() {
        assert!(GaussianMixture::new(vec![vec![0.0], vec![1.0]], 0.0, vec![0.5, 0.5], 0).is_err());
        assert!(GaussianMixture::new(vec![vec![0.0], vec![1.0]], 1.0, vec![0.4, 0.5], 0).is_err());
    }
}
