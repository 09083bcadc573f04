//! Synthetic candidate-set generation.
//!
//! Two instance-independent processes are provided:
//!
//! * uniform sampling (USS): `S` is drawn uniformly from the `2^(q-1) - 1`
//!   subsets that contain the true label, minus one excluded set;
//! * flipping probabilities (FPS): each wrong label `m` joins `S`
//!   independently with probability `flip[y][m]` (a constant `c` in the
//!   common special case).
//!
//! Both satisfy `p(S | x, y) = C(x, S) · I(y ∈ S)`, the factorization the
//! approximated-accuracy criterion relies on; [`factorizes`] verifies it by
//! enumeration.

mod synthetic;

pub use synthetic::{sample_synthetic, GaussianMixture, SyntheticSample};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::candidate::CandidateSet;
use crate::dataset::{Example, PartialDataset};
use crate::error::{PllError, Result};
use crate::rng;

/// Which set USS leaves out of its support.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UssExclusion {
    /// Exclude the full label set (default).
    #[default]
    FullSet,
    /// Exclude the singleton `{y}` instead.
    Singleton,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GenerationKind {
    Uss { exclude: UssExclusion },
    FpsConstant { flip: f64 },
    /// Per-pair flip probabilities `flip[y][m]`; the diagonal is ignored.
    FpsMatrix { flip: Vec<Vec<f64>> },
}

/// A candidate generation process and its seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GenerationRepr", into = "GenerationRepr")]
pub struct GenerationModel {
    pub kind: GenerationKind,
    pub seed: u64,
}

// Wire form: {"kind":"uss"|"fps","flip":float|matrix,"seed":int}
#[derive(Serialize, Deserialize)]
struct GenerationRepr {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    flip: Option<serde_json::Value>,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exclude: Option<UssExclusion>,
}

impl From<GenerationModel> for GenerationRepr {
    fn from(m: GenerationModel) -> Self {
        match m.kind {
            GenerationKind::Uss { exclude } => GenerationRepr {
                kind: "uss".into(),
                flip: None,
                seed: m.seed,
                exclude: (exclude != UssExclusion::FullSet).then_some(exclude),
            },
            GenerationKind::FpsConstant { flip } => GenerationRepr {
                kind: "fps".into(),
                flip: Some(serde_json::json!(flip)),
                seed: m.seed,
                exclude: None,
            },
            GenerationKind::FpsMatrix { flip } => GenerationRepr {
                kind: "fps".into(),
                flip: Some(serde_json::json!(flip)),
                seed: m.seed,
                exclude: None,
            },
        }
    }
}

impl TryFrom<GenerationRepr> for GenerationModel {
    type Error = PllError;

    fn try_from(r: GenerationRepr) -> Result<Self> {
        let kind = match r.kind.as_str() {
            "uss" => GenerationKind::Uss {
                exclude: r.exclude.unwrap_or_default(),
            },
            "fps" => match r.flip {
                Some(serde_json::Value::Number(n)) => GenerationKind::FpsConstant {
                    flip: n.as_f64().unwrap_or(f64::NAN),
                },
                Some(v @ serde_json::Value::Array(_)) => GenerationKind::FpsMatrix {
                    flip: serde_json::from_value(v)?,
                },
                _ => return Err(PllError::InvalidGeneration("fps requires `flip`".into())),
            },
            other => {
                return Err(PllError::Unknown {
                    kind: "generation kind",
                    value: other.into(),
                })
            }
        };
        let model = GenerationModel { kind, seed: r.seed };
        model.validate(None)?;
        Ok(model)
    }
}

impl GenerationModel {
    pub fn uss(seed: u64) -> Self {
        GenerationModel {
            kind: GenerationKind::Uss {
                exclude: UssExclusion::FullSet,
            },
            seed,
        }
    }

    pub fn fps(flip: f64, seed: u64) -> Self {
        GenerationModel {
            kind: GenerationKind::FpsConstant { flip },
            seed,
        }
    }

    pub fn fps_matrix(flip: Vec<Vec<f64>>, seed: u64) -> Self {
        GenerationModel {
            kind: GenerationKind::FpsMatrix { flip },
            seed,
        }
    }

    /// Checks parameter ranges, and the matrix shape when `q` is known.
    pub fn validate(&self, q: Option<usize>) -> Result<()> {
        match &self.kind {
            GenerationKind::Uss { .. } => Ok(()),
            GenerationKind::FpsConstant { flip } => {
                if (0.0..1.0).contains(flip) {
                    Ok(())
                } else {
                    Err(PllError::InvalidGeneration(format!("constant flip {flip} not in [0, 1)")))
                }
            }
            GenerationKind::FpsMatrix { flip } => {
                if let Some(q) = q {
                    if flip.len() != q || flip.iter().any(|r| r.len() != q) {
                        return Err(PllError::InvalidGeneration(format!("flip matrix must be {q}x{q}")));
                    }
                }
                for (i, row) in flip.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        if i != j && !(0.0..=1.0).contains(v) {
                            return Err(PllError::InvalidGeneration(format!(
                                "flip[{i}][{j}] = {v} not in [0, 1]"
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Probability that wrong label `m` enters the set of an example of class `y`.
    pub fn inclusion_probability(&self, y: usize, m: usize, q: usize) -> f64 {
        if y == m {
            return 1.0;
        }
        match &self.kind {
            GenerationKind::Uss { exclude } => uss_pair_inclusion(q, *exclude),
            GenerationKind::FpsConstant { flip } => *flip,
            GenerationKind::FpsMatrix { flip } => flip[y][m],
        }
    }

    /// Draws a candidate set for an example of class `y`.
    pub fn sample<R: Rng + ?Sized>(&self, y: usize, q: usize, rng: &mut R) -> CandidateSet {
        match &self.kind {
            GenerationKind::Uss { exclude } => sample_uss(y, q, *exclude, rng),
            GenerationKind::FpsConstant { flip } => {
                let mut s = CandidateSet::singleton(q, y);
                for m in (0..q).filter(|&m| m != y) {
                    if rng.random::<f64>() < *flip {
                        s.insert(m);
                    }
                }
                s
            }
            GenerationKind::FpsMatrix { flip } => generate_candidates_fps_matrix(y, q, flip, rng),
        }
    }

    /// Exact `p(S | y)` under this model.
    pub fn set_probability(&self, y: usize, set: &CandidateSet) -> f64 {
        let q = set.num_classes();
        if !set.contains(y) {
            return 0.0;
        }
        match &self.kind {
            GenerationKind::Uss { exclude } => {
                let excluded = match exclude {
                    UssExclusion::FullSet => set.is_full(),
                    UssExclusion::Singleton => set.len() == 1,
                };
                if excluded {
                    0.0
                } else {
                    1.0 / uss_support_size(q)
                }
            }
            _ => (0..q)
                .filter(|&m| m != y)
                .map(|m| {
                    let p = self.inclusion_probability(y, m, q);
                    if set.contains(m) {
                        p
                    } else {
                        1.0 - p
                    }
                })
                .product(),
        }
    }
}

/// `2^(q-1) - 1` as a float.
pub fn uss_support_size(q: usize) -> f64 {
    2f64.powi(q as i32 - 1) - 1.0
}

fn uss_pair_inclusion(q: usize, exclude: UssExclusion) -> f64 {
    // Sets containing both y and m: 2^(q-2), minus one if the excluded set contains both.
    let tail = 0.5f64.powi(q as i32 - 1);
    match exclude {
        UssExclusion::FullSet => (0.5 - tail) / (1.0 - tail),
        UssExclusion::Singleton => 0.5 / (1.0 - tail),
    }
}

fn sample_uss<R: Rng + ?Sized>(y: usize, q: usize, exclude: UssExclusion, rng: &mut R) -> CandidateSet {
    assert!(q >= 2, "USS needs at least two classes");
    // Uniform over subsets of the q-1 wrong labels, rejecting the excluded one.
    loop {
        let mut s = CandidateSet::singleton(q, y);
        for m in (0..q).filter(|&m| m != y) {
            if rng.random::<bool>() {
                s.insert(m);
            }
        }
        let rejected = match exclude {
            UssExclusion::FullSet => s.is_full(),
            UssExclusion::Singleton => s.len() == 1,
        };
        if !rejected {
            return s;
        }
    }
}

/// Uniform sampling strategy with the full label set excluded from the support.
pub fn generate_candidates_uss<R: Rng + ?Sized>(true_label: usize, q: usize, rng: &mut R) -> CandidateSet {
    sample_uss(true_label, q, UssExclusion::FullSet, rng)
}

/// Flipping-probability strategy. Panics if `model` is a USS model.
pub fn generate_candidates_fps<R: Rng + ?Sized>(
    true_label: usize,
    q: usize,
    model: &GenerationModel,
    rng: &mut R,
) -> CandidateSet {
    assert!(
        !matches!(model.kind, GenerationKind::Uss { .. }),
        "generate_candidates_fps needs an FPS model"
    );
    model.sample(true_label, q, rng)
}

fn generate_candidates_fps_matrix<R: Rng + ?Sized>(
    y: usize,
    q: usize,
    flip: &[Vec<f64>],
    rng: &mut R,
) -> CandidateSet {
    let mut s = CandidateSet::singleton(q, y);
    for m in (0..q).filter(|&m| m != y) {
        if rng.random::<f64>() < flip[y][m] {
            s.insert(m);
        }
    }
    s
}

/// Replaces every example's candidates with a draw from `model`. Example `i`
/// uses random stream `i` under `model.seed`, so the result is independent of
/// evaluation order. The model is recorded under the `generation` metadata key.
pub fn apply_generation(source: &PartialDataset, model: &GenerationModel) -> Result<PartialDataset> {
    let q = source.num_classes();
    model.validate(Some(q))?;
    let mut examples = Vec::with_capacity(source.len());
    for (i, ex) in source.examples().iter().enumerate() {
        let y = ex.true_label.ok_or(PllError::MissingTrueLabel { index: i })?;
        let mut rng = rng::stream(model.seed, i as u64);
        examples.push(Example {
            features: ex.features.clone(),
            candidates: model.sample(y, q, &mut rng),
            true_label: Some(y),
        });
    }
    Ok(source
        .with_examples(examples)
        .with_metadata("generation", serde_json::to_value(model)?))
}

/// Empirical `p(j ∈ S | y = i)`. Rows of classes without examples are `None`.
pub fn estimate_flip_matrix(dataset: &PartialDataset) -> Result<Vec<Vec<Option<f64>>>> {
    let q = dataset.num_classes();
    let mut counts = vec![vec![0usize; q]; q];
    let mut totals = vec![0usize; q];
    for (i, ex) in dataset.examples().iter().enumerate() {
        let y = ex.true_label.ok_or(PllError::MissingTrueLabel { index: i })?;
        totals[y] += 1;
        for j in ex.candidates.iter() {
            counts[y][j] += 1;
        }
    }
    Ok(counts
        .into_iter()
        .zip(totals)
        .map(|(row, total)| {
            row.into_iter()
                .map(|c| (total > 0).then(|| c as f64 / total as f64))
                .collect()
        })
        .collect())
}

/// Ambiguity degree: the largest probability that a specific wrong label
/// co-occurs with the true label.
pub fn ambiguity_degree(model: &GenerationModel, q: usize) -> f64 {
    match &model.kind {
        GenerationKind::Uss { exclude } => uss_pair_inclusion(q, *exclude),
        GenerationKind::FpsConstant { flip } => *flip,
        GenerationKind::FpsMatrix { flip } => {
            let mut gamma = 0.0f64;
            for (i, row) in flip.iter().enumerate().take(q) {
                for (j, v) in row.iter().enumerate().take(q) {
                    if i != j {
                        gamma = gamma.max(*v);
                    }
                }
            }
            gamma
        }
    }
}

/// Every subset of `{0..q}` as a candidate set (includes the empty set).
pub fn all_subsets(q: usize) -> impl Iterator<Item = CandidateSet> {
    assert!(q < 24, "enumeration limited to small q");
    (0u32..(1 << q)).map(move |mask| {
        CandidateSet::from_indices(q, (0..q).filter(|j| mask & (1 << j) != 0)).expect("in range")
    })
}

/// Checks `p(S|y) = C(S) · I(y ∈ S)` by enumeration: for every non-empty `S`,
/// all labels inside `S` must assign it the same probability.
pub fn factorizes(model: &GenerationModel, q: usize) -> bool {
    all_subsets(q).filter(|s| !s.is_empty()).all(|s| {
        let mut vals = s.iter().map(|y| model.set_probability(y, &s));
        let first = vals.next().expect("non-empty");
        vals.all(|v| (v - first).abs() <= 1e-12)
    })
}
