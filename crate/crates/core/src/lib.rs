//! A benchmark engine for partial-label learning.
//!
//! Training examples carry a *candidate set* of labels that (usually)
//! contains the concealed true label. The crate provides:
//!
//! * datasets, file formats and deterministic splits ([`dataset`], [`split`]);
//! * synthetic candidate generation by uniform sampling or flipping
//!   probabilities, and Gaussian-mixture sources with exact posteriors
//!   ([`datagen`]);
//! * a one-hidden-layer MLP with Adam ([`nn`]);
//! * eighteen partial- and complementary-label training losses
//!   ([`algorithms`]);
//! * covering rate, approximated accuracy and oracle accuracy for model
//!   selection without clean labels ([`selection`]);
//! * random-search sweeps, aggregation and reports ([`harness`]);
//! * Monte Carlo checks of the selection criteria ([`theory`]).
//!
//! ```
//! use pllbench::datagen::{apply_generation, GaussianMixture, GenerationModel};
//!
//! let source = GaussianMixture::on_circle(3, 2, 1.5, 1.0, 7);
//! let clean = source.to_dataset(200, "blobs").unwrap();
//! let partial = apply_generation(&clean, &GenerationModel::fps(0.3, 11)).unwrap();
//! let stats = partial.stats();
//! assert_eq!(stats.n, 200);
//! assert!(stats.avg_candidates > 1.0);
//! ```

pub mod algorithms;
pub mod candidate;
pub mod datagen;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod nn;
pub mod rng;
pub mod selection;
pub mod split;
pub mod theory;

pub use algorithms::{AlgorithmId, AlgorithmSpec};
pub use candidate::CandidateSet;
pub use dataset::{dataset_stats, load_dataset, load_dataset_auto, save_dataset, DatasetFormat, Example, PartialDataset};
pub use error::{PllError, Result};
pub use selection::{CheckpointRecord, Criterion};
pub use split::{split, SplitSpec};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/generation.md")]
    mod generation {}
    #[doc = include_str!("../../../book/src/algorithms.md")]
    mod algorithms {}
    #[doc = include_str!("../../../book/src/selection.md")]
    mod selection {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/theory.md")]
    mod theory {}
}
