//! Vanilla deep PLL and CLL algorithms behind one interface.
//!
//! Each algorithm is a per-batch loss with an exact gradient with respect to
//! the logits, plus optional per-example state (label confidences, a
//! shrinking candidate mask, leveraged weights) that is refreshed after every
//! optimizer step on the same batch.
//!
//! Complementary-label algorithms run on partial-label data by treating every
//! label outside `S` as a complementary label; their per-label losses are
//! averaged over `|S̄|`, and an example whose candidate set is the full label
//! set contributes nothing.

mod losses;
mod state;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use state::{AlgorithmState, ConfidenceMatrix, LwsWeights, PopState};

use crate::candidate::CandidateSet;
use crate::error::{PllError, Result};
use crate::nn::Matrix;

/// Floor applied to probabilities inside logarithms and denominators.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmId {
    Proden,
    Cavl,
    Pop,
    AbsMae,
    AbsGce,
    Exp,
    MclGce,
    MclMse,
    Cc,
    Lws,
    Pc,
    Forward,
    Nn,
    Ga,
    SclExp,
    SclNl,
    LW,
    OpW,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 18] = [
        AlgorithmId::Proden,
        AlgorithmId::Cavl,
        AlgorithmId::Pop,
        AlgorithmId::AbsMae,
        AlgorithmId::AbsGce,
        AlgorithmId::Exp,
        AlgorithmId::MclGce,
        AlgorithmId::MclMse,
        AlgorithmId::Cc,
        AlgorithmId::Lws,
        AlgorithmId::Pc,
        AlgorithmId::Forward,
        AlgorithmId::Nn,
        AlgorithmId::Ga,
        AlgorithmId::SclExp,
        AlgorithmId::SclNl,
        AlgorithmId::LW,
        AlgorithmId::OpW,
    ];

    /// Lowercase identifier used in records and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::Proden => "proden",
            AlgorithmId::Cavl => "cavl",
            AlgorithmId::Pop => "pop",
            AlgorithmId::AbsMae => "abs_mae",
            AlgorithmId::AbsGce => "abs_gce",
            AlgorithmId::Exp => "exp",
            AlgorithmId::MclGce => "mcl_gce",
            AlgorithmId::MclMse => "mcl_mse",
            AlgorithmId::Cc => "cc",
            AlgorithmId::Lws => "lws",
            AlgorithmId::Pc => "pc",
            AlgorithmId::Forward => "forward",
            AlgorithmId::Nn => "nn",
            AlgorithmId::Ga => "ga",
            AlgorithmId::SclExp => "scl_exp",
            AlgorithmId::SclNl => "scl_nl",
            AlgorithmId::LW => "l_w",
            AlgorithmId::OpW => "op_w",
        }
    }

    /// Display label in the usual table style ("PRODEN", "ABS-MAE", ...).
    pub fn display_name(self) -> &'static str {
        match self {
            AlgorithmId::Proden => "PRODEN",
            AlgorithmId::Cavl => "CAVL",
            AlgorithmId::Pop => "POP",
            AlgorithmId::AbsMae => "ABS-MAE",
            AlgorithmId::AbsGce => "ABS-GCE",
            AlgorithmId::Exp => "EXP",
            AlgorithmId::MclGce => "MCL-GCE",
            AlgorithmId::MclMse => "MCL-MSE",
            AlgorithmId::Cc => "CC",
            AlgorithmId::Lws => "LWS",
            AlgorithmId::Pc => "PC",
            AlgorithmId::Forward => "Forward",
            AlgorithmId::Nn => "NN",
            AlgorithmId::Ga => "GA",
            AlgorithmId::SclExp => "SCL-EXP",
            AlgorithmId::SclNl => "SCL-NL",
            AlgorithmId::LW => "L-W",
            AlgorithmId::OpW => "OP-W",
        }
    }

    /// Complementary-label algorithms (fed `S̄` instead of `S`).
    pub fn is_complementary(self) -> bool {
        matches!(
            self,
            AlgorithmId::Pc
                | AlgorithmId::Forward
                | AlgorithmId::Nn
                | AlgorithmId::Ga
                | AlgorithmId::SclExp
                | AlgorithmId::SclNl
                | AlgorithmId::LW
                | AlgorithmId::OpW
        )
    }

    /// Algorithms whose state is refreshed after each optimizer step.
    pub fn has_state(self) -> bool {
        matches!(
            self,
            AlgorithmId::Proden | AlgorithmId::Cavl | AlgorithmId::Pop | AlgorithmId::Lws
        )
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmId {
    type Err = PllError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        AlgorithmId::ALL
            .into_iter()
            .find(|id| id.name() == norm || id.name().replace('_', "") == norm)
            .ok_or_else(|| PllError::Unknown {
                kind: "algorithm",
                value: s.into(),
            })
    }
}

/// An algorithm with validated hyperparameters.
///
/// Recognised keys: `rho` (ABS-GCE, MCL-GCE; in `(0, 1]`, default 0.7),
/// `leverage` (LWS; 1 or 2, default 2), and for POP `window` (default 5),
/// `warm_up` epochs (default 20), `threshold` (default 0.001) and `step`
/// (default 0.001).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct AlgorithmSpec {
    id: AlgorithmId,
    hparams: BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    id: AlgorithmId,
    #[serde(default)]
    hparams: BTreeMap<String, f64>,
}

impl From<AlgorithmSpec> for SpecRepr {
    fn from(s: AlgorithmSpec) -> Self {
        SpecRepr {
            id: s.id,
            hparams: s.hparams,
        }
    }
}

impl TryFrom<SpecRepr> for AlgorithmSpec {
    type Error = PllError;

    fn try_from(r: SpecRepr) -> Result<Self> {
        AlgorithmSpec::new(r.id, r.hparams)
    }
}

fn defaults(id: AlgorithmId) -> &'static [(&'static str, f64)] {
    match id {
        AlgorithmId::AbsGce | AlgorithmId::MclGce => &[("rho", 0.7)],
        AlgorithmId::Lws => &[("leverage", 2.0)],
        AlgorithmId::Pop => &[("window", 5.0), ("warm_up", 20.0), ("threshold", 0.001), ("step", 0.001)],
        _ => &[],
    }
}

impl AlgorithmSpec {
    /// Validates `hparams` for `id` and fills in defaults for missing keys.
    pub fn new(id: AlgorithmId, mut hparams: BTreeMap<String, f64>) -> Result<Self> {
        let allowed = defaults(id);
        let bad = |message: String| PllError::InvalidHyperparameter {
            algorithm: id.name(),
            message,
        };
        for key in hparams.keys() {
            if !allowed.iter().any(|(k, _)| k == key) {
                return Err(bad(format!("unknown hyperparameter `{key}`")));
            }
        }
        for (k, v) in allowed {
            hparams.entry((*k).to_string()).or_insert(*v);
        }
        for (k, v) in &hparams {
            let ok = match k.as_str() {
                "rho" => *v > 0.0 && *v <= 1.0,
                "leverage" => *v == 1.0 || *v == 2.0,
                "window" | "warm_up" => *v >= 1.0 && v.fract() == 0.0,
                "threshold" | "step" => *v >= 0.0 && v.is_finite(),
                _ => true,
            };
            if !ok {
                return Err(bad(format!("`{k}` = {v} out of range")));
            }
        }
        Ok(AlgorithmSpec { id, hparams })
    }

    pub fn with_defaults(id: AlgorithmId) -> Self {
        AlgorithmSpec::new(id, BTreeMap::new()).expect("defaults are valid")
    }

    pub fn id(&self) -> AlgorithmId {
        self.id
    }

    pub fn hparams(&self) -> &BTreeMap<String, f64> {
        &self.hparams
    }

    fn get(&self, key: &str) -> f64 {
        self.hparams[key]
    }
}

/// Model outputs for one minibatch together with its supervision.
#[derive(Clone, Copy, Debug)]
pub struct Batch<'a> {
    pub logits: &'a Matrix,
    /// Row-wise softmax of `logits`.
    pub probs: &'a Matrix,
    pub candidates: &'a [&'a CandidateSet],
    /// Positions of the batch rows in the training set (for state lookup).
    pub indices: &'a [usize],
}

impl Batch<'_> {
    fn check(&self) -> Result<()> {
        let (b, q) = self.logits.shape();
        if self.probs.shape() != (b, q) || self.candidates.len() != b || self.indices.len() != b {
            return Err(PllError::Shape(format!(
                "batch of {b} logits, {} probs rows, {} candidate sets, {} indices",
                self.probs.rows(),
                self.candidates.len(),
                self.indices.len()
            )));
        }
        if self.candidates.iter().any(|s| s.num_classes() != q) {
            return Err(PllError::Shape("candidate set class count differs from logits".into()));
        }
        Ok(())
    }
}

/// Batch-mean loss and its exact gradient with respect to the logits.
pub fn loss_and_grad(spec: &AlgorithmSpec, batch: &Batch<'_>, state: &AlgorithmState) -> Result<(f64, Matrix)> {
    batch.check()?;
    losses::loss_and_grad(spec, batch, state)
}

/// Refreshes per-example state from post-step outputs on the same batch.
pub fn update_state(spec: &AlgorithmSpec, batch: &Batch<'_>, state: &mut AlgorithmState) -> Result<()> {
    batch.check()?;
    state::update(spec, batch, state)
}

/// Called once after every full pass over the training set; drives POP's
/// candidate elimination. `epochs_completed` counts from 1.
pub fn end_epoch(spec: &AlgorithmSpec, state: &mut AlgorithmState, epochs_completed: usize) -> Result<()> {
    state::end_epoch(spec, state, epochs_completed)
}

/// Initial state for the training candidates: uniform confidences over each
/// candidate set for PRODEN, CAVL and POP (POP also starts with the full
/// candidate mask), uniform candidate weights for LWS, nothing otherwise.
pub fn make_initial_state(spec: &AlgorithmSpec, candidates: &[&CandidateSet]) -> AlgorithmState {
    state::initial(spec, candidates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip_through_names() {
        for id in AlgorithmId::ALL {
            assert_eq!(id.name().parse::<AlgorithmId>().unwrap(), id);
            assert_eq!(serde_json::to_value(id).unwrap(), serde_json::json!(id.name()));
        }
        assert_eq!("ABS-GCE".parse::<AlgorithmId>().unwrap(), AlgorithmId::AbsGce);
        assert_eq!("op-w".parse::<AlgorithmId>().unwrap(), AlgorithmId::OpW);
        assert!("idgp".parse::<AlgorithmId>().is_err());
    }

    #[test]
    fn hyperparameters_are_validated() {
        let spec = AlgorithmSpec::with_defaults(AlgorithmId::AbsGce);
        assert_eq!(spec.get("rho"), 0.7);
        let mut h = BTreeMap::new();
        h.insert("rho".to_string(), 1.5);
        assert!(AlgorithmSpec::new(AlgorithmId::AbsGce, h).is_err());
        let mut h = BTreeMap::new();
        h.insert("leverage".to_string(), 3.0);
        assert!(AlgorithmSpec::new(AlgorithmId::Lws, h).is_err());
        let mut h = BTreeMap::new();
        h.insert("rho".to_string(), 0.5);
        assert!(AlgorithmSpec::new(AlgorithmId::Cc, h).is_err());
    }

    #[test]
    fn spec_json_shape() {
        let spec = AlgorithmSpec::with_defaults(AlgorithmId::Lws);
        let v = serde_json::to_value(&spec).unwrap();
        assert_eq!(v, serde_json::json!({"id":"lws","hparams":{"leverage":2.0}}));
        let back: AlgorithmSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, spec);
    }
}
