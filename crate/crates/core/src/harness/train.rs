use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::HyperParams;
use crate::algorithms::{self, AlgorithmState, Batch};
use crate::candidate::CandidateSet;
use crate::dataset::PartialDataset;
use crate::error::{PllError, Result};
use crate::nn::{self, argmax, softmax_rows, AdamConfig, AdamState, Matrix, MlpParams};
use crate::rng;
use crate::selection::{approximated_accuracy, covering_rate, oracle_accuracy, CheckpointRecord};
use crate::split::{split, SplitSpec, Splits};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Evaluation period in optimizer steps.
pub const EVAL_PERIOD: usize = 1000;

/// Iteration budget by dataset size: 10 000 up to 5 000 examples, 20 000
/// above.
pub fn default_iterations(n_examples: usize) -> usize {
    if n_examples <= 5000 {
        10_000
    } else {
        20_000
    }
}

/// Everything that determines one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Dataset name or path, for provenance only.
    pub dataset: String,
    pub split: SplitSpec,
    #[serde(flatten)]
    pub hparams: HyperParams,
    pub total_iterations: usize,
    pub eval_period: usize,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(dataset: impl Into<String>, split: SplitSpec, hparams: HyperParams, total_iterations: usize, seed: u64) -> Self {
        RunConfig {
            dataset: dataset.into(),
            split,
            hparams,
            total_iterations,
            eval_period: EVAL_PERIOD,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let h = &self.hparams;
        if !(h.lr > 0.0 && h.lr.is_finite()) || h.batch_size == 0 || !(h.weight_decay >= 0.0) {
            return Err(PllError::InvalidHyperparameter {
                algorithm: h.algorithm.id().name(),
                message: format!("lr {} batch {} weight decay {}", h.lr, h.batch_size, h.weight_decay),
            });
        }
        if self.eval_period == 0 || self.total_iterations == 0 {
            return Err(PllError::InvalidHyperparameter {
                algorithm: h.algorithm.id().name(),
                message: "iteration budget and evaluation period must be positive".into(),
            });
        }
        self.split.validate()
    }
}

/// Outcome and provenance of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub config: RunConfig,
    pub split_index: usize,
    pub config_index: usize,
    pub checkpoints: Vec<CheckpointRecord>,
    /// Set when training produced a non-finite loss or parameters; the
    /// checkpoints taken before that point are kept.
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub wall_clock_seconds: f64,
    pub engine_version: String,
    pub dataset_fingerprint: String,
}

impl ExperimentRecord {
    /// Pretty JSON with the wall-clock time zeroed, so that two runs of the
    /// same configuration serialize identically.
    pub fn to_canonical_json(&self) -> String {
        let mut r = self.clone();
        r.wall_clock_seconds = 0.0;
        serde_json::to_string_pretty(&r).expect("records serialize")
    }
}

/// Splits `dataset` per `config.split` and trains on the result.
pub fn run(config: &RunConfig, dataset: &PartialDataset) -> Result<ExperimentRecord> {
    let splits = split(dataset, &config.split)?;
    run_on_splits(config, &splits, &dataset.fingerprint())
}

struct EvalSet {
    features: Matrix,
    candidates: Vec<CandidateSet>,
    labels: Option<Vec<usize>>,
}

impl EvalSet {
    fn new(data: &PartialDataset) -> Result<Self> {
        Ok(EvalSet {
            features: Matrix::from_vec(data.len(), data.dim(), data.feature_rows())?,
            candidates: data.candidates().into_iter().cloned().collect(),
            labels: data.true_labels(),
        })
    }
}

/// Trains on `splits.train`, evaluating on `splits.val` and `splits.test`
/// every `eval_period` steps. The test subset must carry true labels.
pub fn run_on_splits(config: &RunConfig, splits: &Splits, fingerprint: &str) -> Result<ExperimentRecord> {
    config.validate()?;
    let start = Instant::now();
    let train = &splits.train;
    let (n, d, q) = (train.len(), train.dim(), train.num_classes());
    if n == 0 {
        return Err(PllError::Empty("training set"));
    }
    let test = EvalSet::new(&splits.test)?;
    if test.labels.is_none() {
        return Err(PllError::LabelsRequired("test accuracy"));
    }
    let val = EvalSet::new(&splits.val)?;
    let x = Matrix::from_vec(n, d, train.feature_rows())?;
    let cands = train.candidates();
    let spec = &config.hparams.algorithm;

    let mut params = nn::init_params(d, q, rng::derive_seed(config.seed, &[0]));
    let mut adam = AdamState::new(AdamConfig::new(config.hparams.lr, config.hparams.weight_decay), params.len());
    let mut state = algorithms::make_initial_state(spec, &cands);
    let mut shuffle = rng::stream(rng::derive_seed(config.seed, &[1]), 0);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut shuffle);
    let mut pos = 0;
    let mut epochs = 0;

    let mut checkpoints = Vec::new();
    let mut failure = None;
    for it in 1..=config.total_iterations {
        let end = (pos + config.hparams.batch_size).min(n);
        let idx = &order[pos..end];
        if let Err(e) = step(spec, &mut params, &mut adam, &mut state, &x, &cands, idx) {
            match e {
                PllError::NonFinite(what) => {
                    failure = Some(format!("non-finite {what} at iteration {it}"));
                    break;
                }
                other => return Err(other),
            }
        }
        pos = end;
        if pos >= n {
            epochs += 1;
            algorithms::end_epoch(spec, &mut state, epochs)?;
            order.shuffle(&mut shuffle);
            pos = 0;
        }
        if it % config.eval_period == 0 {
            checkpoints.push(evaluate(&params, it, &val, &test)?);
        }
    }

    Ok(ExperimentRecord {
        config: config.clone(),
        split_index: 0,
        config_index: 0,
        checkpoints,
        failed: failure.is_some(),
        failure,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        engine_version: ENGINE_VERSION.to_string(),
        dataset_fingerprint: fingerprint.to_string(),
    })
}

fn step(
    spec: &algorithms::AlgorithmSpec,
    params: &mut MlpParams,
    adam: &mut AdamState,
    state: &mut AlgorithmState,
    x: &Matrix,
    cands: &[&CandidateSet],
    idx: &[usize],
) -> Result<()> {
    let xb = x.gather_rows(idx);
    let cb: Vec<&CandidateSet> = idx.iter().map(|&i| cands[i]).collect();
    let (logits, cache) = nn::forward(params, &xb)?;
    let probs = softmax_rows(&logits);
    let batch = Batch {
        logits: &logits,
        probs: &probs,
        candidates: &cb,
        indices: idx,
    };
    let (loss, d_logits) = algorithms::loss_and_grad(spec, &batch, state)?;
    if !loss.is_finite() || !d_logits.is_finite() {
        return Err(PllError::NonFinite("loss"));
    }
    let grads = nn::backward(params, &cache, &d_logits)?;
    adam.step(params, &grads)?;
    if !params.is_finite() {
        return Err(PllError::NonFinite("parameters"));
    }
    if spec.id().has_state() {
        let (logits, _) = nn::forward(params, &xb)?;
        let probs = softmax_rows(&logits);
        let batch = Batch {
            logits: &logits,
            probs: &probs,
            candidates: &cb,
            indices: idx,
        };
        algorithms::update_state(spec, &batch, state)?;
    }
    Ok(())
}

fn predict(params: &MlpParams, x: &Matrix) -> Result<(Matrix, Vec<usize>)> {
    let (logits, _) = nn::forward(params, x)?;
    let probs = softmax_rows(&logits);
    let preds = (0..probs.rows()).map(|r| argmax(probs.row(r))).collect();
    Ok((probs, preds))
}

fn evaluate(params: &MlpParams, iteration: usize, val: &EvalSet, test: &EvalSet) -> Result<CheckpointRecord> {
    let (probs, preds) = predict(params, &val.features)?;
    let vc: Vec<&CandidateSet> = val.candidates.iter().collect();
    let cr = covering_rate(&preds, &vc)?;
    let aa = approximated_accuracy(&probs, &vc)?;
    let oa = val.labels.as_ref().map(|y| oracle_accuracy(&preds, y)).transpose()?;
    let (_, test_preds) = predict(params, &test.features)?;
    let test_accuracy = oracle_accuracy(&test_preds, test.labels.as_ref().expect("checked by caller"))?;
    Ok(CheckpointRecord {
        iteration,
        cr,
        aa,
        oa,
        test_accuracy,
    })
}
