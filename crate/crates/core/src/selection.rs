//! Model-selection criteria and the checkpoint / configuration protocol.
//!
//! Covering rate (CR) and approximated accuracy (AA) need only candidate
//! sets; oracle accuracy (OA) needs validation true labels and is allowed a
//! single query, the final checkpoint. `OaEs` lifts that restriction.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::candidate::CandidateSet;
use crate::error::{PllError, Result};
use crate::nn::{argmax, Matrix};

/// Fraction of examples whose prediction lies in its candidate set.
pub fn covering_rate(preds: &[usize], candidates: &[&CandidateSet]) -> Result<f64> {
    if preds.len() != candidates.len() {
        return Err(PllError::Shape(format!("{} predictions for {} candidate sets", preds.len(), candidates.len())));
    }
    if preds.is_empty() {
        return Err(PllError::Empty("predictions"));
    }
    let hits = preds.iter().zip(candidates).filter(|(p, s)| s.contains(**p)).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Candidate-renormalized probability of the predicted label, counted only
/// when the prediction is a candidate, averaged over examples.
pub fn approximated_accuracy(probs: &Matrix, candidates: &[&CandidateSet]) -> Result<f64> {
    if probs.rows() != candidates.len() {
        return Err(PllError::Shape(format!("{} prob rows for {} candidate sets", probs.rows(), candidates.len())));
    }
    if candidates.is_empty() {
        return Err(PllError::Empty("predictions"));
    }
    let mut total = 0.0;
    for (r, s) in candidates.iter().enumerate() {
        let p = probs.row(r);
        let mass: f64 = s.iter().map(|j| p[j]).sum();
        let pred = argmax(p);
        if mass >= 1e-12 && s.contains(pred) {
            total += p[pred] / mass;
        }
    }
    Ok(total / candidates.len() as f64)
}

pub fn oracle_accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(PllError::Shape(format!("{} predictions for {} labels", preds.len(), labels.len())));
    }
    if preds.is_empty() {
        return Err(PllError::Empty("predictions"));
    }
    let hits = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / preds.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Cr,
    Aa,
    Oa,
    #[serde(rename = "oa-es")]
    OaEs,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [Criterion::Cr, Criterion::Aa, Criterion::Oa, Criterion::OaEs];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Cr => "cr",
            Criterion::Aa => "aa",
            Criterion::Oa => "oa",
            Criterion::OaEs => "oa-es",
        }
    }

    /// Column heading in markdown reports.
    pub fn heading(self) -> &'static str {
        match self {
            Criterion::Cr => "w/ CR",
            Criterion::Aa => "w/ AA",
            Criterion::Oa => "w/ OA",
            Criterion::OaEs => "w/ OA & ES",
        }
    }

    pub fn needs_labels(self) -> bool {
        matches!(self, Criterion::Oa | Criterion::OaEs)
    }

    /// Value of this criterion at one checkpoint.
    pub fn value(self, record: &CheckpointRecord) -> Result<f64> {
        match self {
            Criterion::Cr => Ok(record.cr),
            Criterion::Aa => Ok(record.aa),
            Criterion::Oa | Criterion::OaEs => record.oa.ok_or(PllError::LabelsRequired("oracle accuracy")),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = PllError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "cr" => Ok(Criterion::Cr),
            "aa" => Ok(Criterion::Aa),
            "oa" => Ok(Criterion::Oa),
            "oa-es" | "oaes" => Ok(Criterion::OaEs),
            _ => Err(PllError::Unknown {
                kind: "criterion",
                value: s.into(),
            }),
        }
    }
}

/// Validation and test metrics at one evaluation step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    #[serde(rename = "iter")]
    pub iteration: usize,
    pub cr: f64,
    pub aa: f64,
    pub oa: Option<f64>,
    #[serde(rename = "test_acc")]
    pub test_accuracy: f64,
}

/// Counts how often oracle accuracy is read during selection, and how many
/// of those reads touched a non-final checkpoint.
#[derive(Debug, Default)]
pub struct ReadAudit {
    oa_reads: AtomicU64,
    non_final_oa_reads: AtomicU64,
}

impl ReadAudit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn oa_reads(&self) -> u64 {
        self.oa_reads.load(Ordering::SeqCst)
    }

    pub fn non_final_oa_reads(&self) -> u64 {
        self.non_final_oa_reads.load(Ordering::SeqCst)
    }

    fn record(&self, is_final: bool) {
        self.oa_reads.fetch_add(1, Ordering::SeqCst);
        if !is_final {
            self.non_final_oa_reads.fetch_add(1, Ordering::SeqCst);
        }
    }
}

/// How checkpoints are chosen within one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointRule {
    /// Best checkpoint for CR, AA and OA-ES; final checkpoint for OA.
    #[default]
    Best,
    /// Final checkpoint for every criterion.
    FinalOnly,
}

/// Picks the checkpoint used to score a run: the final one for OA (or under
/// [`CheckpointRule::FinalOnly`]), otherwise the earliest maximizer.
pub fn select_checkpoint(criterion: Criterion, history: &[CheckpointRecord]) -> Result<(usize, f64)> {
    select_checkpoint_with(criterion, history, CheckpointRule::Best, None)
}

pub fn select_checkpoint_with(
    criterion: Criterion,
    history: &[CheckpointRecord],
    rule: CheckpointRule,
    audit: Option<&ReadAudit>,
) -> Result<(usize, f64)> {
    if history.is_empty() {
        return Err(PllError::Empty("checkpoint history"));
    }
    let last = history.len() - 1;
    let read = |i: usize| {
        if criterion.needs_labels() {
            if let Some(a) = audit {
                a.record(i == last);
            }
        }
        criterion.value(&history[i])
    };
    if criterion == Criterion::Oa || rule == CheckpointRule::FinalOnly {
        return Ok((last, read(last)?));
    }
    let mut best = (0, read(0)?);
    for i in 1..history.len() {
        let v = read(i)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    Ok(best)
}

/// One run's history as seen by configuration selection; a failed run is
/// never chosen.
#[derive(Clone, Copy, Debug)]
pub struct RunHistory<'a> {
    pub history: &'a [CheckpointRecord],
    pub failed: bool,
}

/// Outcome of choosing among configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub config_index: usize,
    pub checkpoint_index: usize,
    pub criterion_value: f64,
    pub test_accuracy: f64,
}

/// Applies checkpoint selection to every run and keeps the run with the
/// highest criterion value (lowest index on ties). Failed runs score -inf.
pub fn select_config(criterion: Criterion, runs: &[RunHistory<'_>]) -> Result<Selection> {
    select_config_with(criterion, runs, CheckpointRule::Best, None)
}

pub fn select_config_with(
    criterion: Criterion,
    runs: &[RunHistory<'_>],
    rule: CheckpointRule,
    audit: Option<&ReadAudit>,
) -> Result<Selection> {
    let mut best: Option<Selection> = None;
    for (k, run) in runs.iter().enumerate() {
        if run.failed || run.history.is_empty() {
            continue;
        }
        let (ci, v) = select_checkpoint_with(criterion, run.history, rule, audit)?;
        if best.as_ref().is_none_or(|b| v > b.criterion_value) {
            best = Some(Selection {
                config_index: k,
                checkpoint_index: ci,
                criterion_value: v,
                test_accuracy: run.history[ci].test_accuracy,
            });
        }
    }
    best.ok_or(PllError::NoSuccessfulRuns(runs.len()))
}
