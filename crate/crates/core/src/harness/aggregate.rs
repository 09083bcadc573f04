use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ExperimentRecord;
use crate::algorithms::AlgorithmId;
use crate::error::{PllError, Result};
use crate::selection::{select_config_with, CheckpointRule, Criterion, ReadAudit, RunHistory};

/// Mean and population standard deviation of the selected test accuracy
/// across splits for one (algorithm, criterion) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub algorithm: AlgorithmId,
    pub criterion: Criterion,
    pub mean: f64,
    pub std: f64,
    pub n_splits: usize,
    pub n_configs: usize,
    /// Selected test accuracy per split, in split order.
    pub per_split: Vec<f64>,
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregates the records of a single algorithm under `criterion`.
pub fn aggregate(records: &[ExperimentRecord], criterion: Criterion) -> Result<Aggregate> {
    aggregate_with(records, criterion, CheckpointRule::Best, None)
}

pub fn aggregate_with(
    records: &[ExperimentRecord],
    criterion: Criterion,
    rule: CheckpointRule,
    audit: Option<&ReadAudit>,
) -> Result<Aggregate> {
    let first = records.first().ok_or(PllError::Empty("records"))?;
    let algorithm = first.config.hparams.algorithm.id();
    if records.iter().any(|r| r.config.hparams.algorithm.id() != algorithm) {
        return Err(PllError::InvalidState("records mix algorithms; group them first".into()));
    }
    let mut by_split: BTreeMap<usize, Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        by_split.entry(r.split_index).or_default().push(r);
    }
    let mut per_split = Vec::new();
    let mut n_configs = 0;
    for runs in by_split.values_mut() {
        runs.sort_by_key(|r| r.config_index);
        n_configs = n_configs.max(runs.len());
        let hist: Vec<RunHistory<'_>> = runs
            .iter()
            .map(|r| RunHistory {
                history: &r.checkpoints,
                failed: r.failed,
            })
            .collect();
        per_split.push(select_config_with(criterion, &hist, rule, audit)?.test_accuracy);
    }
    let (mean, std) = mean_std(&per_split);
    Ok(Aggregate {
        algorithm,
        criterion,
        mean,
        std,
        n_splits: per_split.len(),
        n_configs,
        per_split,
    })
}

/// One aggregate per (algorithm, criterion) in registry and criterion order.
/// Oracle criteria are skipped when validation labels were unavailable.
pub fn aggregate_all(
    records: &[ExperimentRecord],
    criteria: &[Criterion],
    rule: CheckpointRule,
    audit: Option<&ReadAudit>,
) -> Result<Vec<Aggregate>> {
    let mut groups: BTreeMap<AlgorithmId, Vec<ExperimentRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.config.hparams.algorithm.id()).or_default().push(r.clone());
    }
    let mut out = Vec::new();
    for group in groups.values() {
        let labelled = group.iter().flat_map(|r| &r.checkpoints).all(|c| c.oa.is_some());
        for &c in criteria {
            if c.needs_labels() && !labelled {
                continue;
            }
            out.push(aggregate_with(group, c, rule, audit)?);
        }
    }
    if out.is_empty() {
        return Err(PllError::Empty("aggregates"));
    }
    Ok(out)
}
