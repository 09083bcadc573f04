use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{default_iterations, run_on_splits, sample_hparams, ExperimentRecord, RunConfig, EVAL_PERIOD};
use crate::algorithms::AlgorithmId;
use crate::dataset::PartialDataset;
use crate::error::{PllError, Result};
use crate::rng;
use crate::split::{split, SplitSpec};

/// Environment variable bounding the number of concurrent runs.
pub const WORKERS_ENV: &str = "PLLBENCH_WORKERS";

/// Parameters of a random-search sweep for one algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub algorithm: AlgorithmId,
    pub n_configs: usize,
    pub n_splits: usize,
    pub base_seed: u64,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    /// Overrides the size-based iteration budget.
    pub total_iterations: Option<usize>,
    pub eval_period: usize,
    /// Worker threads; `None` reads the environment, then falls back to the
    /// available parallelism.
    pub workers: Option<usize>,
}

impl SweepConfig {
    pub fn new(algorithm: AlgorithmId, n_configs: usize, n_splits: usize, base_seed: u64) -> Self {
        SweepConfig {
            algorithm,
            n_configs,
            n_splits,
            base_seed,
            train_fraction: 0.7,
            val_fraction: 0.1,
            test_fraction: 0.2,
            total_iterations: None,
            eval_period: EVAL_PERIOD,
            workers: None,
        }
    }

    /// Split specification used for split `s`.
    pub fn split_spec(&self, s: usize) -> Result<SplitSpec> {
        SplitSpec::new(
            self.train_fraction,
            self.val_fraction,
            self.test_fraction,
            rng::derive_seed(self.base_seed, &[s as u64]),
        )
    }

    /// The run configurations of split `s`, drawn afresh for every
    /// (algorithm, split) pair.
    pub fn run_configs(&self, dataset: &PartialDataset, s: usize) -> Result<Vec<RunConfig>> {
        let spec = self.split_spec(s)?;
        let alg = self.algorithm as u64;
        let mut draws = rng::stream(rng::derive_seed(self.base_seed, &[s as u64, 1, alg]), 0);
        let iters = self.total_iterations.unwrap_or_else(|| default_iterations(dataset.len()));
        Ok((0..self.n_configs)
            .map(|k| {
                let mut c = RunConfig::new(
                    dataset.name(),
                    spec.clone(),
                    sample_hparams(self.algorithm, &mut draws),
                    iters,
                    rng::derive_seed(self.base_seed, &[s as u64, 2, alg, k as u64]),
                );
                c.eval_period = self.eval_period;
                c
            })
            .collect())
    }
}

pub fn worker_count(requested: Option<usize>) -> usize {
    requested
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every (split, config) pair on a bounded worker pool. Records come
/// back sorted by (split, config) whatever the completion order.
pub fn sweep(dataset: &PartialDataset, config: &SweepConfig) -> Result<Vec<ExperimentRecord>> {
    if config.n_configs == 0 || config.n_splits == 0 {
        return Err(PllError::Empty("sweep grid"));
    }
    let fingerprint = dataset.fingerprint();
    let mut jobs = Vec::new();
    let mut splits = Vec::new();
    for s in 0..config.n_splits {
        splits.push(split(dataset, &config.split_spec(s)?)?);
        for (k, rc) in config.run_configs(dataset, s)?.into_iter().enumerate() {
            jobs.push((s, k, rc));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(config.workers))
        .build()
        .map_err(|e| PllError::InvalidState(format!("worker pool: {e}")))?;
    let mut records = pool.install(|| {
        jobs.par_iter()
            .map(|(s, k, rc)| {
                let mut r = run_on_splits(rc, &splits[*s], &fingerprint)?;
                r.split_index = *s;
                r.config_index = *k;
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    records.sort_by_key(|r| (r.split_index, r.config_index));
    Ok(records)
}

pub fn record_file_name(record: &ExperimentRecord) -> String {
    format!(
        "{}_split{:02}_config{:03}.json",
        record.config.hparams.algorithm.id().name(),
        record.split_index,
        record.config_index
    )
}

/// Writes one JSON file per record into `dir` (created if needed).
pub fn write_records(dir: impl AsRef<Path>, records: &[ExperimentRecord]) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    records
        .iter()
        .map(|r| {
            let path = dir.join(record_file_name(r));
            fs::write(&path, serde_json::to_string_pretty(r)? + "\n")?;
            Ok(path)
        })
        .collect()
}

/// Reads every `*.json` record in `dir`, sorted by (algorithm, split, config).
pub fn read_records(dir: impl AsRef<Path>) -> Result<Vec<ExperimentRecord>> {
    let mut records = Vec::new();
    for entry in fs::read_dir(dir.as_ref())? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let text = fs::read_to_string(&path)?;
            records.push(serde_json::from_str::<ExperimentRecord>(&text)?);
        }
    }
    records.sort_by_key(|r| (r.config.hparams.algorithm.id(), r.split_index, r.config_index));
    Ok(records)
}
