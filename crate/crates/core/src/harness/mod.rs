//! Experiment orchestration: hyperparameter sampling, the training loop,
//! sweeps over splits and configurations, aggregation and reports.

mod aggregate;
mod hparams;
mod report;
mod sweep;
mod train;

pub use aggregate::{aggregate, aggregate_all, aggregate_with, mean_std, Aggregate};
pub use hparams::{sample_hparams, HyperParams};
pub use report::{emit_report, ReportFormat};
pub use sweep::{read_records, record_file_name, sweep, worker_count, write_records, SweepConfig, WORKERS_ENV};
pub use train::{default_iterations, run, run_on_splits, ExperimentRecord, RunConfig, ENGINE_VERSION, EVAL_PERIOD};
