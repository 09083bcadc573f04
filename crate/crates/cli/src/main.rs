use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use pllbench::algorithms::AlgorithmId;
use pllbench::datagen::{apply_generation, GaussianMixture, GenerationModel};
use pllbench::harness::{
    aggregate_all, default_iterations, emit_report, read_records, run, sweep, write_records, HyperParams, ReportFormat,
    RunConfig, SweepConfig,
};
use pllbench::selection::{CheckpointRule, Criterion};
use pllbench::theory::{run_suite, TheoryCheck};
use pllbench::{load_dataset_auto, save_dataset, DatasetFormat, SplitSpec};

#[derive(Parser)]
#[command(name = "pllbench", version, about = "Partial-label learning benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Gmm,
}

#[derive(Clone, Copy, ValueEnum)]
enum Gen {
    Uss,
    Fps,
}

#[derive(Subcommand)]
enum Command {
    /// Print size, dimension, class count, average candidates and noise rate.
    Stats { dataset: PathBuf },
    /// Generate a synthetic partial-label dataset.
    Synth {
        #[arg(long, value_enum, default_value = "gmm")]
        source: Source,
        #[arg(long = "gen", value_enum)]
        generation: Gen,
        /// Flip probability for FPS.
        #[arg(long, default_value_t = 0.3)]
        flip: f64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        q: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 1.5)]
        radius: f64,
        #[arg(long, default_value_t = 1.0)]
        variance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one configuration and print its record.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        alg: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        wd: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
        /// Write the record here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random hyperparameter search over several splits.
    Sweep {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        alg: String,
        #[arg(long, default_value_t = 20)]
        configs: usize,
        #[arg(long, default_value_t = 5)]
        splits: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate sweep records into a table.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// One of cr, aa, oa, oa-es; all available criteria when omitted.
        #[arg(long)]
        criterion: Option<String>,
        #[arg(long, default_value = "md")]
        format: String,
        /// Score every run at its final checkpoint.
        #[arg(long)]
        final_only: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo checks of the selection criteria; exits 1 on any failure.
    ValidateTheory {
        /// One of prop1, thm-cr, thm-aa; all when omitted.
        #[arg(long)]
        which: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Stats { dataset } => {
            let data = load_dataset_auto(&dataset).with_context(|| format!("loading {}", dataset.display()))?;
            let s = data.stats();
            println!("name            {}", data.name());
            println!("n               {}", s.n);
            println!("d               {}", s.d);
            println!("q               {}", s.q);
            println!("avg_candidates  {:.4}", s.avg_candidates);
            match s.noise_rate {
                Some(r) => println!("noise_rate      {:.4}", r),
                None => println!("noise_rate      n/a"),
            }
        }
        Command::Synth {
            source: Source::Gmm,
            generation,
            flip,
            n,
            q,
            d,
            radius,
            variance,
            seed,
            out,
        } => {
            if d < 2 {
                bail!("the mixture source needs d >= 2");
            }
            let mixture = GaussianMixture::on_circle(q, d, radius, variance, seed);
            mixture.validate()?;
            let model = match generation {
                Gen::Uss => GenerationModel::uss(seed.wrapping_add(1)),
                Gen::Fps => GenerationModel::fps(flip, seed.wrapping_add(1)),
            };
            let name = out.file_stem().and_then(|s| s.to_str()).unwrap_or("synthetic").to_string();
            let data = apply_generation(&mixture.to_dataset(n, &name)?, &model)?;
            save_dataset(&data, &out, DatasetFormat::from_path(&out))?;
            eprintln!("wrote {} examples to {}", data.len(), out.display());
        }
        Command::Run {
            dataset,
            alg,
            seed,
            lr,
            batch,
            wd,
            iters,
            out,
        } => {
            let data = load_dataset_auto(&dataset)?;
            let id: AlgorithmId = alg.parse()?;
            let mut h = HyperParams::defaults(id);
            h.lr = lr.unwrap_or(h.lr);
            h.batch_size = batch.unwrap_or(h.batch_size);
            h.weight_decay = wd.unwrap_or(h.weight_decay);
            let total = iters.unwrap_or_else(|| default_iterations(data.len()));
            let config = RunConfig::new(dataset.display().to_string(), SplitSpec::with_seed(seed), h, total, seed);
            let record = run(&config, &data)?;
            emit(&(serde_json::to_string_pretty(&record)? + "\n"), out.as_ref())?;
        }
        Command::Sweep {
            dataset,
            alg,
            configs,
            splits,
            seed,
            iters,
            workers,
            out,
        } => {
            let data = load_dataset_auto(&dataset)?;
            let mut config = SweepConfig::new(alg.parse()?, configs, splits, seed);
            config.total_iterations = iters;
            config.workers = workers;
            let records = sweep(&data, &config)?;
            let paths = write_records(&out, &records)?;
            let failed = records.iter().filter(|r| r.failed).count();
            eprintln!("{} runs written to {} ({failed} failed)", paths.len(), out.display());
        }
        Command::Report {
            input,
            criterion,
            format,
            final_only,
            out,
        } => {
            let records = read_records(&input)?;
            let criteria = match criterion {
                Some(c) => vec![c.parse::<Criterion>()?],
                None => Criterion::ALL.to_vec(),
            };
            let rule = if final_only { CheckpointRule::FinalOnly } else { CheckpointRule::Best };
            let aggregates = aggregate_all(&records, &criteria, rule, None)?;
            let text = emit_report(&aggregates, format.parse::<ReportFormat>()?)?;
            emit(&text, out.as_ref())?;
        }
        Command::ValidateTheory { which, n, seed } => {
            let which = which.map(|w| w.parse::<TheoryCheck>()).transpose()?;
            let report = run_suite(which, n, seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.pass {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
