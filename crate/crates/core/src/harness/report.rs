use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use super::Aggregate;
use crate::algorithms::AlgorithmId;
use crate::error::{PllError, Result};
use crate::selection::Criterion;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = PllError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            _ => Err(PllError::Unknown {
                kind: "report format",
                value: s.into(),
            }),
        }
    }
}

#[derive(Serialize)]
struct JsonRow<'a> {
    algorithm: &'a str,
    criterion: &'a str,
    mean: f64,
    std: f64,
    n_splits: usize,
    n_configs: usize,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    std_kind: &'static str,
    rows: Vec<JsonRow<'a>>,
}

/// Renders aggregates. CSV and JSON keep full precision with columns
/// `algorithm, criterion, mean, std, n_splits, n_configs`; markdown is one
/// row per algorithm and one column per criterion, in percent with two
/// decimals.
pub fn emit_report(aggregates: &[Aggregate], format: ReportFormat) -> Result<String> {
    if aggregates.is_empty() {
        return Err(PllError::Empty("aggregates"));
    }
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["algorithm", "criterion", "mean", "std", "n_splits", "n_configs"])?;
            for a in aggregates {
                w.write_record([
                    a.algorithm.name().to_string(),
                    a.criterion.name().to_string(),
                    a.mean.to_string(),
                    a.std.to_string(),
                    a.n_splits.to_string(),
                    a.n_configs.to_string(),
                ])?;
            }
            let bytes = w.into_inner().map_err(|e| PllError::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Json => {
            let report = JsonReport {
                std_kind: "population",
                rows: aggregates
                    .iter()
                    .map(|a| JsonRow {
                        algorithm: a.algorithm.name(),
                        criterion: a.criterion.name(),
                        mean: a.mean,
                        std: a.std,
                        n_splits: a.n_splits,
                        n_configs: a.n_configs,
                    })
                    .collect(),
            };
            Ok(serde_json::to_string_pretty(&report)? + "\n")
        }
        ReportFormat::Markdown => Ok(markdown(aggregates)),
    }
}

fn markdown(aggregates: &[Aggregate]) -> String {
    let mut criteria: Vec<Criterion> = aggregates.iter().map(|a| a.criterion).collect();
    criteria.sort();
    criteria.dedup();
    let mut algorithms: Vec<AlgorithmId> = aggregates.iter().map(|a| a.algorithm).collect();
    algorithms.sort();
    algorithms.dedup();
    let splits = aggregates.iter().map(|a| a.n_splits).max().unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Test accuracy (%), mean ± population standard deviation over {splits} split(s).\n"
    );
    out.push_str("| Algorithm |");
    for c in &criteria {
        let _ = write!(out, " {} |", c.heading());
    }
    out.push_str("\n|---|");
    for _ in &criteria {
        out.push_str("---|");
    }
    out.push('\n');
    for alg in algorithms {
        let _ = write!(out, "| {} |", alg.display_name());
        for c in &criteria {
            match aggregates.iter().find(|a| a.algorithm == alg && a.criterion == *c) {
                Some(a) => {
                    let _ = write!(out, " {:.2}±{:.2} |", 100.0 * a.mean, 100.0 * a.std);
                }
                None => out.push_str(" - |"),
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agg(alg: AlgorithmId, c: Criterion, mean: f64, std: f64) -> Aggregate {
        Aggregate {
            algorithm: alg,
            criterion: c,
            mean,
            std,
            n_splits: 2,
            n_configs: 3,
            per_split: vec![mean - std, mean + std],
        }
    }

    #[test]
    fn csv_has_header_and_one_line_per_row() {
        let text = emit_report(&[agg(AlgorithmId::Cc, Criterion::Cr, 0.75, 0.05)], ReportFormat::Csv).unwrap();
        assert_eq!(text, "algorithm,criterion,mean,std,n_splits,n_configs\ncc,cr,0.75,0.05,2,3\n");
    }

    #[test]
    fn markdown_pivots_by_criterion() {
        let rows = [
            agg(AlgorithmId::Proden, Criterion::Cr, 0.71333, 0.0245),
            agg(AlgorithmId::Proden, Criterion::OaEs, 0.7, 0.01),
            agg(AlgorithmId::Cc, Criterion::Cr, 0.72, 0.02),
        ];
        let md = emit_report(&rows, ReportFormat::Markdown).unwrap();
        assert!(md.contains("| Algorithm | w/ CR | w/ OA & ES |"));
        assert!(md.contains("| PRODEN | 71.33±2.45 | 70.00±1.00 |"));
        assert!(md.contains("| CC | 72.00±2.00 | - |"));
        assert!(md.contains("population standard deviation"));
    }

    #[test]
    fn json_names_the_std_kind() {
        let text = emit_report(&[agg(AlgorithmId::Cc, Criterion::OaEs, 0.5, 0.0)], ReportFormat::Json).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["std_kind"], "population");
        assert_eq!(v["rows"][0]["criterion"], "oa-es");
    }
}
