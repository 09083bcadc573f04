//! Partial-label datasets: examples, validation, file formats and summary statistics.
//!
//! JSONL files start with a header object
//! `{"q":int,"d":int,"name":string,"label_base":0|1}` (plus an optional
//! `"meta"` object), followed by one example per line
//! `{"x":[float...],"s":[int...],"y":int|null}`.
//!
//! CSV files carry a header row `f0,...,f{d-1},candidates,y`; candidates are
//! `|`-separated 0-based indices and an empty `y` means no true label.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::candidate::CandidateSet;
use crate::error::{PllError, Result};

/// One partial-label example.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub candidates: CandidateSet,
    /// Hidden ground truth. May lie outside `candidates` on noisy data.
    pub true_label: Option<usize>,
}

/// A validated partial-label dataset. Immutable once constructed.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialDataset {
    name: String,
    q: usize,
    d: usize,
    examples: Vec<Example>,
    metadata: BTreeMap<String, serde_json::Value>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

impl DatasetFormat {
    /// Picks the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Jsonl,
        }
    }
}

/// Summary statistics in the layout of the usual PLL dataset tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n: usize,
    pub d: usize,
    pub q: usize,
    pub avg_candidates: f64,
    /// Fraction of labelled examples whose true label is not a candidate.
    /// `None` when no example carries a true label.
    pub noise_rate: Option<f64>,
}

impl PartialDataset {
    pub fn new(
        name: impl Into<String>,
        q: usize,
        d: usize,
        examples: Vec<Example>,
        metadata: BTreeMap<String, serde_json::Value>,
    ) -> Result<Self> {
        if q < 2 {
            return Err(PllError::InvalidDataset(format!("need at least 2 classes, got {q}")));
        }
        for (index, ex) in examples.iter().enumerate() {
            if ex.features.len() != d {
                return Err(PllError::DimensionMismatch {
                    index,
                    expected: d,
                    found: ex.features.len(),
                });
            }
            if ex.features.iter().any(|v| !v.is_finite()) {
                return Err(PllError::InvalidDataset(format!("example {index}: non-finite feature")));
            }
            if ex.candidates.num_classes() != q {
                return Err(PllError::InvalidDataset(format!(
                    "example {index}: candidate set ranges over {} classes, dataset has {q}",
                    ex.candidates.num_classes()
                )));
            }
            if ex.candidates.is_empty() {
                return Err(PllError::EmptyCandidateSet { index });
            }
            if let Some(label) = ex.true_label {
                if label >= q {
                    return Err(PllError::LabelOutOfRange { index, label, q });
                }
            }
        }
        Ok(PartialDataset {
            name: name.into(),
            q,
            d,
            examples,
            metadata,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_classes(&self) -> usize {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn metadata(&self) -> &BTreeMap<String, serde_json::Value> {
        &self.metadata
    }

    /// True iff every example carries a true label.
    pub fn has_true_labels(&self) -> bool {
        !self.examples.is_empty() && self.examples.iter().all(|e| e.true_label.is_some())
    }

    pub fn true_labels(&self) -> Option<Vec<usize>> {
        self.examples.iter().map(|e| e.true_label).collect()
    }

    pub fn candidates(&self) -> Vec<&CandidateSet> {
        self.examples.iter().map(|e| &e.candidates).collect()
    }

    /// Row-major `n × d` copy of the features.
    pub fn feature_rows(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * self.d);
        for ex in &self.examples {
            out.extend_from_slice(&ex.features);
        }
        out
    }

    /// A new dataset holding the examples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> PartialDataset {
        PartialDataset {
            name: name.into(),
            q: self.q,
            d: self.d,
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            metadata: self.metadata.clone(),
        }
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: serde_json::Value) -> Self {
        self.metadata.insert(key.into(), value);
        self
    }

    pub(crate) fn with_examples(&self, examples: Vec<Example>) -> PartialDataset {
        PartialDataset {
            name: self.name.clone(),
            q: self.q,
            d: self.d,
            examples,
            metadata: self.metadata.clone(),
        }
    }

    pub fn stats(&self) -> DatasetStats {
        dataset_stats(self)
    }

    /// SHA-256 of the canonical JSONL encoding, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        write_jsonl(self, &mut buf).expect("writing to memory cannot fail");
        hex::encode(Sha256::digest(&buf))
    }
}

pub fn dataset_stats(dataset: &PartialDataset) -> DatasetStats {
    let n = dataset.len();
    let total: usize = dataset.examples.iter().map(|e| e.candidates.len()).sum();
    let mut labelled = 0usize;
    let mut noisy = 0usize;
    for ex in &dataset.examples {
        if let Some(y) = ex.true_label {
            labelled += 1;
            if !ex.candidates.contains(y) {
                noisy += 1;
            }
        }
    }
    DatasetStats {
        n,
        d: dataset.d,
        q: dataset.q,
        avg_candidates: if n == 0 { 0.0 } else { total as f64 / n as f64 },
        noise_rate: (labelled > 0).then(|| noisy as f64 / labelled as f64),
    }
}

#[derive(Serialize, Deserialize)]
struct JsonlHeader {
    q: usize,
    d: usize,
    name: String,
    #[serde(default)]
    label_base: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct JsonlExample {
    x: Vec<f64>,
    s: Vec<usize>,
    y: Option<usize>,
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<PartialDataset> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    match format {
        DatasetFormat::Jsonl => read_jsonl(reader, path),
        DatasetFormat::Csv => read_csv(reader, path),
    }
}

pub fn save_dataset(
    dataset: &PartialDataset,
    path: impl AsRef<Path>,
    format: DatasetFormat,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    match format {
        DatasetFormat::Jsonl => write_jsonl(dataset, &mut w)?,
        DatasetFormat::Csv => write_csv(dataset, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> PllError {
    PllError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn rebase(label: usize, base: usize, path: &Path, line: usize) -> Result<usize> {
    label
        .checked_sub(base)
        .ok_or_else(|| parse_err(path, line, format!("label {label} below label_base {base}")))
}

pub(crate) fn read_jsonl<R: BufRead>(reader: R, path: &Path) -> Result<PartialDataset> {
    let mut lines = reader.lines().enumerate();
    let header: JsonlHeader = loop {
        match lines.next() {
            None => return Err(parse_err(path, 1, "missing header line")),
            Some((i, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line).map_err(|e| parse_err(path, i + 1, e.to_string()))?;
            }
        }
    };
    if header.label_base > 1 {
        return Err(parse_err(path, 1, "label_base must be 0 or 1"));
    }
    let (q, d, base) = (header.q, header.d, header.label_base);
    let mut examples = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: JsonlExample =
            serde_json::from_str(&line).map_err(|e| parse_err(path, lineno, e.to_string()))?;
        let index = examples.len();
        if raw.x.len() != d {
            return Err(PllError::DimensionMismatch {
                index,
                expected: d,
                found: raw.x.len(),
            });
        }
        if raw.s.is_empty() {
            return Err(PllError::EmptyCandidateSet { index });
        }
        let mut labels = Vec::with_capacity(raw.s.len());
        for &s in &raw.s {
            let label = rebase(s, base, path, lineno)?;
            if label >= q {
                return Err(PllError::LabelOutOfRange { index, label, q });
            }
            labels.push(label);
        }
        let true_label = raw.y.map(|y| rebase(y, base, path, lineno)).transpose()?;
        examples.push(Example {
            features: raw.x,
            candidates: CandidateSet::from_indices(q, labels).expect("range checked above"),
            true_label,
        });
    }
    PartialDataset::new(header.name, q, d, examples, header.meta)
}

pub(crate) fn write_jsonl<W: Write>(dataset: &PartialDataset, w: &mut W) -> Result<()> {
    let header = JsonlHeader {
        q: dataset.q,
        d: dataset.d,
        name: dataset.name.clone(),
        label_base: 0,
        meta: dataset.metadata.clone(),
    };
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")?;
    for ex in &dataset.examples {
        let line = JsonlExample {
            x: ex.features.clone(),
            s: ex.candidates.to_vec(),
            y: ex.true_label,
        };
        serde_json::to_writer(&mut *w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn read_csv<R: BufRead>(reader: R, path: &Path) -> Result<PartialDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = headers.len();
    if cols < 2 || &headers[cols - 2] != "candidates" || &headers[cols - 1] != "y" {
        return Err(parse_err(path, 1, "header must be f0..f{d-1},candidates,y"));
    }
    let d = cols - 2;
    for (k, h) in headers.iter().take(d).enumerate() {
        if h != format!("f{k}") {
            return Err(parse_err(path, 1, format!("expected column f{k}, found `{h}`")));
        }
    }
    let mut rows: Vec<(Vec<f64>, Vec<usize>, Option<usize>)> = Vec::new();
    let mut max_label = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let lineno = i + 2;
        let rec = rec?;
        if rec.len() != cols {
            return Err(PllError::DimensionMismatch {
                index: i,
                expected: d,
                found: rec.len().saturating_sub(2),
            });
        }
        let mut x = Vec::with_capacity(d);
        for field in rec.iter().take(d) {
            x.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(path, lineno, format!("feature `{field}`: {e}")))?,
            );
        }
        let cand_field = rec[d].trim();
        let mut s = Vec::new();
        if !cand_field.is_empty() {
            for tok in cand_field.split('|') {
                let label = tok
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| parse_err(path, lineno, format!("candidate `{tok}`: {e}")))?;
                max_label = max_label.max(label);
                s.push(label);
            }
        }
        if s.is_empty() {
            return Err(PllError::EmptyCandidateSet { index: i });
        }
        let y_field = rec[d + 1].trim();
        let y = if y_field.is_empty() || y_field == "null" {
            None
        } else {
            let y = y_field
                .parse::<usize>()
                .map_err(|e| parse_err(path, lineno, format!("label `{y_field}`: {e}")))?;
            max_label = max_label.max(y);
            Some(y)
        };
        rows.push((x, s, y));
    }
    let q = (max_label + 1).max(2);
    let examples = rows
        .into_iter()
        .map(|(features, s, true_label)| Example {
            features,
            candidates: CandidateSet::from_indices(q, s).expect("q covers every label"),
            true_label,
        })
        .collect();
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    PartialDataset::new(name, q, d, examples, BTreeMap::new())
}

fn write_csv<W: Write>(dataset: &PartialDataset, w: &mut W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (0..dataset.d).map(|k| format!("f{k}")).collect();
    header.push("candidates".into());
    header.push("y".into());
    wtr.write_record(&header)?;
    for ex in &dataset.examples {
        let mut row: Vec<String> = ex.features.iter().map(|v| v.to_string()).collect();
        row.push(
            ex.candidates
                .iter()
                .map(|j| j.to_string())
                .collect::<Vec<_>>()
                .join("|"),
        );
        row.push(ex.true_label.map(|y| y.to_string()).unwrap_or_default());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Loads a dataset, choosing the format from the file extension.
pub fn load_dataset_auto(path: impl AsRef<Path>) -> Result<PartialDataset> {
    let path: PathBuf = path.as_ref().to_path_buf();
    load_dataset(&path, DatasetFormat::from_path(&path))
}
