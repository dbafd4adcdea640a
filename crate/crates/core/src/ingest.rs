//! Parsing and validation of prediction dumps.
//!
//! Two interchangeable encodings share one schema:
//!
//! * JSONL, one object per line with `question_id`, `predicted_label`,
//!   `oracle_label` and exactly one of `confidence` (number) or
//!   `probabilities` (array of numbers).
//! * CSV with the header `question_id,predicted_label,oracle_label,confidence`
//!   and RFC-4180 quoting.
//!
//! Every diagnostic names the 1-based line of the offending row.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Allowed deviation of a probability vector's sum from 1.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-6;

const CSV_HEADER: [&str; 4] = [
    "question_id",
    "predicted_label",
    "oracle_label",
    "confidence",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbabilityError {
    #[error("probability vector is empty")]
    Empty,
    #[error("probability at index {index} is not a finite number")]
    NotFinite { index: usize },
    #[error("probability at index {index} is negative ({value})")]
    Negative { index: usize, value: f64 },
    #[error("probability at index {index} exceeds 1 ({value})")]
    AboveOne { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, expected 1 within {PROBABILITY_SUM_TOLERANCE:e}")]
    BadSum { sum: f64 },
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed row: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: missing required field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: field `{field}` {message}")]
    InvalidField {
        line: usize,
        field: &'static str,
        message: String,
    },
    #[error("line {line}: field `confidence` is {value}, outside [0, 1]")]
    ConfidenceOutOfRange { line: usize, value: f64 },
    #[error(
        "line {line}: duplicate question_id `{question_id}` (first seen on line {first_line})"
    )]
    DuplicateId {
        line: usize,
        question_id: String,
        first_line: usize,
    },
    #[error("line {line}: field `probabilities`: {source}")]
    Probabilities {
        line: usize,
        #[source]
        source: ProbabilityError,
    },
    #[error("line 1: CSV header must be `{}`, found `{found}`", CSV_HEADER.join(","))]
    BadHeader { found: String },
    #[error("input contains no records")]
    NoRecords,
    #[error("manifest {path}: {source}")]
    ManifestIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest {path}: {message}")]
    ManifestMalformed { path: PathBuf, message: String },
    #[error("manifest {path}: no runs declared")]
    EmptyManifest { path: PathBuf },
    #[error("manifest {path}: duplicate model_name `{name}`")]
    DuplicateModel { path: PathBuf, name: String },
}

/// One question/answer event: the model's answer to a question, the oracle's
/// answer, and the model's confidence in its own answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub question_id: String,
    pub predicted_label: String,
    pub oracle_label: String,
    pub confidence: f64,
}

impl PredictionRecord {
    pub fn new(
        question_id: impl Into<String>,
        predicted_label: impl Into<String>,
        oracle_label: impl Into<String>,
        confidence: f64,
    ) -> Self {
        Self {
            question_id: question_id.into(),
            predicted_label: predicted_label.into(),
            oracle_label: oracle_label.into(),
            confidence,
        }
    }

    /// Whether the model's answer matches the oracle's, by exact string equality.
    pub fn is_correct(&self) -> bool {
        self.predicted_label == self.oracle_label
    }

    fn validate(&self, line: usize) -> Result<(), IngestError> {
        for (field, value) in [
            ("question_id", &self.question_id),
            ("predicted_label", &self.predicted_label),
            ("oracle_label", &self.oracle_label),
        ] {
            if value.is_empty() {
                return Err(IngestError::InvalidField {
                    line,
                    field,
                    message: "must be non-empty".into(),
                });
            }
        }
        if !self.confidence.is_finite() {
            return Err(IngestError::InvalidField {
                line,
                field: "confidence",
                message: format!("is not a finite number ({})", self.confidence),
            });
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(IngestError::ConfidenceOutOfRange {
                line,
                value: self.confidence,
            });
        }
        Ok(())
    }
}

/// The validated, ordered records of one model run.
///
/// Immutable after construction; every record satisfies the field invariants
/// and question ids are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordSet {
    model_name: String,
    records: Vec<PredictionRecord>,
}

impl RecordSet {
    /// Validates `records`; errors report the 1-based record position as the line.
    pub fn new(
        model_name: impl Into<String>,
        records: Vec<PredictionRecord>,
    ) -> Result<Self, IngestError> {
        let lines: Vec<usize> = (1..=records.len()).collect();
        Self::with_lines(model_name.into(), records, &lines)
    }

    fn with_lines(
        model_name: String,
        records: Vec<PredictionRecord>,
        lines: &[usize],
    ) -> Result<Self, IngestError> {
        let mut seen: HashMap<&str, usize> = HashMap::with_capacity(records.len());
        for (record, &line) in records.iter().zip(lines) {
            record.validate(line)?;
            if let Some(&first_line) = seen.get(record.question_id.as_str()) {
                return Err(IngestError::DuplicateId {
                    line,
                    question_id: record.question_id.clone(),
                    first_line,
                });
            }
            seen.insert(&record.question_id, line);
        }
        drop(seen);
        Ok(Self {
            model_name,
            records,
        })
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn records(&self) -> &[PredictionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Csv,
    Jsonl,
}

impl InputFormat {
    /// Guesses the format from a file extension (`.csv`, `.jsonl`, `.ndjson`).
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Self::Csv),
            "jsonl" | "ndjson" => Some(Self::Jsonl),
            _ => None,
        }
    }
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "jsonl" => Ok(Self::Jsonl),
            other => Err(format!(
                "unknown input format `{other}` (expected csv or jsonl)"
            )),
        }
    }
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Jsonl => "jsonl",
        })
    }
}

/// Returns the argmax of a probability vector and its value.
///
/// Ties go to the lowest index.
pub fn derive_confidence(probabilities: &[f64]) -> Result<(usize, f64), ProbabilityError> {
    if probabilities.is_empty() {
        return Err(ProbabilityError::Empty);
    }
    for (index, &value) in probabilities.iter().enumerate() {
        if !value.is_finite() {
            return Err(ProbabilityError::NotFinite { index });
        }
        if value < 0.0 {
            return Err(ProbabilityError::Negative { index, value });
        }
        if value > 1.0 {
            return Err(ProbabilityError::AboveOne { index, value });
        }
    }
    let sum = crate::numeric::stable_sum(probabilities.iter().copied());
    if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
        return Err(ProbabilityError::BadSum { sum });
    }
    let mut best = 0;
    for (i, &p) in probabilities.iter().enumerate().skip(1) {
        if p > probabilities[best] {
            best = i;
        }
    }
    Ok((best, probabilities[best]))
}

/// Parses a prediction dump into a [`RecordSet`] named `model_name`.
pub fn parse_records<R: Read>(
    source: R,
    format: InputFormat,
    model_name: impl Into<String>,
) -> Result<RecordSet, IngestError> {
    let (records, lines) = match format {
        InputFormat::Csv => parse_csv(source)?,
        InputFormat::Jsonl => parse_jsonl(source)?,
    };
    if records.is_empty() {
        return Err(IngestError::NoRecords);
    }
    RecordSet::with_lines(model_name.into(), records, &lines)
}

fn parse_csv<R: Read>(source: R) -> Result<(Vec<PredictionRecord>, Vec<usize>), IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let mut rows = reader.records();

    let header = match rows.next() {
        None => return Err(IngestError::NoRecords),
        Some(row) => row.map_err(|e| csv_error(e, 1))?,
    };
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(IngestError::BadHeader {
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut records = Vec::new();
    let mut lines = Vec::new();
    for row in rows {
        let row = row.map_err(|e| csv_error(e, lines.last().map_or(2, |l| l + 1)))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() == 1 && row.get(0) == Some("") {
            continue;
        }
        if row.len() < CSV_HEADER.len() {
            return Err(IngestError::MissingField {
                line,
                field: CSV_HEADER[row.len()],
            });
        }
        if row.len() > CSV_HEADER.len() {
            return Err(IngestError::Malformed {
                line,
                message: format!("expected {} fields, found {}", CSV_HEADER.len(), row.len()),
            });
        }
        let raw = row[3].trim();
        let confidence = raw.parse::<f64>().map_err(|_| IngestError::InvalidField {
            line,
            field: "confidence",
            message: format!("is not a number (`{raw}`)"),
        })?;
        let record = PredictionRecord::new(&row[0], &row[1], &row[2], confidence);
        record.validate(line)?;
        records.push(record);
        lines.push(line);
    }
    Ok((records, lines))
}

fn csv_error(err: csv::Error, fallback_line: usize) -> IngestError {
    let line = err.position().map_or(fallback_line, |p| p.line() as usize);
    let message = match err.kind() {
        csv::ErrorKind::Utf8 { .. } => "row is not valid UTF-8".to_string(),
        csv::ErrorKind::Io(e) => {
            return IngestError::Io(std::io::Error::new(e.kind(), e.to_string()))
        }
        _ => err.to_string(),
    };
    IngestError::Malformed { line, message }
}

fn parse_jsonl<R: Read>(mut source: R) -> Result<(Vec<PredictionRecord>, Vec<usize>), IngestError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;

    let mut records = Vec::new();
    let mut lines = Vec::new();
    for (idx, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = idx + 1;
        let text = std::str::from_utf8(raw).map_err(|_| IngestError::Malformed {
            line,
            message: "row is not valid UTF-8".into(),
        })?;
        let text = text.trim();
        if text.is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(text).map_err(|e| IngestError::Malformed {
            line,
            message: format!("invalid JSON: {e}"),
        })?;
        let record = json_record(&value, line)?;
        record.validate(line)?;
        records.push(record);
        lines.push(line);
    }
    Ok((records, lines))
}

fn json_record(value: &Value, line: usize) -> Result<PredictionRecord, IngestError> {
    let obj = value.as_object().ok_or_else(|| IngestError::Malformed {
        line,
        message: "expected a JSON object".into(),
    })?;
    let text_field = |field: &'static str| -> Result<String, IngestError> {
        match obj.get(field) {
            None | Some(Value::Null) => Err(IngestError::MissingField { line, field }),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(other) => Err(IngestError::InvalidField {
                line,
                field,
                message: format!("must be a string, found {}", json_kind(other)),
            }),
        }
    };
    let question_id = text_field("question_id")?;
    let predicted_label = text_field("predicted_label")?;
    let oracle_label = text_field("oracle_label")?;

    let confidence = match (obj.get("confidence"), obj.get("probabilities")) {
        (Some(_), Some(_)) => {
            return Err(IngestError::Malformed {
                line,
                message: "fields `confidence` and `probabilities` are mutually exclusive".into(),
            })
        }
        (None, None) => {
            return Err(IngestError::MissingField {
                line,
                field: "confidence",
            })
        }
        (Some(c), None) => c.as_f64().ok_or_else(|| IngestError::InvalidField {
            line,
            field: "confidence",
            message: format!("must be a number, found {}", json_kind(c)),
        })?,
        (None, Some(p)) => {
            let items = p.as_array().ok_or_else(|| IngestError::InvalidField {
                line,
                field: "probabilities",
                message: format!("must be an array, found {}", json_kind(p)),
            })?;
            let probs = items
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    v.as_f64().ok_or_else(|| IngestError::InvalidField {
                        line,
                        field: "probabilities",
                        message: format!("entry {i} must be a number, found {}", json_kind(v)),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            derive_confidence(&probs)
                .map_err(|source| IngestError::Probabilities { line, source })?
                .1
        }
    };
    Ok(PredictionRecord {
        question_id,
        predicted_label,
        oracle_label,
        confidence,
    })
}

fn json_kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

/// Writes `set` in the canonical schema (scalar confidence).
pub fn write_records<W: Write>(
    set: &RecordSet,
    mut sink: W,
    format: InputFormat,
) -> Result<(), IngestError> {
    match format {
        InputFormat::Csv => {
            let mut writer = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(sink);
            writer
                .write_record(CSV_HEADER)
                .map_err(|e| csv_error(e, 1))?;
            for record in set.records() {
                writer.serialize(record).map_err(|e| csv_error(e, 0))?;
            }
            writer.flush()?;
        }
        InputFormat::Jsonl => {
            for record in set.records() {
                serde_json::to_writer(&mut sink, record).map_err(std::io::Error::from)?;
                sink.write_all(b"\n")?;
            }
            sink.flush()?;
        }
    }
    Ok(())
}

/// One entry of a run manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunEntry {
    pub model_name: String,
    pub path: PathBuf,
}

/// Reads a JSON run manifest. Relative record paths are resolved against the
/// manifest's directory.
pub fn load_run_manifest(path: &Path) -> Result<Vec<RunEntry>, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::ManifestIo {
        path: path.to_path_buf(),
        source,
    })?;
    let entries: Vec<RunEntry> =
        serde_json::from_str(&text).map_err(|e| IngestError::ManifestMalformed {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    if entries.is_empty() {
        return Err(IngestError::EmptyManifest {
            path: path.to_path_buf(),
        });
    }
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut names = std::collections::HashSet::new();
    let mut runs = Vec::with_capacity(entries.len());
    for entry in entries {
        if entry.model_name.is_empty() {
            return Err(IngestError::ManifestMalformed {
                path: path.to_path_buf(),
                message: "model_name must be non-empty".into(),
            });
        }
        if !names.insert(entry.model_name.clone()) {
            return Err(IngestError::DuplicateModel {
                path: path.to_path_buf(),
                name: entry.model_name,
            });
        }
        let resolved = if entry.path.is_absolute() {
            entry.path
        } else {
            base.join(entry.path)
        };
        runs.push(RunEntry {
            model_name: entry.model_name,
            path: resolved,
        });
    }
    Ok(runs)
}
