//! Result rows and their CSV / JSON forms.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "reservoir_kind,n_outcomes,n_injections,shots,target,trial,train_mse,test_mse,condition_number,wall_time_ms,seed";

/// Written in place of metrics for rows that failed.
pub const ERROR_MARKER: &str = "error";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub reservoir_kind: String,
    pub n_outcomes: usize,
    pub n_injections: usize,
    pub shots: String,
    pub target: String,
    pub trial: usize,
    pub train_mse: Option<f64>,
    pub test_mse: Option<f64>,
    pub condition_number: Option<f64>,
    pub wall_time_ms: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ResultRow {
    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn metric(v: Option<f64>) -> String {
    v.map_or_else(|| ERROR_MARKER.to_string(), float)
}

fn csv_line(row: &ResultRow) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record([
        row.reservoir_kind.clone(),
        row.n_outcomes.to_string(),
        row.n_injections.to_string(),
        row.shots.clone(),
        row.target.clone(),
        row.trial.to_string(),
        metric(row.train_mse),
        metric(row.test_mse),
        metric(row.condition_number),
        float(row.wall_time_ms),
        row.seed.to_string(),
    ])
    .expect("writing to memory");
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 fields")
}

/// Appends rows to a CSV file as they become available.
pub struct CsvRowWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvRowWriter {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        w.put(&format!("{CSV_HEADER}\n"))?;
        w.flush()?;
        Ok(w)
    }

    fn put(&mut self, s: &str) -> Result<()> {
        self.out.write_all(s.as_bytes()).map_err(|e| Error::io(&self.path, e))
    }

    pub fn write_rows(&mut self, rows: &[ResultRow]) -> Result<()> {
        for row in rows {
            self.put(&csv_line(row))?;
        }
        self.flush()
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut w = CsvRowWriter::create(path)?;
    w.write_rows(rows)
}

pub fn emit_json(rows: &[ResultRow], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(rows).map_err(|e| Error::Serialization {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json(path: &Path) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Serialization {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Reads a CSV written by [`emit_csv`]. Error rows come back with metrics
/// `None` and the bare marker as their message.
pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let bad = |message: String| Error::Serialization {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let rec = record.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let parse_int = |i: usize| {
            field(i)
                .parse::<u64>()
                .map_err(|e| bad(format!("row {}: column {i}: {e}", line + 1)))
        };
        let parse_float = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}: column {i}: {e}", line + 1)))
        };
        let parse_metric = |i: usize| {
            if field(i) == ERROR_MARKER {
                Ok(None)
            } else {
                parse_float(i).map(Some)
            }
        };
        let train_mse = parse_metric(6)?;
        let test_mse = parse_metric(7)?;
        let condition_number = parse_metric(8)?;
        let failed = train_mse.is_none() || test_mse.is_none() || condition_number.is_none();
        rows.push(ResultRow {
            reservoir_kind: field(0).to_string(),
            n_outcomes: parse_int(1)? as usize,
            n_injections: parse_int(2)? as usize,
            shots: field(3).to_string(),
            target: field(4).to_string(),
            trial: parse_int(5)? as usize,
            train_mse,
            test_mse,
            condition_number,
            wall_time_ms: parse_float(9)?,
            seed: parse_int(10)?,
            error: failed.then(|| ERROR_MARKER.to_string()),
        });
    }
    Ok(rows)
}
