//! CSV and JSON writers, and readers for re-aggregation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::aggregate::{AggregateRow, AggregateTrace};
use super::run::{ErrorTrace, TraceRow};
use crate::error::{Error, Result};

pub const AGGREGATE_HEADER: [&str; 5] = ["checkpoint_index", "oracle_calls", "median_l2", "decile10_l2", "decile90_l2"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn aggregate_file(self) -> &'static str {
        match self {
            OutputFormat::Csv => "aggregate.csv",
            OutputFormat::Json => "aggregate.json",
        }
    }
}

/// 17 significant digits; parses back to the same bits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_field<T: std::str::FromStr>(path: &Path, field: &str, what: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::config(path.display().to_string(), format!("cannot parse {what} from {field:?}")))
}

pub fn write_aggregate_csv(agg: &AggregateTrace, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(AGGREGATE_HEADER).map_err(csv_err(path))?;
    for r in &agg.rows {
        w.write_record([
            r.checkpoint_index.to_string(),
            r.oracle_calls.to_string(),
            format_float(r.median_l2),
            format_float(r.decile10_l2),
            format_float(r.decile90_l2),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_aggregate_csv(path: &Path) -> Result<AggregateTrace> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().collect::<Vec<_>>() != AGGREGATE_HEADER {
        return Err(Error::config(path.display().to_string(), format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        rows.push(AggregateRow {
            checkpoint_index: parse_field(path, &rec[0], "checkpoint_index")?,
            oracle_calls: parse_field(path, &rec[1], "oracle_calls")?,
            median_l2: parse_field(path, &rec[2], "median_l2")?,
            decile10_l2: parse_field(path, &rec[3], "decile10_l2")?,
            decile90_l2: parse_field(path, &rec[4], "decile90_l2")?,
        });
    }
    Ok(AggregateTrace { rows })
}

pub fn write_aggregate_json(agg: &AggregateTrace, path: &Path) -> Result<()> {
    write_json(agg, path)
}

pub fn read_aggregate_json(path: &Path) -> Result<AggregateTrace> {
    #[derive(Deserialize)]
    struct Row {
        checkpoint_index: usize,
        oracle_calls: u64,
        median_l2: f64,
        decile10_l2: f64,
        decile90_l2: f64,
    }
    #[derive(Deserialize)]
    struct Doc {
        rows: Vec<Row>,
    }
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let doc: Doc = serde_json::from_str(&text).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    Ok(AggregateTrace {
        rows: doc
            .rows
            .into_iter()
            .map(|r| AggregateRow {
                checkpoint_index: r.checkpoint_index,
                oracle_calls: r.oracle_calls,
                median_l2: r.median_l2,
                decile10_l2: r.decile10_l2,
                decile90_l2: r.decile90_l2,
            })
            .collect(),
    })
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Wide per-trial file: `checkpoint_index, oracle_calls, trial_<id>...`.
pub fn write_trials_csv(traces: &[ErrorTrace], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header = vec!["checkpoint_index".to_string(), "oracle_calls".to_string()];
    header.extend(traces.iter().map(|t| format!("trial_{}", t.trial)));
    w.write_record(&header).map_err(csv_err(path))?;
    let rows = traces.first().map_or(0, |t| t.rows.len());
    if traces.iter().any(|t| t.rows.len() != rows) {
        return Err(Error::Misaligned("traces differ in length".into()));
    }
    for j in 0..rows {
        let mut rec = Vec::with_capacity(header.len());
        rec.push(traces[0].rows[j].checkpoint_index.to_string());
        rec.push(traces.iter().map(|t| t.rows[j].oracle_calls).max().unwrap_or(0).to_string());
        rec.extend(traces.iter().map(|t| format_float(t.rows[j].l2)));
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_trials_csv(path: &Path) -> Result<Vec<ErrorTrace>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.len() < 2 || &header[0] != "checkpoint_index" || &header[1] != "oracle_calls" {
        return Err(Error::config(path.display().to_string(), format!("unexpected header {header:?}")));
    }
    let mut traces = Vec::with_capacity(header.len() - 2);
    for name in header.iter().skip(2) {
        let id = name
            .strip_prefix("trial_")
            .ok_or_else(|| Error::config(path.display().to_string(), format!("bad column {name:?}")))?;
        traces.push(ErrorTrace {
            trial: parse_field(path, id, "trial id")?,
            rows: Vec::new(),
        });
    }
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let checkpoint_index: usize = parse_field(path, &rec[0], "checkpoint_index")?;
        let oracle_calls: u64 = parse_field(path, &rec[1], "oracle_calls")?;
        for (t, field) in traces.iter_mut().zip(rec.iter().skip(2)) {
            t.rows.push(TraceRow {
                checkpoint_index,
                oracle_calls,
                l2: parse_field(path, field, "l2")?,
            });
        }
    }
    Ok(traces)
}

/// Writes the aggregate in `format` into `dir` and returns its path.
pub fn emit(agg: &AggregateTrace, traces: &[ErrorTrace], format: OutputFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let agg_path = dir.join(format.aggregate_file());
    match format {
        OutputFormat::Csv => write_aggregate_csv(agg, &agg_path)?,
        OutputFormat::Json => write_aggregate_json(agg, &agg_path)?,
    }
    let trials_path = dir.join("trials.csv");
    write_trials_csv(traces, &trials_path)?;
    Ok(vec![agg_path, trials_path])
}
