//! Experiment harness: configuration, multi-trial execution, aggregation and
//! output.
//!
//! Output layout, per cell of an experiment (one directory per `(sigma, alpha)` pair
//! when it has several, otherwise the output directory itself):
//!
//! ```text
//! aggregate.csv | aggregate.json   median and deciles of ‖x − x*‖₂ per checkpoint
//! trials.csv                       one column per successful trial
//! manifest.json                    resolved spec, seed, per-trial constants and plans
//! ```

mod aggregate;
mod emit;
mod run;
pub mod spec;

use std::path::{Path, PathBuf};

use serde::Serialize;

pub use aggregate::{aggregate, quantile, AggregateRow, AggregateTrace};
pub use emit::{
    emit, format_float, read_aggregate_csv, read_aggregate_json, read_trials_csv, write_aggregate_csv, write_aggregate_json,
    write_json, write_trials_csv, OutputFormat, AGGREGATE_HEADER,
};
pub use run::{checkpoint_grid, run_cell, run_trial, run_trials, setup_trial, worker_pool, CellRun, ErrorTrace, TraceRow, TrialFailure, TrialSetup};
pub use spec::{load_spec, presets, Algorithm, BatchSpec, Cell, CheckpointUnits, ConstantsSource, ExperimentSpec, OracleKind, Tail};

use crate::error::{Error, Result};
use crate::multistage::StagePlan;
use crate::oracle::ProblemConstants;

#[derive(Serialize)]
struct TrialEntry {
    trial: u32,
    r0: f64,
    constants: ProblemConstants,
    stages: Vec<StagePlan>,
    planned_calls: u64,
    final_l2: Option<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    cell: Cell,
    checkpoint_units: CheckpointUnits,
    budget: u64,
    checkpoints: usize,
    format: OutputFormat,
    spec: &'a ExperimentSpec,
    trials: Vec<TrialEntry>,
    failures: &'a [TrialFailure],
}

/// Where one cell was written and how many of its trials failed.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub label: String,
    pub dir: PathBuf,
    pub trials: usize,
    pub failures: Vec<TrialFailure>,
}

/// Aggregates one cell and writes it to `dir`.
pub fn write_cell(spec: &ExperimentSpec, run: &CellRun, format: OutputFormat, dir: &Path) -> Result<()> {
    let agg = if run.traces.is_empty() {
        AggregateTrace::default()
    } else {
        aggregate(&run.traces)?
    };
    emit(&agg, &run.traces, format, dir)?;
    let trials = run
        .setups
        .iter()
        .map(|s| TrialEntry {
            trial: s.trial,
            r0: s.r0,
            constants: s.constants,
            stages: s.stages.clone(),
            planned_calls: s.planned_calls,
            final_l2: run
                .traces
                .iter()
                .find(|t| t.trial == s.trial)
                .and_then(|t| t.rows.last().map(|r| r.l2)),
        })
        .collect();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed: spec.seed,
        cell: run.cell,
        checkpoint_units: run.units,
        budget: run.budget,
        checkpoints: run.grid.len(),
        format,
        spec,
        trials,
        failures: &run.failures,
    };
    write_json(&manifest, &dir.join("manifest.json"))
}

/// Runs every cell of `spec` and writes the results under `out`.
pub fn execute(spec: &ExperimentSpec, out: &Path, format: OutputFormat, workers: Option<usize>) -> Result<Vec<CellSummary>> {
    let pool = worker_pool(workers)?;
    let cells = spec.cells();
    let nested = cells.len() > 1;
    let mut summaries = Vec::with_capacity(cells.len());
    for cell in &cells {
        let run = run_cell(spec, cell, &pool);
        let dir = if nested { out.join(cell.label()) } else { out.to_path_buf() };
        write_cell(spec, &run, format, &dir)?;
        summaries.push(CellSummary {
            label: cell.label(),
            dir,
            trials: spec.trials,
            failures: run.failures,
        });
    }
    Ok(summaries)
}

/// Recomputes the aggregate from `trials.csv` in `dir` and in each of its
/// immediate subdirectories. Returns the files written.
pub fn reaggregate(dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    let mut targets = Vec::new();
    if dir.join("trials.csv").is_file() {
        targets.push(dir.to_path_buf());
    }
    let entries = std::fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut subdirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("trials.csv").is_file())
        .collect();
    subdirs.sort();
    targets.extend(subdirs);
    if targets.is_empty() {
        return Err(Error::config(dir.display().to_string(), "no trials.csv found"));
    }
    let mut written = Vec::with_capacity(targets.len());
    for t in targets {
        let traces = read_trials_csv(&t.join("trials.csv"))?;
        let agg = if traces.is_empty() {
            AggregateTrace::default()
        } else {
            aggregate(&traces)?
        };
        let path = t.join(format.aggregate_file());
        match format {
            OutputFormat::Csv => write_aggregate_csv(&agg, &path)?,
            OutputFormat::Json => write_aggregate_json(&agg, &path)?,
        }
        written.push(path);
    }
    Ok(written)
}
