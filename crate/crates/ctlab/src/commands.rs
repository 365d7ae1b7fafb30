//! The four subcommands: load a spec, run it, write the outputs.

use std::path::Path;

use crate::error::{CliError, Result};
use crate::output::{rfo_json_path, write_csv, write_json};
use crate::run::{run_flood, run_histogram, run_sweep, run_tempsweep, RunOptions};
use crate::spec::{load, FloodSpec, HistogramSpec, SweepSpec, TempSweepSpec};

pub fn cmd_sweep(spec: &Path, out: &Path, opts: &RunOptions) -> Result<()> {
    let spec: SweepSpec = load(spec)?;
    write_csv(out, &run_sweep(&spec, opts)?)
}

/// Writes the histogram CSV to `out` and the estimate next to it. Returns
/// insufficient-data after writing both when no estimate was possible.
pub fn cmd_histogram(spec: &Path, out: &Path, opts: &RunOptions) -> Result<()> {
    let spec: HistogramSpec = load(spec)?;
    let r = run_histogram(&spec, opts)?;
    write_csv(out, &r.rows())?;
    write_json(&rfo_json_path(out), &r.report)?;
    match r.estimate {
        Some(_) => Ok(()),
        None => Err(CliError::InsufficientData(r.report.message.unwrap_or_default())),
    }
}

pub fn cmd_tempsweep(spec: &Path, out: &Path, opts: &RunOptions) -> Result<()> {
    let spec: TempSweepSpec = load(spec)?;
    write_csv(out, &run_tempsweep(&spec, opts)?)
}

pub fn cmd_flood(spec: &Path, out: &Path, opts: &RunOptions) -> Result<()> {
    let spec: FloodSpec = load(spec)?;
    write_csv(out, &run_flood(&spec, opts)?)
}
