use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::solver::Trace;
use crate::{Error, Result};

pub const TRACE_CSV_HEADER: &str =
    "iter,t,dt,f,grad_norm,lyap,z_min,z_max,eatss_trials,grad_evals,hess_evals";

/// One parsed trace row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub iter: usize,
    pub t: f64,
    pub dt: f64,
    pub f: f64,
    pub grad_norm: f64,
    pub lyap: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub eatss_trials: usize,
    pub grad_evals: u64,
    pub hess_evals: u64,
}

/// Writes the trace with 17 significant digits per float, enough to
/// round-trip every value exactly.
pub fn write_trace_csv<W: Write>(trace: &Trace, mut w: W) -> Result<()> {
    writeln!(w, "{TRACE_CSV_HEADER}")?;
    for r in &trace.records {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}",
            r.iter,
            r.t,
            r.dt,
            r.f,
            r.grad_norm,
            r.lyap,
            r.z_min,
            r.z_max,
            r.eatss_trials,
            r.evals.grad,
            r.evals.hess
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_trace_csv(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    write_trace_csv(trace, BufWriter::new(File::create(path)?))
}

pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<Vec<CsvRow>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    match lines.next().transpose()? {
        Some(h) if h == TRACE_CSV_HEADER => {}
        other => {
            return Err(Error::usage(format!(
                "unexpected trace header: {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let bad = || Error::usage(format!("malformed trace row {}: {line}", lineno + 2));
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 11 {
            return Err(bad());
        }
        let float = |i: usize| cells[i].parse::<f64>().map_err(|_| bad());
        let int = |i: usize| cells[i].parse::<u64>().map_err(|_| bad());
        rows.push(CsvRow {
            iter: int(0)? as usize,
            t: float(1)?,
            dt: float(2)?,
            f: float(3)?,
            grad_norm: float(4)?,
            lyap: float(5)?,
            z_min: float(6)?,
            z_max: float(7)?,
            eatss_trials: int(8)? as usize,
            grad_evals: int(9)?,
            hess_evals: int(10)?,
        });
    }
    Ok(rows)
}
