//! Convergence tracing and CSV serialization.
//!
//! One record per inner iteration plus a terminal record, written with
//! 17 significant digits so that a round-trip through the file reproduces
//! every value bit-exactly.

use crate::error::{Error, Result};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub const CSV_HEADER: &str = "outer,inner,arnoldi_residual,backward_error,event,elapsed_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEvent {
    None,
    Restart,
    Breakdown,
    Converged,
    Exhausted,
}

impl TraceEvent {
    fn as_str(self) -> &'static str {
        match self {
            TraceEvent::None => "none",
            TraceEvent::Restart => "restart",
            TraceEvent::Breakdown => "breakdown",
            TraceEvent::Converged => "converged",
            TraceEvent::Exhausted => "exhausted",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "none" => TraceEvent::None,
            "restart" => TraceEvent::Restart,
            "breakdown" => TraceEvent::Breakdown,
            "converged" => TraceEvent::Converged,
            "exhausted" => TraceEvent::Exhausted,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Restart cycle index.
    pub outer: usize,
    /// Inner iteration within the cycle; 0 for the terminal record.
    pub inner: usize,
    /// |s_{j+1}| from the Givens-rotated least-squares problem.
    pub arnoldi_residual: f64,
    /// Normwise backward error of the materialized candidate, when sampled.
    pub true_backward_error: Option<f64>,
    pub event: TraceEvent,
    /// Seconds since the solve started.
    pub elapsed: f64,
}

/// Matrix and configuration echo attached to a trace.
#[derive(Debug, Clone, Default)]
pub struct TraceMeta {
    pub matrix_name: String,
    pub n: usize,
    pub n_nz: usize,
    pub config: String,
}

#[derive(Debug, Clone, Default)]
pub struct ConvergenceTrace {
    pub meta: TraceMeta,
    pub records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn new(meta: TraceMeta) -> Self {
        Self {
            meta,
            records: Vec::new(),
        }
    }

    /// Arnoldi residuals of a single cycle, in iteration order.
    pub fn cycle_residuals(&self, outer: usize) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.outer == outer && r.inner > 0)
            .map(|r| r.arnoldi_residual)
            .collect()
    }

    /// Number of cycles that ran at least one inner iteration.
    pub fn cycle_count(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.inner > 0)
            .map(|r| r.outer + 1)
            .max()
            .unwrap_or(0)
    }
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<P: AsRef<Path>>(trace: &ConvergenceTrace, path: P) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    write_csv_to(trace, &mut w)
}

pub fn write_csv_to<W: Write>(trace: &ConvergenceTrace, w: &mut W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in &trace.records {
        let be = r
            .true_backward_error
            .map(fmt_float)
            .unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.outer,
            r.inner,
            fmt_float(r.arnoldi_residual),
            be,
            r.event.as_str(),
            fmt_float(r.elapsed)
        )?;
    }
    Ok(())
}

pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Vec<TraceRecord>> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line_no == 1 {
            if line != CSV_HEADER {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("unexpected header '{line}'"),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("cannot parse float '{s}'"),
            })
        };
        records.push(TraceRecord {
            outer: fields[0].parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("cannot parse outer '{}'", fields[0]),
            })?,
            inner: fields[1].parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("cannot parse inner '{}'", fields[1]),
            })?,
            arnoldi_residual: parse_f(fields[2])?,
            true_backward_error: if fields[3].is_empty() {
                None
            } else {
                Some(parse_f(fields[3])?)
            },
            event: TraceEvent::parse(fields[4]).ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("unknown event '{}'", fields[4]),
            })?,
            elapsed: parse_f(fields[5])?,
        });
    }
    Ok(records)
}
