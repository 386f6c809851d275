//! Per-iteration convergence records and their CSV form.
//!
//! The CSV layout is fixed: `#`-prefixed header comments carrying run
//! provenance, one column-name line, then one row per outer iteration.
//! Numbers are written with Rust's shortest round-trip formatting, so
//! parsing a written trace recovers it exactly.

use crate::error::{Error, Result};

pub const TRACE_COLUMNS: &str =
    "iter,beta,objective,fidelity,jump_count,residual_h,residual_v,rel_change,cg_iters,wall_ms";

/// One completed outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub beta: f64,
    pub objective: f64,
    pub fidelity: f64,
    pub jump_count: usize,
    pub residual_h: f64,
    pub residual_v: f64,
    pub rel_change: f64,
    pub cg_iters: usize,
    pub wall_ms: f64,
}

/// Run provenance written as comment lines ahead of the CSV body.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceHeader {
    pub config_hash: String,
    pub variant: String,
    pub schedule: String,
    pub boundary: String,
    /// Schedule does not meet the fixed-point growth condition.
    pub schedule_warning: bool,
    /// Periodic differences: outside the convergence hypotheses.
    pub boundary_warning: bool,
}

/// Quantities observed during the run that are not part of the CSV contract.
#[derive(Debug, Clone, Default)]
pub struct TraceDiagnostics {
    /// Largest observed ratio of the prox-step residual to its a priori
    /// bound `sqrt(2*mu*N/beta)`; must never exceed 1.
    pub max_step1_ratio: f64,
    /// Outer iterations whose inner CG solve hit the iteration cap.
    pub cg_failures: usize,
    /// Whether the relative-change stopping rule fired before the cap.
    pub converged: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ConvergenceTrace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
    pub diagnostics: TraceDiagnostics,
}

impl ConvergenceTrace {
    pub fn objective_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn final_record(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Serializes header comments, the column line, and all records.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let h = &self.header;
        out.push_str(&format!("# config_hash = {}\n", h.config_hash));
        out.push_str(&format!("# variant = {}\n", h.variant));
        out.push_str(&format!("# schedule = {}\n", h.schedule));
        out.push_str(&format!("# boundary = {}\n", h.boundary));
        out.push_str(&format!("# schedule_warning = {}\n", h.schedule_warning));
        out.push_str(&format!("# boundary_warning = {}\n", h.boundary_warning));
        out.push_str(TRACE_COLUMNS);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.iter,
                r.beta,
                r.objective,
                r.fidelity,
                r.jump_count,
                r.residual_h,
                r.residual_v,
                r.rel_change,
                r.cg_iters,
                r.wall_ms
            ));
        }
        out
    }

    /// Parses a trace written by [`ConvergenceTrace::to_csv`]. Diagnostics
    /// are not part of the file format and come back defaulted.
    pub fn from_csv(text: &str) -> Result<ConvergenceTrace> {
        let mut header = TraceHeader::default();
        let mut records = Vec::new();
        let mut saw_columns = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (key, value) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::format(format!("bad header line {}", lineno + 1)))?;
                let value = value.trim().to_string();
                match key.trim() {
                    "config_hash" => header.config_hash = value,
                    "variant" => header.variant = value,
                    "schedule" => header.schedule = value,
                    "boundary" => header.boundary = value,
                    "schedule_warning" => {
                        header.schedule_warning = parse_field(&value, lineno)?
                    }
                    "boundary_warning" => {
                        header.boundary_warning = parse_field(&value, lineno)?
                    }
                    other => {
                        return Err(Error::format(format!("unknown header key `{other}`")))
                    }
                }
                continue;
            }
            if !saw_columns {
                if line != TRACE_COLUMNS {
                    return Err(Error::format(format!(
                        "unexpected column line `{line}`"
                    )));
                }
                saw_columns = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 10 {
                return Err(Error::format(format!(
                    "record at line {} has {} fields, expected 10",
                    lineno + 1,
                    fields.len()
                )));
            }
            records.push(TraceRecord {
                iter: parse_field(fields[0], lineno)?,
                beta: parse_field(fields[1], lineno)?,
                objective: parse_field(fields[2], lineno)?,
                fidelity: parse_field(fields[3], lineno)?,
                jump_count: parse_field(fields[4], lineno)?,
                residual_h: parse_field(fields[5], lineno)?,
                residual_v: parse_field(fields[6], lineno)?,
                rel_change: parse_field(fields[7], lineno)?,
                cg_iters: parse_field(fields[8], lineno)?,
                wall_ms: parse_field(fields[9], lineno)?,
            });
        }
        if !saw_columns {
            return Err(Error::format("trace has no column line"));
        }
        Ok(ConvergenceTrace {
            header,
            records,
            diagnostics: TraceDiagnostics::default(),
        })
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, lineno: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::format(format!("unparsable field `{s}` at line {}", lineno + 1)))
}
