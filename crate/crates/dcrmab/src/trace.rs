//! Azure-style VM trace files: comma-separated, header row required.

use std::io::{Read, Write};
use std::path::Path;

use dcrmab_core::workload::{CostModel, VmJob};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Header names of the four columns the ingester reads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceSchema {
    pub id: String,
    pub core_hours: String,
    pub utilization: String,
    pub interactive: String,
}

impl Default for TraceSchema {
    fn default() -> Self {
        Self {
            id: "vm_id".into(),
            core_hours: "core_hours".into(),
            utilization: "avg_util".into(),
            interactive: "interactive".into(),
        }
    }
}

/// A row that could not be turned into a job. Line numbers count the header as line 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for RowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub jobs: Vec<VmJob>,
    /// Rows removed by the core-hour and utilization filter.
    pub dropped: usize,
    pub row_errors: Vec<RowError>,
}

pub fn ingest_trace(path: &Path, schema: &TraceSchema, model: &CostModel) -> Result<Ingested> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, schema, model).map_err(|e| match e {
        Error::Csv { source, .. } => Error::csv(path, source),
        other => other,
    })
}

pub fn ingest_reader<R: Read>(reader: R, schema: &TraceSchema, model: &CostModel) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(Error::csv("<trace>", e)),
    };
    // A file without even a header row holds no jobs.
    if headers.is_empty() {
        return Ok(Ingested { jobs: Vec::new(), dropped: 0, row_errors: Vec::new() });
    }
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let id_col = col(&schema.id)?;
    let hours_col = col(&schema.core_hours)?;
    let util_col = col(&schema.utilization)?;
    let inter_col = col(&schema.interactive)?;

    let mut out = Ingested { jobs: Vec::new(), dropped: 0, row_errors: Vec::new() };
    for (i, record) in rdr.records().enumerate() {
        let line = record.as_ref().ok().and_then(|r| r.position()).map_or(i + 2, |p| p.line() as usize);
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                out.row_errors.push(RowError { line, message: e.to_string() });
                continue;
            }
        };
        let field = |c: usize, name: &str| {
            record.get(c).ok_or_else(|| RowError { line, message: format!("missing value for '{name}'") })
        };
        let parsed = (|| {
            let id = field(id_col, &schema.id)?.to_string();
            let hours = parse_f64(field(hours_col, &schema.core_hours)?, &schema.core_hours, line)?;
            let util = parse_f64(field(util_col, &schema.utilization)?, &schema.utilization, line)?;
            let interactive = parse_bool(field(inter_col, &schema.interactive)?, &schema.interactive, line)?;
            Ok::<_, RowError>((id, hours, util, interactive))
        })();
        let (id, hours, util, interactive) = match parsed {
            Ok(v) => v,
            Err(e) => {
                out.row_errors.push(e);
                continue;
            }
        };
        if !dcrmab_core::workload::passes_filter(hours, util) {
            out.dropped += 1;
            continue;
        }
        match VmJob::new(id, hours, util, interactive, model) {
            Ok(job) => out.jobs.push(job),
            Err(e) => out.row_errors.push(RowError { line, message: e.to_string() }),
        }
    }
    Ok(out)
}

fn parse_f64(raw: &str, name: &str, line: usize) -> std::result::Result<f64, RowError> {
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(RowError { line, message: format!("'{name}' is not a number: '{raw}'") }),
    }
}

fn parse_bool(raw: &str, name: &str, line: usize) -> std::result::Result<bool, RowError> {
    match raw.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        _ => Err(RowError { line, message: format!("'{name}' is not a flag: '{raw}'") }),
    }
}

/// Write jobs in the default schema. Numbers use the shortest representation
/// that parses back to the same value.
pub fn write_trace<W: Write>(writer: W, jobs: &[VmJob]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let s = TraceSchema::default();
    let wrap = |e: csv::Error| Error::csv("<trace>", e);
    w.write_record([&s.id, &s.core_hours, &s.utilization, &s.interactive]).map_err(wrap)?;
    for j in jobs {
        w.write_record([
            j.id.clone(),
            j.core_hours.to_string(),
            j.utilization.to_string(),
            u8::from(j.interactive).to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<trace>", e))?;
    Ok(())
}
