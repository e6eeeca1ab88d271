//! Link observations and the shared samples CSV format.
//!
//! ```text
//! timestamp,utilization_percent,active_flows
//! 1700000000,17.25,950
//! ```
//!
//! `timestamp` is integer epoch seconds, `utilization_percent` a decimal with
//! at most six fractional digits, `active_flows` a non-negative integer.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

pub const CSV_HEADER: [&str; 3] = ["timestamp", "utilization_percent", "active_flows"];

/// One observation of a link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkSample {
    /// Seconds (epoch seconds for ingested data, simulated time otherwise).
    pub timestamp: f64,
    /// Percent of link capacity.
    pub utilization: f64,
    pub active_flows: u64,
}

impl LinkSample {
    pub fn new(timestamp: f64, utilization: f64, active_flows: u64) -> Self {
        LinkSample {
            timestamp,
            utilization,
            active_flows,
        }
    }
}

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("sample {index}: cannot write {field} = {value} in the samples schema")]
    Unrepresentable {
        index: usize,
        field: &'static str,
        value: f64,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Formats a utilization with up to six fractional digits, trailing zeros trimmed.
pub fn format_utilization(value: f64) -> String {
    let mut s = format!("{value:.6}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

/// Incremental CSV writer; the header is written on construction.
pub struct SampleWriter<W: Write> {
    writer: csv::Writer<W>,
    written: usize,
}

impl<W: Write> SampleWriter<W> {
    pub fn new(out: W) -> Result<Self, CsvError> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        writer.write_record(CSV_HEADER)?;
        Ok(SampleWriter { writer, written: 0 })
    }

    pub fn write(&mut self, s: &LinkSample) -> Result<(), CsvError> {
        let index = self.written;
        if !s.timestamp.is_finite() || s.timestamp.fract() != 0.0 || s.timestamp.abs() > 9.0e15 {
            return Err(CsvError::Unrepresentable {
                index,
                field: "timestamp",
                value: s.timestamp,
            });
        }
        if !(s.utilization.is_finite() && s.utilization >= 0.0) {
            return Err(CsvError::Unrepresentable {
                index,
                field: "utilization_percent",
                value: s.utilization,
            });
        }
        self.writer.write_record([
            format!("{}", s.timestamp as i64),
            format_utilization(s.utilization),
            s.active_flows.to_string(),
        ])?;
        self.written += 1;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), CsvError> {
        self.writer.flush()?;
        Ok(())
    }
}

pub fn write_samples<W: Write>(samples: &[LinkSample], out: W) -> Result<(), CsvError> {
    let mut writer = SampleWriter::new(out)?;
    for s in samples {
        writer.write(s)?;
    }
    writer.flush()
}

pub fn write_samples_csv(samples: &[LinkSample], path: impl AsRef<Path>) -> Result<(), CsvError> {
    let file = File::create(path)?;
    write_samples(samples, BufWriter::new(file))
}

/// Reads samples, returned in timestamp order.
///
/// Out-of-order rows are accepted with a warning and sorted.
pub fn read_samples<R: Read>(input: R) -> Result<Vec<LinkSample>, CsvError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();

    match records.next() {
        None => {
            return Err(CsvError::MalformedRow {
                line: 1,
                reason: "missing header".into(),
            })
        }
        Some(header) => {
            let header = header?;
            if header.iter().ne(CSV_HEADER) {
                return Err(CsvError::MalformedRow {
                    line: 1,
                    reason: format!("expected header {:?}", CSV_HEADER.join(",")),
                });
            }
        }
    }

    let mut samples = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |reason: String| CsvError::MalformedRow { line, reason };
        if record.len() != 3 {
            return Err(malformed(format!(
                "expected 3 fields, got {}",
                record.len()
            )));
        }
        let timestamp: i64 = record[0]
            .parse()
            .map_err(|e| malformed(format!("timestamp {:?}: {e}", &record[0])))?;
        let utilization: f64 = record[1]
            .parse()
            .map_err(|e| malformed(format!("utilization_percent {:?}: {e}", &record[1])))?;
        if !(utilization.is_finite() && utilization >= 0.0) {
            return Err(malformed(format!(
                "utilization_percent must be finite and >= 0, got {utilization}"
            )));
        }
        let active_flows: u64 = record[2]
            .parse()
            .map_err(|e| malformed(format!("active_flows {:?}: {e}", &record[2])))?;
        samples.push(LinkSample::new(timestamp as f64, utilization, active_flows));
    }

    if samples.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
        log::warn!("samples are not in timestamp order, sorting");
        samples.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    }
    Ok(samples)
}

pub fn read_samples_csv(path: impl AsRef<Path>) -> Result<Vec<LinkSample>, CsvError> {
    read_samples(File::open(path)?)
}
