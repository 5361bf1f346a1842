use std::io::Read;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use log::warn;

use super::table::{Column, Interval, TimeSeriesTable};
use crate::error::{Error, Result};

/// Columns expected in an input file and the sampling interval they were
/// recorded at.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub columns: Vec<String>,
    pub interval: Interval,
}

impl Schema {
    pub fn new<S: AsRef<str>>(columns: &[S], interval: Interval) -> Self {
        Schema {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            interval,
        }
    }
}

/// Parses an ISO 8601 instant. Offsets are converted to UTC; naive values are
/// taken as UTC; a bare date means midnight.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc())
}

/// Reads a CSV with a `timestamp` column plus the schema's numeric columns.
///
/// Rows with a missing, unparseable or non-finite cell are dropped. The
/// surviving rows are sorted by time; a repeated timestamp is an error.
pub fn ingest<R: Read>(source: R, schema: &Schema) -> Result<TimeSeriesTable> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    let position = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let ts_idx = position("timestamp")?;
    let col_idx = schema.columns.iter().map(|c| position(c)).collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<(DateTime<Utc>, Vec<f64>)> = Vec::new();
    let mut dropped = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let values = col_idx
            .iter()
            .map(|&i| {
                record
                    .get(i)
                    .and_then(|cell| cell.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
            })
            .collect::<Option<Vec<f64>>>();
        let parsed = record.get(ts_idx).and_then(parse_timestamp).zip(values);
        match parsed {
            Some(row) => rows.push(row),
            None => {
                dropped += 1;
                warn!("dropping malformed record on data line {}", line + 1);
            }
        }
    }
    if dropped > 0 {
        warn!("ingest dropped {dropped} record(s)");
    }
    if rows.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} usable row(s) after cleaning, need at least 2",
            rows.len()
        )));
    }
    rows.sort_by_key(|r| r.0);
    if let Some(pair) = rows.windows(2).find(|p| p[0].0 == p[1].0) {
        return Err(Error::DuplicateTimestamp(pair[0].0.to_rfc3339()));
    }

    let timestamps = rows.iter().map(|r| r.0).collect();
    let columns = schema
        .columns
        .iter()
        .enumerate()
        .map(|(k, name)| Column {
            name: name.clone(),
            values: rows.iter().map(|r| r.1[k]).collect(),
        })
        .collect();
    TimeSeriesTable::new(timestamps, columns, schema.interval)
}
