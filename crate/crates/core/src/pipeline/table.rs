use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interval {
    Hourly,
    Daily,
    Weekly,
}

impl Interval {
    pub fn step(self) -> Duration {
        match self {
            Interval::Hourly => Duration::hours(1),
            Interval::Daily => Duration::days(1),
            Interval::Weekly => Duration::weeks(1),
        }
    }
}

/// A named real-valued series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

/// Timestamped multi-column series sampled at a fixed interval.
///
/// Rows may be missing (a gap that is a whole number of steps) after the
/// cleaning pass drops bad records; [`TimeSeriesTable::is_contiguous`] tells
/// whether the series is gap-free.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesTable {
    timestamps: Vec<DateTime<Utc>>,
    columns: Vec<Column>,
    interval: Interval,
}

impl TimeSeriesTable {
    pub fn new(timestamps: Vec<DateTime<Utc>>, columns: Vec<Column>, interval: Interval) -> Result<Self> {
        for c in &columns {
            if c.values.len() != timestamps.len() {
                return Err(Error::Dimension(format!(
                    "column `{}` has {} values for {} timestamps",
                    c.name,
                    c.values.len(),
                    timestamps.len()
                )));
            }
            if let Some(v) = c.values.iter().find(|v| !v.is_finite()) {
                return Err(Error::NumericInput(format!("column `{}` holds {v}", c.name)));
            }
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::Config(format!("column `{}` given twice", c.name)));
            }
        }
        let step = interval.step().num_seconds();
        for pair in timestamps.windows(2) {
            let gap = (pair[1] - pair[0]).num_seconds();
            if gap <= 0 {
                return Err(if gap == 0 {
                    Error::DuplicateTimestamp(pair[0].to_rfc3339())
                } else {
                    Error::Parse(format!("timestamps not increasing at {}", pair[1].to_rfc3339()))
                });
            }
            if gap % step != 0 {
                return Err(Error::Parse(format!(
                    "spacing of {gap}s after {} is not a multiple of the {interval:?} interval",
                    pair[0].to_rfc3339()
                )));
            }
        }
        Ok(TimeSeriesTable {
            timestamps,
            columns,
            interval,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn timestamps(&self) -> &[DateTime<Utc>] {
        &self.timestamps
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// True when consecutive timestamps are exactly one interval apart.
    pub fn is_contiguous(&self) -> bool {
        let step = self.interval.step();
        self.timestamps.windows(2).all(|p| p[1] - p[0] == step)
    }

    /// Value of every column at `row`, in column order.
    pub fn row(&self, row: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c.values[row]).collect()
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<TimeSeriesTable> {
        let columns = names
            .iter()
            .map(|n| {
                self.column(n).map(|v| Column {
                    name: n.to_string(),
                    values: v.to_vec(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        TimeSeriesTable::new(self.timestamps.clone(), columns, self.interval)
    }

    /// Rows `[start, end)` as a new table.
    pub fn slice_rows(&self, start: usize, end: usize) -> TimeSeriesTable {
        TimeSeriesTable {
            timestamps: self.timestamps[start..end].to_vec(),
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    values: c.values[start..end].to_vec(),
                })
                .collect(),
            interval: self.interval,
        }
    }

    /// Inner join on timestamps. Both tables must share an interval and have
    /// disjoint column names.
    pub fn join(&self, other: &TimeSeriesTable) -> Result<TimeSeriesTable> {
        if self.interval != other.interval {
            return Err(Error::Config(format!(
                "cannot join {:?} and {:?} tables",
                self.interval, other.interval
            )));
        }
        let mut rows = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.len() && j < other.len() {
            match self.timestamps[i].cmp(&other.timestamps[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    rows.push((i, j));
                    i += 1;
                    j += 1;
                }
            }
        }
        let timestamps = rows.iter().map(|&(i, _)| self.timestamps[i]).collect();
        let mut columns: Vec<Column> = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                values: rows.iter().map(|&(i, _)| c.values[i]).collect(),
            })
            .collect();
        columns.extend(other.columns.iter().map(|c| Column {
            name: c.name.clone(),
            values: rows.iter().map(|&(_, j)| c.values[j]).collect(),
        }));
        TimeSeriesTable::new(timestamps, columns, self.interval)
    }

    /// Writes the table as CSV with a leading RFC 3339 `timestamp` column.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        w.write_record(&header)?;
        for (r, ts) in self.timestamps.iter().enumerate() {
            let mut rec = vec![ts.to_rfc3339()];
            rec.extend(self.columns.iter().map(|c| c.values[r].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
