use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::normalize::NormalizationParams;
use super::split::{SplitCounts, SplitSpec};
use super::table::{Interval, TimeSeriesTable};
use super::window::{make_windows, SupervisedWindowSet};
use crate::error::{Error, Result};

/// Model-ready dataset: a normalized table plus its windowed partitions.
///
/// Partition boundaries are kept in terms of target rows, so the same
/// chronological split can be re-applied to a different window length.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub table: TimeSeriesTable,
    pub norm: NormalizationParams,
    pub target: String,
    pub window_length: usize,
    pub counts: SplitCounts,
    pub train: SupervisedWindowSet,
    pub validation: SupervisedWindowSet,
    pub test: SupervisedWindowSet,
    /// First target row of the validation and test blocks.
    validation_start: usize,
    test_start: usize,
}

/// Sidecar describing a written dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub interval: Interval,
    pub feature_names: Vec<String>,
    pub target: String,
    pub window_length: usize,
    pub normalization: NormalizationParams,
    pub rows: usize,
    pub samples: usize,
    /// Half-open sample index ranges.
    pub train: [usize; 2],
    pub validation: [usize; 2],
    pub test: [usize; 2],
}

impl PreparedDataset {
    /// Splits, normalizes and windows `table`.
    ///
    /// Min-max ranges are fitted on the rows read by training samples only
    /// (inputs and targets), then applied to the whole table.
    pub fn prepare(table: &TimeSeriesTable, target: &str, window_length: usize, spec: &SplitSpec) -> Result<Self> {
        table.column(target)?;
        if window_length == 0 {
            return Err(Error::Config("window length must be positive".into()));
        }
        if window_length >= table.len() {
            return Err(Error::InsufficientData(format!(
                "window length {window_length} needs more than {} rows",
                table.len()
            )));
        }
        let n = table.len() - window_length;
        let counts = spec.counts(n)?;
        let train_rows = window_length + counts.train;
        let norm = NormalizationParams::fit(&table.slice_rows(0, train_rows))?;
        let normalized = norm.apply(table)?;
        let validation_start = train_rows;
        let test_start = validation_start + counts.validation;
        Self::assemble(normalized, norm, target, window_length, validation_start, test_start)
    }

    fn assemble(
        table: TimeSeriesTable,
        norm: NormalizationParams,
        target: &str,
        window_length: usize,
        validation_start: usize,
        test_start: usize,
    ) -> Result<Self> {
        let all = make_windows(&table, target, window_length)?.with_norm(norm.clone());
        let rows = all.target_rows();
        let a = rows.partition_point(|&r| r < validation_start);
        let b = rows.partition_point(|&r| r < test_start);
        let counts = SplitCounts {
            train: a,
            validation: b - a,
            test: all.len() - b,
        };
        Ok(PreparedDataset {
            train: all.subset(0..a),
            validation: all.subset(a..b),
            test: all.subset(b..all.len()),
            table,
            norm,
            target: target.to_string(),
            window_length,
            counts,
            validation_start,
            test_start,
        })
    }

    /// The same split re-windowed at another length. Samples are assigned by
    /// their target row, so validation and test targets are unchanged while
    /// the train block gains or loses samples at its start.
    pub fn with_window_length(&self, window_length: usize) -> Result<Self> {
        if window_length == self.window_length {
            return Ok(self.clone());
        }
        if window_length >= self.validation_start {
            return Err(Error::InsufficientData(format!(
                "window length {window_length} leaves no training sample"
            )));
        }
        Self::assemble(
            self.table.clone(),
            self.norm.clone(),
            &self.target,
            window_length,
            self.validation_start,
            self.test_start,
        )
    }

    pub fn target_range(&self) -> Result<&super::normalize::FeatureRange> {
        self.norm.feature(&self.target)
    }

    pub fn manifest(&self) -> DatasetManifest {
        let (a, b) = (self.counts.train, self.counts.train + self.counts.validation);
        let n = b + self.counts.test;
        DatasetManifest {
            interval: self.table.interval(),
            feature_names: self.table.columns().iter().map(|c| c.name.clone()).collect(),
            target: self.target.clone(),
            window_length: self.window_length,
            normalization: self.norm.clone(),
            rows: self.table.len(),
            samples: n,
            train: [0, a],
            validation: [a, b],
            test: [b, n],
        }
    }

    /// Writes `<stem>.csv` (normalized table) and `<stem>.json` (manifest).
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.table
            .write_csv(BufWriter::new(File::create(dir.join(format!("{stem}.csv")))?))?;
        let json = serde_json::to_string_pretty(&self.manifest())?;
        std::fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::table::Column;
    use chrono::{Duration, TimeZone, Utc};

    fn ramp(n: usize) -> TimeSeriesTable {
        let t0 = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
        TimeSeriesTable::new(
            (0..n).map(|d| t0 + Duration::days(d as i64)).collect(),
            vec![
                Column {
                    name: "x".into(),
                    values: (0..n).map(|i| (i as f64 * 0.7).sin()).collect(),
                },
                Column {
                    name: "y".into(),
                    values: (0..n).map(|i| i as f64).collect(),
                },
            ],
            Interval::Daily,
        )
        .unwrap()
    }

    #[test]
    fn normalization_sees_training_rows_only() {
        let d = PreparedDataset::prepare(&ramp(107), "y", 7, &SplitSpec::default()).unwrap();
        assert_eq!((d.counts.train, d.counts.validation, d.counts.test), (60, 15, 25));
        let y = d.norm.feature("y").unwrap();
        // training targets stop at row 7 + 59 = 66
        assert_eq!((y.min, y.max), (0.0, 66.0));
        assert!(d.test.targets().iter().all(|&t| t > 1.0));
    }

    #[test]
    fn changing_data_after_training_rows_leaves_norm_unchanged() {
        let base = ramp(107);
        let mut cols = base.columns().to_vec();
        for v in &mut cols[1].values[67..] {
            *v *= 100.0;
        }
        let poked = TimeSeriesTable::new(base.timestamps().to_vec(), cols, Interval::Daily).unwrap();
        let a = PreparedDataset::prepare(&base, "y", 7, &SplitSpec::default()).unwrap();
        let b = PreparedDataset::prepare(&poked, "y", 7, &SplitSpec::default()).unwrap();
        assert_eq!(a.norm, b.norm);
        assert_eq!(a.train, b.train);
    }

    #[test]
    fn rewindowing_keeps_evaluation_targets() {
        let d = PreparedDataset::prepare(&ramp(107), "y", 7, &SplitSpec::default()).unwrap();
        let d1 = d.with_window_length(1).unwrap();
        assert_eq!(d1.test.targets(), d.test.targets());
        assert_eq!(d1.validation.targets(), d.validation.targets());
        assert_eq!(d1.train.len(), d.train.len() + 6);
    }
}
