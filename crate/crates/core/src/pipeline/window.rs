use std::ops::Range;

use chrono::{DateTime, Utc};

use super::normalize::NormalizationParams;
use super::table::TimeSeriesTable;
use crate::error::{Error, Result};

/// Fixed-length input windows paired with the next-step target value.
///
/// Inputs are stored flat as `n_samples x window_length x n_features`,
/// time-major within a window, so `window(i)` is directly usable as a
/// feature vector by the kernel and tree models.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedWindowSet {
    inputs: Vec<f64>,
    targets: Vec<f64>,
    target_rows: Vec<usize>,
    target_times: Vec<DateTime<Utc>>,
    feature_names: Vec<String>,
    target_name: String,
    norm: Option<NormalizationParams>,
    window_length: usize,
}

impl SupervisedWindowSet {
    /// Builds a window set from raw parts; used for hand-made datasets.
    pub fn from_parts(
        inputs: Vec<f64>,
        targets: Vec<f64>,
        feature_names: Vec<String>,
        target_name: String,
        window_length: usize,
    ) -> Result<Self> {
        let d = feature_names.len();
        if window_length == 0 || d == 0 {
            return Err(Error::Dimension("empty window or feature list".into()));
        }
        if inputs.len() != targets.len() * window_length * d {
            return Err(Error::Dimension(format!(
                "{} inputs for {} samples of {window_length}x{d}",
                inputs.len(),
                targets.len()
            )));
        }
        let n = targets.len();
        Ok(SupervisedWindowSet {
            inputs,
            targets,
            target_rows: (window_length..window_length + n).collect(),
            target_times: Vec::new(),
            feature_names,
            target_name,
            norm: None,
            window_length,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Length of a flattened window.
    pub fn flat_dim(&self) -> usize {
        self.window_length * self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn norm(&self) -> Option<&NormalizationParams> {
        self.norm.as_ref()
    }

    pub fn with_norm(mut self, norm: NormalizationParams) -> Self {
        self.norm = Some(norm);
        self
    }

    /// Sample `i` as a flat `window_length * n_features` slice.
    pub fn window(&self, i: usize) -> &[f64] {
        let k = self.flat_dim();
        &self.inputs[i * k..(i + 1) * k]
    }

    pub fn windows(&self) -> impl Iterator<Item = &[f64]> {
        self.inputs.chunks_exact(self.flat_dim())
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Table row index that each target was read from.
    pub fn target_rows(&self) -> &[usize] {
        &self.target_rows
    }

    pub fn target_times(&self) -> &[DateTime<Utc>] {
        &self.target_times
    }

    /// Contiguous sub-range of samples.
    pub fn subset(&self, range: Range<usize>) -> SupervisedWindowSet {
        let k = self.flat_dim();
        SupervisedWindowSet {
            inputs: self.inputs[range.start * k..range.end * k].to_vec(),
            targets: self.targets[range.clone()].to_vec(),
            target_rows: self.target_rows[range.clone()].to_vec(),
            target_times: if self.target_times.is_empty() {
                Vec::new()
            } else {
                self.target_times[range].to_vec()
            },
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            norm: self.norm.clone(),
            window_length: self.window_length,
        }
    }
}

/// Slides a window over every column of `table`: sample `i` reads rows
/// `[i, i + window_length)` and targets `target_column` at row
/// `i + window_length`.
pub fn make_windows(table: &TimeSeriesTable, target_column: &str, window_length: usize) -> Result<SupervisedWindowSet> {
    if window_length == 0 {
        return Err(Error::Config("window length must be positive".into()));
    }
    if window_length >= table.len() {
        return Err(Error::InsufficientData(format!(
            "window length {window_length} needs more than {} rows",
            table.len()
        )));
    }
    if !table.is_contiguous() {
        return Err(Error::InsufficientData("windowing needs a gap-free series".into()));
    }
    let target = table.column(target_column)?;
    let d = table.columns().len();
    let n = table.len() - window_length;
    let rows: Vec<Vec<f64>> = (0..table.len()).map(|r| table.row(r)).collect();
    let mut inputs = Vec::with_capacity(n * window_length * d);
    for i in 0..n {
        for row in &rows[i..i + window_length] {
            inputs.extend_from_slice(row);
        }
    }
    Ok(SupervisedWindowSet {
        inputs,
        targets: target[window_length..].to_vec(),
        target_rows: (window_length..table.len()).collect(),
        target_times: table.timestamps()[window_length..].to_vec(),
        feature_names: table.columns().iter().map(|c| c.name.clone()).collect(),
        target_name: target_column.to_string(),
        norm: None,
        window_length,
    })
}
