//! Exhaustive grid search selected on a validation metric.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Lstm,
    Svr,
    Rf,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Lstm, Family::Svr, Family::Rf];

    pub fn name(self) -> &'static str {
        match self {
            Family::Lstm => "lstm",
            Family::Svr => "svr",
            Family::Rf => "rf",
        }
    }

    /// Hyperparameters a grid for this family may vary.
    pub fn axis_names(self) -> &'static [&'static str] {
        match self {
            Family::Lstm => &["epochs", "hidden_dim", "learning_rate", "window_length"],
            Family::Svr => &["C", "epsilon", "gamma"],
            Family::Rf => &["max_depth", "n_trees"],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lstm" => Ok(Family::Lstm),
            "svr" => Ok(Family::Svr),
            "rf" => Ok(Family::Rf),
            other => Err(Error::Config(format!("unknown model family `{other}`"))),
        }
    }
}

/// A hyperparameter candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Num(f64),
    /// Only meaningful for `max_depth`.
    Unlimited(Unlimited),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unlimited {
    Unlimited,
}

impl ParamValue {
    pub const UNLIMITED: ParamValue = ParamValue::Unlimited(Unlimited::Unlimited);

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Num(v) => Some(*v),
            ParamValue::Unlimited(_) => None,
        }
    }

    /// Positive integer view; `None` for `unlimited`.
    pub fn as_count(&self, name: &str) -> Result<Option<usize>> {
        match self {
            ParamValue::Unlimited(_) => Ok(None),
            ParamValue::Num(v) if *v >= 0.0 && v.fract() == 0.0 && v.is_finite() => Ok(Some(*v as usize)),
            ParamValue::Num(v) => Err(Error::Config(format!("`{name}` needs an integer, got {v}"))),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Num(v) => write!(f, "{v}"),
            ParamValue::Unlimited(_) => f.write_str("unlimited"),
        }
    }
}

impl FromStr for ParamValue {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("unlimited") || s.eq_ignore_ascii_case("none") {
            return Ok(ParamValue::UNLIMITED);
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(ParamValue::Num)
            .ok_or_else(|| Error::Config(format!("bad hyperparameter value `{s}`")))
    }
}

/// One cell of a grid: hyperparameter name to value, ordered by name.
pub type Assignment = BTreeMap<String, ParamValue>;

pub fn format_assignment(a: &Assignment) -> String {
    a.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub family: Family,
    /// Axes enumerate in name order, the last axis varying fastest.
    pub axes: BTreeMap<String, Vec<ParamValue>>,
}

impl GridSpec {
    pub fn new(family: Family) -> Self {
        GridSpec {
            family,
            axes: BTreeMap::new(),
        }
    }

    pub fn axis(mut self, name: &str, values: Vec<ParamValue>) -> Self {
        self.axes.insert(name.to_string(), values);
        self
    }

    pub fn nums(self, name: &str, values: &[f64]) -> Self {
        self.axis(name, values.iter().copied().map(ParamValue::Num).collect())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, values) in &self.axes {
            if !self.family.axis_names().contains(&name.as_str()) {
                return Err(Error::Config(format!(
                    "`{name}` is not a {} hyperparameter (expected one of {:?})",
                    self.family,
                    self.family.axis_names()
                )));
            }
            if values.is_empty() {
                return Err(Error::Config(format!("axis `{name}` has no candidates")));
            }
            if name != "max_depth" && values.iter().any(|v| v.as_f64().is_none()) {
                return Err(Error::Config(format!("`{name}` cannot be unlimited")));
            }
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.axes.values().map(Vec::len).product()
    }

    /// Every cell, in enumeration order.
    pub fn cells(&self) -> Vec<Assignment> {
        let mut out = vec![Assignment::new()];
        for (name, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |v| {
                        let mut a = prefix.clone();
                        a.insert(name.clone(), *v);
                        a
                    })
                })
                .collect();
        }
        out
    }
}

/// Scores one trained configuration reports back to the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialScores {
    pub train_metric: f64,
    pub validation_metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub index: usize,
    pub config: Assignment,
    pub validation_metric: f64,
    pub train_metric: f64,
    pub rank: usize,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
    pub error: Option<String>,
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        f64::deserialize(d).map(Duration::from_secs_f64)
    }
}

/// SplitMix64 step over `(seed, index)`, giving each trial its own seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Outcome of a sweep: the winning cell, its trained model and every trial
/// in enumeration order.
#[derive(Debug, Clone)]
pub struct SearchOutcome<M> {
    pub best: Assignment,
    pub best_model: M,
    pub trials: Vec<TrialResult>,
}

/// Trains and scores every grid cell.
///
/// Cells run concurrently. A cell whose evaluator fails, or that reports a
/// non-finite validation metric, is recorded with an infinite metric and
/// does not stop the sweep. Ties go to the earliest cell.
pub fn grid_search<M, F>(grid: &GridSpec, seed: u64, evaluate: F) -> Result<SearchOutcome<M>>
where
    M: Send,
    F: Fn(&Assignment, u64) -> Result<(TrialScores, M)> + Sync,
{
    grid.validate()?;
    let cells = grid.cells();
    let results: Vec<(TrialResult, Option<M>)> = cells
        .into_par_iter()
        .enumerate()
        .map(|(index, config)| {
            let start = Instant::now();
            let outcome = evaluate(&config, derive_seed(seed, index as u64));
            let wall_time = start.elapsed();
            let (train_metric, validation_metric, error, model) = match outcome {
                Ok((s, m)) if s.validation_metric.is_finite() => (s.train_metric, s.validation_metric, None, Some(m)),
                Ok((s, _)) => (
                    s.train_metric,
                    f64::INFINITY,
                    Some("non-finite validation metric".into()),
                    None,
                ),
                Err(e) => (f64::INFINITY, f64::INFINITY, Some(e.to_string()), None),
            };
            if let Some(e) = &error {
                warn!(
                    "{} trial {index} ({}) failed: {e}",
                    grid.family,
                    format_assignment(&config)
                );
            }
            let trial = TrialResult {
                index,
                config,
                validation_metric,
                train_metric,
                rank: 0,
                wall_time,
                error,
            };
            (trial, model)
        })
        .collect();
    let (mut trials, mut models): (Vec<TrialResult>, Vec<Option<M>>) = results.into_iter().unzip();

    let mut order: Vec<usize> = (0..trials.len()).collect();
    order.sort_by(|&a, &b| {
        trials[a]
            .validation_metric
            .total_cmp(&trials[b].validation_metric)
            .then(a.cmp(&b))
    });
    for (rank, &i) in order.iter().enumerate() {
        trials[i].rank = rank + 1;
    }
    let winner = order[0];
    match models[winner].take() {
        Some(best_model) => Ok(SearchOutcome {
            best: trials[winner].config.clone(),
            best_model,
            trials,
        }),
        None => Err(Error::NoViableConfig(trials.len())),
    }
}

/// Trials sorted by rank.
pub fn leaderboard(trials: &[TrialResult]) -> Vec<&TrialResult> {
    let mut v: Vec<&TrialResult> = trials.iter().collect();
    v.sort_by_key(|t| t.rank);
    v
}

/// One CSV row per trial, best first: config columns, metrics, rank and
/// wall time.
pub fn write_leaderboard<W: Write>(grid: &GridSpec, trials: &[TrialResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = grid.axes.keys().cloned().collect();
    header.extend(
        ["validation_metric", "train_metric", "rank", "wall_time_s", "error"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&header)?;
    for t in leaderboard(trials) {
        let mut row: Vec<String> = grid
            .axes
            .keys()
            .map(|k| t.config.get(k).map(ToString::to_string).unwrap_or_default())
            .collect();
        row.push(t.validation_metric.to_string());
        row.push(t.train_metric.to_string());
        row.push(t.rank.to_string());
        row.push(format!("{:.6}", t.wall_time.as_secs_f64()));
        row.push(t.error.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
