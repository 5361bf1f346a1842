use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::MetricSelection;
use crate::error::{Error, Result};
use crate::metrics::{MetricsReport, Variant};
use crate::pipeline::{FeatureRange, SplitCounts};
use crate::synth::Scenario;
use crate::tuning::{Assignment, Family};

/// Test-set results for one model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub family: Family,
    pub hyperparameters: Assignment,
    pub window_length: usize,
    pub validation_metric: f64,
    pub metrics: Vec<MetricsReport>,
    /// Normalized one-step predictions, aligned with the test targets.
    pub predictions: Vec<f64>,
}

impl ModelReport {
    pub fn metric(&self, variant: Variant) -> Option<&MetricsReport> {
        self.metrics.iter().find(|m| m.variant == variant)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub scenario: Scenario,
    pub target: String,
    pub window_length: usize,
    pub counts: SplitCounts,
    /// Min-max range of the target, fitted on the training rows.
    pub target_range: FeatureRange,
    /// RFC 3339 times of the test targets.
    pub timestamps: Vec<String>,
    /// Normalized test targets.
    pub actual: Vec<f64>,
    pub models: Vec<ModelReport>,
}

impl DatasetReport {
    pub fn model(&self, family: Family) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.family == family)
    }

    /// Fails unless every model carries every selected metric variant and a
    /// full prediction series.
    pub fn check_complete(&self, selection: MetricSelection) -> Result<()> {
        for family in Family::ALL {
            let m = self
                .model(family)
                .ok_or_else(|| Error::IncompleteReport(format!("{}: no {family} results", self.scenario)))?;
            if m.predictions.len() != self.actual.len() {
                return Err(Error::IncompleteReport(format!(
                    "{}: {family} has {} predictions for {} test steps",
                    self.scenario,
                    m.predictions.len(),
                    self.actual.len()
                )));
            }
            for v in selection.variants() {
                if m.metric(*v).is_none() {
                    return Err(Error::IncompleteReport(format!(
                        "{}: {family} lacks {v:?} metrics",
                        self.scenario
                    )));
                }
            }
        }
        if self.timestamps.len() != self.actual.len() {
            return Err(Error::IncompleteReport("timestamps misaligned with targets".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub metric: MetricSelection,
    pub datasets: Vec<DatasetReport>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn dataset(&self, scenario: Scenario) -> Option<&DatasetReport> {
        self.datasets.iter().find(|d| d.scenario == scenario)
    }
}

/// Column heading of a dataset group.
pub fn group_title(scenario: Scenario) -> &'static str {
    match scenario {
        Scenario::TomatoYield => "Tomato Yield",
        Scenario::FicusSdv => "Ficus Growth(SDV)",
    }
}

/// Model order within a group.
pub const TABLE_MODELS: [Family; 3] = [Family::Svr, Family::Rf, Family::Lstm];
pub const TABLE_METRICS: [&str; 3] = ["MSE", "RMSE", "MAE"];

fn model_label(f: Family) -> &'static str {
    match f {
        Family::Svr => "SVR",
        Family::Rf => "RF",
        Family::Lstm => "LSTM",
    }
}

/// One dataset group: its name and (model, [MSE, RMSE, MAE]) rows.
pub type TableGroup = (String, Vec<(String, [f64; 3])>);

/// Parsed comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub title: Option<String>,
    pub groups: Vec<TableGroup>,
}

impl ComparisonTable {
    pub fn value(&self, group: &str, model: &str, metric: &str) -> Option<f64> {
        let k = TABLE_METRICS.iter().position(|m| *m == metric)?;
        let (_, rows) = self.groups.iter().find(|(g, _)| g == group)?;
        rows.iter().find(|(m, _)| m == model).map(|(_, v)| v[k])
    }
}

/// Renders one tab-separated table per selected variant: a `Datasets` row of
/// group names, a row of model names, then MSE, RMSE and MAE rows. Tomato
/// precedes Ficus when both are present.
pub fn render_table(report: &ExperimentReport) -> Result<String> {
    let mut groups: Vec<&DatasetReport> = report.datasets.iter().collect();
    groups.sort_by_key(|d| match d.scenario {
        Scenario::TomatoYield => 0,
        Scenario::FicusSdv => 1,
    });
    let mut out = String::new();
    for (i, variant) in report.metric.variants().iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let name = match variant {
            Variant::Relative => "relative",
            Variant::Absolute => "absolute",
        };
        out.push_str(&format!("Variant: {name}\n"));
        out.push_str("Datasets");
        for d in &groups {
            out.push_str(&format!("\t{}\t\t", group_title(d.scenario)));
        }
        out.push('\n');
        for _ in &groups {
            for f in TABLE_MODELS {
                out.push('\t');
                out.push_str(model_label(f));
            }
        }
        out.push('\n');
        for (k, metric) in TABLE_METRICS.iter().enumerate() {
            out.push_str(metric);
            for d in &groups {
                for f in TABLE_MODELS {
                    let m = d
                        .model(f)
                        .and_then(|m| m.metric(*variant))
                        .ok_or_else(|| Error::IncompleteReport(format!("{}: {f} {name}", d.scenario)))?;
                    let v = [m.mse, m.rmse, m.mae][k];
                    out.push_str(&format!("\t{v:.3}"));
                }
            }
            out.push('\n');
        }
    }
    Ok(out)
}

/// Parses tables in the layout [`render_table`] writes. A `Variant:` line
/// before a table is optional.
pub fn parse_tables(text: &str) -> Result<Vec<ComparisonTable>> {
    let bad = |msg: &str| Error::Parse(format!("comparison table: {msg}"));
    let mut lines = text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty())
        .peekable();
    let mut tables = Vec::new();
    while let Some(line) = lines.next() {
        let title = line.strip_prefix("Variant:").map(|t| t.trim().to_string());
        let header = if title.is_some() {
            lines.next().ok_or_else(|| bad("title without table"))?
        } else {
            line
        };
        let mut cells = header.split('\t');
        if cells.next().map(str::trim) != Some("Datasets") {
            return Err(bad(&format!("expected `Datasets` row, got `{header}`")));
        }
        let names: Vec<String> = cells
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(String::from)
            .collect();
        if names.is_empty() {
            return Err(bad("no dataset groups"));
        }
        let models_line = lines.next().ok_or_else(|| bad("missing model row"))?;
        let models: Vec<String> = models_line.split('\t').skip(1).map(|c| c.trim().to_string()).collect();
        if models.len() != 3 * names.len() {
            return Err(bad(&format!(
                "{} model columns for {} groups",
                models.len(),
                names.len()
            )));
        }
        let mut values = vec![[0.0; 3]; models.len()];
        for (k, metric) in TABLE_METRICS.iter().enumerate() {
            let row = lines.next().ok_or_else(|| bad(&format!("missing {metric} row")))?;
            let mut cells = row.split('\t');
            if cells.next().map(str::trim) != Some(*metric) {
                return Err(bad(&format!("expected {metric} row, got `{row}`")));
            }
            let nums: Vec<f64> = cells
                .map(|c| c.trim().parse::<f64>().map_err(|_| bad(&format!("bad number `{c}`"))))
                .collect::<Result<_>>()?;
            if nums.len() != models.len() {
                return Err(bad(&format!("{metric} row has {} values", nums.len())));
            }
            for (j, v) in nums.into_iter().enumerate() {
                values[j][k] = v;
            }
        }
        let groups = names
            .into_iter()
            .enumerate()
            .map(|(g, name)| {
                let rows = (0..3).map(|j| (models[3 * g + j].clone(), values[3 * g + j])).collect();
                (name, rows)
            })
            .collect();
        tables.push(ComparisonTable { title, groups });
    }
    if tables.is_empty() {
        return Err(bad("no table found"));
    }
    Ok(tables)
}

/// Writes the test-set overlay: timestamp, actual and each model's
/// prediction, all in the target's original units.
pub fn emit_overlay<W: Write>(report: &DatasetReport, writer: W) -> Result<()> {
    let preds = [Family::Lstm, Family::Svr, Family::Rf]
        .iter()
        .map(|&f| {
            report
                .model(f)
                .filter(|m| m.predictions.len() == report.actual.len())
                .map(|m| &m.predictions)
                .ok_or_else(|| Error::IncompleteReport(format!("no aligned {f} predictions")))
        })
        .collect::<Result<Vec<_>>>()?;
    if report.timestamps.len() != report.actual.len() {
        return Err(Error::IncompleteReport("timestamps misaligned with targets".into()));
    }
    let r = &report.target_range;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "actual", "pred_lstm", "pred_svr", "pred_rf"])?;
    for (i, t) in report.timestamps.iter().enumerate() {
        w.write_record([
            t.clone(),
            r.denormalize(report.actual[i]).to_string(),
            r.denormalize(preds[0][i]).to_string(),
            r.denormalize(preds[1][i]).to_string(),
            r.denormalize(preds[2][i]).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics;

    fn model(family: Family, preds: Vec<f64>, actual: &[f64]) -> ModelReport {
        ModelReport {
            family,
            hyperparameters: Assignment::new(),
            window_length: 2,
            validation_metric: 0.1,
            metrics: vec![
                metrics::report(Variant::Relative, actual, &preds).unwrap(),
                metrics::report(Variant::Absolute, actual, &preds).unwrap(),
            ],
            predictions: preds,
        }
    }

    fn dataset(scenario: Scenario) -> DatasetReport {
        let actual = vec![0.5, 0.25, 1.0];
        DatasetReport {
            scenario,
            target: "y".into(),
            window_length: 2,
            counts: SplitCounts {
                train: 6,
                validation: 1,
                test: 3,
            },
            target_range: FeatureRange {
                name: "y".into(),
                min: 10.0,
                max: 14.0,
            },
            timestamps: vec!["a".into(), "b".into(), "c".into()],
            models: vec![
                model(Family::Lstm, vec![0.5, 0.3, 1.0], &actual),
                model(Family::Svr, vec![0.4, 0.3, 0.9], &actual),
                model(Family::Rf, vec![0.6, 0.2, 0.8], &actual),
            ],
            actual,
        }
    }

    #[test]
    fn table_round_trips() {
        let report = ExperimentReport {
            seed: 0,
            metric: MetricSelection::Both,
            datasets: vec![dataset(Scenario::FicusSdv), dataset(Scenario::TomatoYield)],
        };
        let text = render_table(&report).unwrap();
        let tables = parse_tables(&text).unwrap();
        assert_eq!(tables.len(), 2);
        assert_eq!(tables[0].title.as_deref(), Some("relative"));
        let names: Vec<&str> = tables[0].groups.iter().map(|(g, _)| g.as_str()).collect();
        assert_eq!(names, ["Tomato Yield", "Ficus Growth(SDV)"]);
        let rf = report.datasets[0]
            .model(Family::Rf)
            .unwrap()
            .metric(Variant::Absolute)
            .unwrap();
        let parsed = tables[1].value("Ficus Growth(SDV)", "RF", "MAE").unwrap();
        assert!((parsed - rf.mae).abs() <= 5e-4);
    }

    #[test]
    fn incomplete_reports_rejected() {
        let mut d = dataset(Scenario::FicusSdv);
        d.check_complete(MetricSelection::Both).unwrap();
        d.models[1].metrics.pop();
        assert!(matches!(
            d.check_complete(MetricSelection::Both),
            Err(Error::IncompleteReport(_))
        ));
        d.models.pop();
        assert!(matches!(emit_overlay(&d, Vec::new()), Err(Error::IncompleteReport(_))));
    }

    #[test]
    fn overlay_denormalizes() {
        let d = dataset(Scenario::TomatoYield);
        let mut buf = Vec::new();
        emit_overlay(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "timestamp,actual,pred_lstm,pred_svr,pred_rf");
        assert_eq!(lines[1], "a,12,12,11.6,12.4");
    }

    #[test]
    fn malformed_tables() {
        assert!(parse_tables("").is_err());
        assert!(parse_tables("Datasets\tA\t\t\n\tSVR\tRF\tLSTM\nMSE\t1\t2\n").is_err());
        assert!(parse_tables("Nope\tA\n").is_err());
    }
}
