//! End-to-end comparison runs: data, tuning, test evaluation and reports.

mod config;
mod report;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::info;

pub use config::{
    default_grids, default_target, parse_pairs, DataSource, ExperimentConfig, MetricSelection, DOCUMENTED_KEYS,
};
pub use report::{
    emit_overlay, group_title, parse_tables, render_table, ComparisonTable, DatasetReport, ExperimentReport,
    ModelReport, TableGroup, TABLE_METRICS, TABLE_MODELS,
};

use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{self, SavedModel};
use crate::pipeline::{
    derive_sdv_column, ingest, interpolate_weekly_to_daily, resample_daily_mean, Interval, PreparedDataset, Schema,
    SupervisedWindowSet, TimeSeriesTable,
};
use crate::synth::{self, Scenario, ENVIRONMENT_COLUMNS};
use crate::tuning::{self, Family, SearchOutcome, TrialResult, TrialScores};

/// Ordered log of which data partitions each stage read.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Trace {
    lines: Vec<String>,
}

impl Trace {
    pub fn record(&mut self, stage: &str, partition: &str) {
        self.lines.push(format!("stage={stage} read={partition}"));
    }

    pub fn note(&mut self, stage: &str, what: &str) {
        self.lines.push(format!("stage={stage} {what}"));
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.lines.join("\n") + "\n")?;
        Ok(())
    }

    pub fn append(&self, path: &Path) -> Result<()> {
        use std::io::Write;
        let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
        f.write_all((self.lines.join("\n") + "\n").as_bytes())?;
        Ok(())
    }
}

/// Model partitions with reads recorded to a [`Trace`].
pub struct Partitions<'a> {
    dataset: &'a PreparedDataset,
    trace: &'a mut Trace,
}

impl<'a> Partitions<'a> {
    pub fn new(dataset: &'a PreparedDataset, trace: &'a mut Trace) -> Self {
        Partitions { dataset, trace }
    }

    pub fn train(&mut self, stage: &str) -> &'a SupervisedWindowSet {
        self.trace.record(stage, "train");
        &self.dataset.train
    }

    pub fn validation(&mut self, stage: &str) -> &'a SupervisedWindowSet {
        self.trace.record(stage, "validation");
        &self.dataset.validation
    }

    pub fn test(&mut self, stage: &str) -> &'a SupervisedWindowSet {
        self.trace.record(stage, "test");
        &self.dataset.test
    }
}

fn read_csv(path: &Path, columns: &[&str], interval: Interval) -> Result<TimeSeriesTable> {
    if !path.exists() {
        return Err(Error::Config(format!("data file {} does not exist", path.display())));
    }
    ingest(File::open(path)?, &Schema::new(columns, interval))
}

/// Hourly and optional weekly tables for the configured source.
pub fn load_raw(cfg: &ExperimentConfig) -> Result<(TimeSeriesTable, Option<TimeSeriesTable>)> {
    match &cfg.source {
        DataSource::Synth(s) => {
            let data = synth::generate(s).map_err(|e| e.in_stage("synth"))?;
            Ok((data.hourly, data.weekly))
        }
        DataSource::Files { hourly, weekly } => {
            let mut cols: Vec<&str> = ENVIRONMENT_COLUMNS.to_vec();
            if cfg.scenario == Scenario::FicusSdv {
                cols.push("stem_diameter");
            }
            let h = read_csv(hourly, &cols, Interval::Hourly).map_err(|e| e.in_stage("ingest"))?;
            let w = weekly
                .as_ref()
                .map(|p| read_csv(p, &["yield"], Interval::Weekly))
                .transpose()
                .map_err(|e| e.in_stage("ingest"))?;
            Ok((h, w))
        }
    }
}

/// The cleaned, resampled table models are built from (unnormalized).
///
/// Ficus: hourly climate with the stem diameter replaced by its hourly
/// variation `sdv`. Tomato: daily climate means joined with the weekly
/// yield interpolated to days.
pub fn model_table(cfg: &ExperimentConfig) -> Result<TimeSeriesTable> {
    let (hourly, weekly) = load_raw(cfg)?;
    match cfg.scenario {
        Scenario::FicusSdv => derive_sdv_column(&hourly, "stem_diameter", "sdv").map_err(|e| e.in_stage("resample")),
        Scenario::TomatoYield => {
            let weekly = weekly.ok_or_else(|| Error::Config("tomato_yield needs weekly yield data".into()))?;
            let daily = resample_daily_mean(&hourly).map_err(|e| e.in_stage("resample"))?;
            let yield_daily = interpolate_weekly_to_daily(&weekly).map_err(|e| e.in_stage("interpolate"))?;
            daily.join(&yield_daily).map_err(|e| e.in_stage("join"))
        }
    }
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<PreparedDataset> {
    let table = model_table(cfg)?;
    PreparedDataset::prepare(&table, &cfg.target, cfg.window_length, &cfg.split).map_err(|e| e.in_stage("window"))
}

/// Winner of one family's grid search.
pub struct Selection {
    pub family: Family,
    pub saved: SavedModel,
    pub trials: Vec<TrialResult>,
}

/// Tunes each family on train, selecting by validation relative MSE.
/// Never touches the test partition.
pub fn tune_all(cfg: &ExperimentConfig, dataset: &PreparedDataset, trace: &mut Trace) -> Result<Vec<Selection>> {
    let mut out = Vec::new();
    for family in Family::ALL {
        let grid = cfg.grid(family);
        let stage = format!("tune:{family}");
        {
            let mut parts = Partitions::new(dataset, trace);
            parts.train(&stage);
            parts.validation(&stage);
        }
        info!("{}: tuning {family} over {} cells", cfg.scenario, grid.n_cells());
        let outcome: SearchOutcome<SavedModel> = tuning::grid_search(&grid, cfg.seed, |a, seed| {
            let w = match a.get("window_length") {
                Some(v) => v.as_count("window_length")?.unwrap_or(cfg.window_length),
                None => cfg.window_length,
            };
            let ds = dataset.with_window_length(w)?;
            let fitted = model::fit(family, a, &cfg.defaults, &ds.train, &ds.validation, seed)?;
            let train_metric = metrics::relative_mse(ds.train.targets(), &fitted.predict_set(&ds.train)?)?;
            let validation_metric =
                metrics::relative_mse(ds.validation.targets(), &fitted.predict_set(&ds.validation)?)?;
            let saved = SavedModel {
                window_length: w,
                hyperparameters: a.clone(),
                validation_metric,
                model: fitted,
            };
            Ok((
                TrialScores {
                    train_metric,
                    validation_metric,
                },
                saved,
            ))
        })
        .map_err(|e| e.in_stage("tune"))?;
        trace.note(
            &stage,
            &format!("selected {}", tuning::format_assignment(&outcome.best)),
        );
        out.push(Selection {
            family,
            saved: outcome.best_model,
            trials: outcome.trials,
        });
    }
    Ok(out)
}

/// Scores the selected models on the test partition.
pub fn evaluate(
    cfg: &ExperimentConfig,
    dataset: &PreparedDataset,
    selections: &[SavedModel],
    trace: &mut Trace,
) -> Result<DatasetReport> {
    let stage = "evaluate";
    let test = Partitions::new(dataset, trace).test(stage);
    let mut models = Vec::new();
    for saved in selections {
        let ds = dataset
            .with_window_length(saved.window_length)
            .map_err(|e| e.in_stage(stage))?;
        if ds.test.target_rows() != test.target_rows() {
            return Err(Error::Dimension("test targets moved with the window length".into()).in_stage(stage));
        }
        let predictions = saved.model.predict_set(&ds.test).map_err(|e| e.in_stage(stage))?;
        let metrics = cfg
            .metric
            .variants()
            .iter()
            .map(|v| metrics::report(*v, test.targets(), &predictions))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_stage(stage))?;
        models.push(ModelReport {
            family: saved.model.family(),
            hyperparameters: saved.hyperparameters.clone(),
            window_length: saved.window_length,
            validation_metric: saved.validation_metric,
            metrics,
            predictions,
        });
    }
    let report = DatasetReport {
        scenario: cfg.scenario,
        target: cfg.target.clone(),
        window_length: cfg.window_length,
        counts: dataset.counts,
        target_range: dataset.target_range()?.clone(),
        timestamps: test.target_times().iter().map(|t| t.to_rfc3339()).collect(),
        actual: test.targets().to_vec(),
        models,
    };
    report.check_complete(cfg.metric)?;
    Ok(report)
}

/// Directory holding one scenario's artifacts.
pub fn scenario_dir(out: &Path, scenario: Scenario) -> PathBuf {
    out.join(scenario.name())
}

/// Runs the full protocol for one dataset, writing leaderboards, models,
/// the dataset manifest, the overlay and the trace under
/// `<out>/<scenario>/`.
pub fn run_dataset(cfg: &ExperimentConfig) -> Result<DatasetReport> {
    cfg.validate()?;
    let dir = scenario_dir(&cfg.out_dir, cfg.scenario);
    let mut trace = Trace::default();
    let dataset = prepare(cfg)?;
    write_manifest(&dataset, &dir)?;
    let models = train_and_save(cfg, &dataset, &dir, &mut trace)?;
    let report = evaluate(cfg, &dataset, &models, &mut trace)?;
    emit_overlay(&report, BufWriter::new(File::create(dir.join("overlay.csv"))?))?;
    trace.write(&dir.join("trace.log"))?;
    Ok(report)
}

/// Tunes every family, writing leaderboards and the selected models under
/// `dir`.
pub fn train_and_save(
    cfg: &ExperimentConfig,
    dataset: &PreparedDataset,
    dir: &Path,
    trace: &mut Trace,
) -> Result<Vec<SavedModel>> {
    fs::create_dir_all(dir.join("models"))?;
    let selections = tune_all(cfg, dataset, trace)?;
    let mut out = Vec::new();
    for s in selections {
        tuning::write_leaderboard(
            &cfg.grid(s.family),
            &s.trials,
            BufWriter::new(File::create(dir.join(format!("leaderboard_{}.csv", s.family)))?),
        )?;
        s.saved.save(&model_path(dir, s.family))?;
        out.push(s.saved);
    }
    Ok(out)
}

pub fn model_path(dir: &Path, family: Family) -> PathBuf {
    dir.join("models").join(format!("{family}.json"))
}

/// Loads the three saved models from `dir`.
pub fn load_models(dir: &Path) -> Result<Vec<SavedModel>> {
    Family::ALL
        .iter()
        .map(|&f| {
            let path = model_path(dir, f);
            if !path.exists() {
                return Err(Error::IncompleteReport(format!(
                    "no saved {f} model at {}",
                    path.display()
                )));
            }
            SavedModel::load(&path)
        })
        .collect()
}

pub fn write_manifest(dataset: &PreparedDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("dataset_manifest.json"),
        serde_json::to_string_pretty(&dataset.manifest())? + "\n",
    )?;
    Ok(())
}

/// Runs each config and writes the combined `report.json` and
/// `report.txt` into `out`.
pub fn run_experiment(configs: &[ExperimentConfig], out: &Path) -> Result<ExperimentReport> {
    let first = configs
        .first()
        .ok_or_else(|| Error::Config("no dataset to run".into()))?;
    let datasets = configs.iter().map(run_dataset).collect::<Result<Vec<_>>>()?;
    let report = ExperimentReport {
        seed: first.seed,
        metric: first.metric,
        datasets,
    };
    write_report(&report, out)?;
    Ok(report)
}

pub fn write_report(report: &ExperimentReport, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("report.json"), report.to_json()?)?;
    fs::write(out.join("report.txt"), render_table(report)?)?;
    Ok(())
}
