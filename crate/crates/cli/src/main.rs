//! `ghforecast`: greenhouse forecasting experiments from the command line.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use ghforecast::experiment::{self, ExperimentConfig, ExperimentReport, Trace};
use ghforecast::synth::{self, Scenario};
use ghforecast::Error;

#[derive(Parser, Debug)]
#[command(name = "ghforecast", version, about = "Greenhouse growth and yield forecasting")]
struct Cli {
    /// Key-value config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dataset to run; repeat for several. Defaults to the config's scenario.
    #[arg(long, global = true, value_enum)]
    scenario: Vec<ScenarioArg>,
    #[arg(long, global = true, value_enum)]
    metric: Option<MetricArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Write synthetic hourly (and weekly yield) CSVs.
    Synth,
    /// Build the normalized, windowed dataset and its manifest.
    Prepare,
    /// Grid-search and train the three models; save the winners.
    Train,
    /// Score saved models on the test partition and write the report.
    Evaluate,
    /// Train and evaluate: the full comparison protocol.
    Compare,
    /// Write overlay.csv files from an existing report.json.
    Overlay,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ScenarioArg {
    #[value(name = "ficus_sdv")]
    FicusSdv,
    #[value(name = "tomato_yield")]
    TomatoYield,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::FicusSdv => Scenario::FicusSdv,
            ScenarioArg::TomatoYield => Scenario::TomatoYield,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum MetricArg {
    Relative,
    Absolute,
    Both,
}

/// Process exit status for each failure class.
fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) | Error::Parse(_) => 2,
        Error::MissingColumn(_)
        | Error::InsufficientData(_)
        | Error::DuplicateTimestamp(_)
        | Error::DegenerateFeature(_)
        | Error::NumericInput(_)
        | Error::Csv(_) => 3,
        Error::TrainingDiverged { .. } | Error::NoViableConfig(_) | Error::UndefinedMetric => 4,
        _ => 1,
    }
}

/// One config per requested scenario, with flags applied over the file.
fn configs(cli: &Cli) -> Result<Vec<ExperimentConfig>, Error> {
    let mut pairs = match &cli.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            experiment::parse_pairs(&text)?
        }
        None => BTreeMap::new(),
    };
    if let Some(seed) = cli.seed {
        pairs.insert("seed".into(), seed.to_string());
    }
    if let Some(out) = &cli.out {
        pairs.insert("out".into(), out.display().to_string());
    }
    if let Some(m) = cli.metric {
        let v = match m {
            MetricArg::Relative => "relative",
            MetricArg::Absolute => "absolute",
            MetricArg::Both => "both",
        };
        pairs.insert("metric".into(), v.into());
    }
    if cli.scenario.is_empty() {
        return Ok(vec![ExperimentConfig::from_pairs(&pairs)?]);
    }
    let mut out = Vec::new();
    for s in &cli.scenario {
        let scenario = Scenario::from(*s);
        if out.iter().any(|c: &ExperimentConfig| c.scenario == scenario) {
            continue;
        }
        let mut p = pairs.clone();
        p.insert("data.scenario".into(), scenario.name().into());
        out.push(ExperimentConfig::from_pairs(&p)?);
    }
    Ok(out)
}

fn write_synth(cfg: &ExperimentConfig) -> Result<(), Error> {
    let experiment::DataSource::Synth(s) = &cfg.source else {
        return Err(Error::Config("synth needs data.source = synth".into()));
    };
    let data = synth::generate(s)?;
    let dir = experiment::scenario_dir(&cfg.out_dir, cfg.scenario);
    fs::create_dir_all(&dir)?;
    data.hourly
        .write_csv(BufWriter::new(File::create(dir.join("hourly.csv"))?))?;
    if let Some(w) = &data.weekly {
        w.write_csv(BufWriter::new(File::create(dir.join("weekly.csv"))?))?;
    }
    info!("wrote synthetic {} data to {}", cfg.scenario, dir.display());
    Ok(())
}

fn prepare(cfg: &ExperimentConfig) -> Result<(), Error> {
    let ds = experiment::prepare(cfg)?;
    let dir = experiment::scenario_dir(&cfg.out_dir, cfg.scenario);
    experiment::write_manifest(&ds, &dir)?;
    ds.table
        .write_csv(BufWriter::new(File::create(dir.join("dataset.csv"))?))?;
    Ok(())
}

fn train(cfg: &ExperimentConfig) -> Result<(), Error> {
    let ds = experiment::prepare(cfg)?;
    let dir = experiment::scenario_dir(&cfg.out_dir, cfg.scenario);
    experiment::write_manifest(&ds, &dir)?;
    let mut trace = Trace::default();
    experiment::train_and_save(cfg, &ds, &dir, &mut trace)?;
    trace.write(&dir.join("trace.log"))
}

fn evaluate(cfgs: &[ExperimentConfig], out: &Path) -> Result<ExperimentReport, Error> {
    let mut datasets = Vec::new();
    for cfg in cfgs {
        let ds = experiment::prepare(cfg)?;
        let dir = experiment::scenario_dir(&cfg.out_dir, cfg.scenario);
        let models = experiment::load_models(&dir)?;
        let mut trace = Trace::default();
        let report = experiment::evaluate(cfg, &ds, &models, &mut trace)?;
        experiment::emit_overlay(&report, BufWriter::new(File::create(dir.join("overlay.csv"))?))?;
        trace.append(&dir.join("trace.log"))?;
        datasets.push(report);
    }
    let report = ExperimentReport {
        seed: cfgs[0].seed,
        metric: cfgs[0].metric,
        datasets,
    };
    experiment::write_report(&report, out)?;
    Ok(report)
}

fn overlay(out: &Path) -> Result<(), Error> {
    let path = out.join("report.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let report = ExperimentReport::from_json(&text)?;
    for d in &report.datasets {
        let dir = experiment::scenario_dir(out, d.scenario);
        fs::create_dir_all(&dir)?;
        experiment::emit_overlay(d, BufWriter::new(File::create(dir.join("overlay.csv"))?))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfgs = configs(cli)?;
    let out = cfgs[0].out_dir.clone();
    match cli.command {
        Command::Synth => cfgs.iter().try_for_each(write_synth),
        Command::Prepare => cfgs.iter().try_for_each(prepare),
        Command::Train => cfgs.iter().try_for_each(train),
        Command::Evaluate => evaluate(&cfgs, &out).map(|_| ()),
        Command::Compare => {
            let report = experiment::run_experiment(&cfgs, &out)?;
            print!("{}", experiment::render_table(&report)?);
            Ok(())
        }
        Command::Overlay => overlay(&out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_class() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::InsufficientData("x".into()).in_stage("window")), 3);
        assert_eq!(exit_code(&Error::TrainingDiverged { epoch: 2 }.in_stage("tune")), 4);
        assert_eq!(exit_code(&Error::IncompleteReport("x".into())), 1);
    }

    #[test]
    fn flags_override_file_values() {
        let cli = Cli::parse_from([
            "ghforecast",
            "compare",
            "--seed",
            "5",
            "--scenario",
            "tomato_yield",
            "--scenario",
            "ficus_sdv",
            "--metric",
            "relative",
        ]);
        let cfgs = configs(&cli).unwrap();
        assert_eq!(cfgs.len(), 2);
        assert_eq!(cfgs[0].scenario, Scenario::TomatoYield);
        assert_eq!(cfgs[1].target, "sdv");
        assert!(cfgs.iter().all(|c| c.seed == 5));
        assert_eq!(cfgs[0].metric, experiment::MetricSelection::Relative);
    }
}
