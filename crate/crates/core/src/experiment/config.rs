use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelDefaults;
use crate::pipeline::SplitSpec;
use crate::synth::{Scenario, SynthConfig};
use crate::tuning::{Family, GridSpec, ParamValue};

/// Which metric variants a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricSelection {
    Relative,
    Absolute,
    Both,
}

impl MetricSelection {
    pub fn variants(self) -> &'static [crate::metrics::Variant] {
        use crate::metrics::Variant::*;
        match self {
            MetricSelection::Relative => &[Relative],
            MetricSelection::Absolute => &[Absolute],
            MetricSelection::Both => &[Relative, Absolute],
        }
    }
}

impl FromStr for MetricSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relative" => Ok(MetricSelection::Relative),
            "absolute" => Ok(MetricSelection::Absolute),
            "both" => Ok(MetricSelection::Both),
            other => Err(Error::Config(format!("unknown metric variant `{other}`"))),
        }
    }
}

impl fmt::Display for MetricSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricSelection::Relative => "relative",
            MetricSelection::Absolute => "absolute",
            MetricSelection::Both => "both",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synth(SynthConfig),
    /// An hourly CSV, plus a weekly yield CSV for the tomato scenario.
    Files {
        hourly: PathBuf,
        weekly: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub source: DataSource,
    pub target: String,
    pub window_length: usize,
    pub split: SplitSpec,
    pub grids: Vec<GridSpec>,
    pub defaults: ModelDefaults,
    pub metric: MetricSelection,
    pub seed: u64,
    pub out_dir: PathBuf,
}

/// Every accepted key with its default. Keys under `grid.<family>.` name a
/// grid axis; setting any of them replaces that family's default grid.
pub const DOCUMENTED_KEYS: &[(&str, &str)] = &[
    ("data.scenario", "ficus_sdv"),
    ("data.source", "synth"),
    ("data.hourly_path", ""),
    ("data.weekly_path", ""),
    ("data.days", "42 for ficus_sdv, 364 for tomato_yield"),
    ("data.noise_level", "0.05"),
    ("data.dependency_lag", "3"),
    ("target", "sdv for ficus_sdv, yield for tomato_yield"),
    ("window_length", "7"),
    ("split.train", "0.60"),
    ("split.validation", "0.15"),
    ("split.test", "0.25"),
    ("seed", "0"),
    ("metric", "both"),
    ("out", "out"),
    ("lstm.hidden_dim", "16"),
    ("lstm.learning_rate", "0.1"),
    ("lstm.epochs", "200"),
    ("lstm.gradient_clip", "1.0"),
    ("lstm.batch_size", "16 (0 for full batch)"),
    ("lstm.shuffle", "true"),
    ("svr.C", "1"),
    ("svr.gamma", "0.1"),
    ("svr.epsilon", "0.1"),
    ("svr.tolerance", "0.001"),
    ("svr.max_passes", "200"),
    ("rf.n_trees", "100"),
    ("rf.max_depth", "unlimited"),
    ("rf.min_samples_leaf", "1"),
    ("rf.features_per_split", "ceil(d/3) (0 for the default)"),
    ("rf.bootstrap", "true"),
    ("grid.lstm.hidden_dim", "8, 16, 32"),
    ("grid.lstm.learning_rate", "0.05, 0.2, 0.5"),
    ("grid.svr.C", "0.1, 1, 10, 100"),
    ("grid.svr.gamma", "0.01, 0.1, 1"),
    ("grid.rf.n_trees", "10, 50, 100"),
    ("grid.rf.max_depth", "4, 8, unlimited"),
];

pub fn default_grids() -> Vec<GridSpec> {
    vec![
        GridSpec::new(Family::Lstm)
            .nums("hidden_dim", &[8.0, 16.0, 32.0])
            .nums("learning_rate", &[0.05, 0.2, 0.5]),
        GridSpec::new(Family::Svr)
            .nums("C", &[0.1, 1.0, 10.0, 100.0])
            .nums("gamma", &[0.01, 0.1, 1.0]),
        GridSpec::new(Family::Rf).nums("n_trees", &[10.0, 50.0, 100.0]).axis(
            "max_depth",
            vec![ParamValue::Num(4.0), ParamValue::Num(8.0), ParamValue::UNLIMITED],
        ),
    ]
}

pub fn default_target(scenario: Scenario) -> &'static str {
    match scenario {
        Scenario::FicusSdv => "sdv",
        Scenario::TomatoYield => "yield",
    }
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: `{key}` set twice", i + 1)));
        }
    }
    Ok(out)
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{v}`"))),
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<ParamValue>> {
    if v.is_empty() {
        return Err(Error::Config(format!("`{key}` has no values")));
    }
    v.split(',').map(|s| s.parse()).collect()
}

impl ExperimentConfig {
    /// Defaults for `scenario` with synthetic data.
    pub fn new(scenario: Scenario) -> Self {
        ExperimentConfig {
            scenario,
            source: DataSource::Synth(SynthConfig::new(scenario)),
            target: default_target(scenario).to_string(),
            window_length: 7,
            split: SplitSpec::default(),
            grids: default_grids(),
            defaults: ModelDefaults::default(),
            metric: MetricSelection::Both,
            seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    /// Builds a config from key/value pairs over the scenario defaults.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let scenario = match pairs.get("data.scenario") {
            Some(s) => s.parse()?,
            None => Scenario::FicusSdv,
        };
        let mut cfg = ExperimentConfig::new(scenario);
        let mut synth = SynthConfig::new(scenario);
        let mut source = "synth".to_string();
        let (mut hourly, mut weekly) = (None, None);
        let mut grids: BTreeMap<Family, GridSpec> = BTreeMap::new();

        for (key, v) in pairs {
            let v = v.as_str();
            match key.as_str() {
                "data.scenario" => {}
                "data.source" => source = v.to_string(),
                "data.hourly_path" => hourly = Some(PathBuf::from(v)),
                "data.weekly_path" => weekly = Some(PathBuf::from(v)),
                "data.days" => synth.days = parse(key, v)?,
                "data.noise_level" => synth.noise_level = parse(key, v)?,
                "data.dependency_lag" => synth.dependency_lag = parse(key, v)?,
                "target" => cfg.target = v.to_string(),
                "window_length" => cfg.window_length = parse(key, v)?,
                "split.train" => cfg.split.train_fraction = parse(key, v)?,
                "split.validation" => cfg.split.validation_fraction = parse(key, v)?,
                "split.test" => cfg.split.test_fraction = parse(key, v)?,
                "seed" => cfg.seed = parse(key, v)?,
                "metric" => cfg.metric = v.parse()?,
                "out" => cfg.out_dir = PathBuf::from(v),
                "lstm.hidden_dim" => cfg.defaults.lstm_hidden_dim = parse(key, v)?,
                "lstm.learning_rate" => cfg.defaults.lstm.learning_rate = parse(key, v)?,
                "lstm.epochs" => cfg.defaults.lstm.epochs = parse(key, v)?,
                "lstm.gradient_clip" => cfg.defaults.lstm.gradient_clip = parse(key, v)?,
                "lstm.batch_size" => {
                    let b: usize = parse(key, v)?;
                    cfg.defaults.lstm.batch_size = (b > 0).then_some(b);
                }
                "lstm.shuffle" => cfg.defaults.lstm.shuffle_each_epoch = parse_bool(key, v)?,
                "svr.C" => cfg.defaults.svr.c = parse(key, v)?,
                "svr.gamma" => cfg.defaults.svr.gamma = parse(key, v)?,
                "svr.epsilon" => cfg.defaults.svr.epsilon = parse(key, v)?,
                "svr.tolerance" => cfg.defaults.svr.tolerance = parse(key, v)?,
                "svr.max_passes" => cfg.defaults.svr.max_passes = parse(key, v)?,
                "rf.n_trees" => cfg.defaults.rf.n_trees = parse(key, v)?,
                "rf.max_depth" => cfg.defaults.rf.max_depth = v.parse::<ParamValue>()?.as_count(key)?,
                "rf.min_samples_leaf" => cfg.defaults.rf.min_samples_leaf = parse(key, v)?,
                "rf.features_per_split" => {
                    let k: usize = parse(key, v)?;
                    cfg.defaults.rf.features_per_split = (k > 0).then_some(k);
                }
                "rf.bootstrap" => cfg.defaults.rf.bootstrap = parse_bool(key, v)?,
                other => {
                    let Some(rest) = other.strip_prefix("grid.") else {
                        return Err(Error::Config(format!("unknown key `{other}`")));
                    };
                    let (family, axis) = match rest.split_once('.') {
                        Some((f, a)) => (f.parse::<Family>()?, Some(a)),
                        None => (rest.parse::<Family>()?, None),
                    };
                    let grid = grids.entry(family).or_insert_with(|| GridSpec::new(family));
                    match axis {
                        Some(a) => {
                            grid.axes.insert(a.to_string(), parse_list(key, v)?);
                        }
                        // `grid.<family> = fixed` trains the fixed hyperparameters only
                        None if v == "fixed" => {}
                        None => return Err(Error::Config(format!("`{key}` accepts only `fixed`"))),
                    }
                }
            }
        }

        cfg.source = match source.as_str() {
            "synth" => {
                synth.seed = cfg.seed;
                DataSource::Synth(synth)
            }
            "files" => DataSource::Files {
                hourly: hourly.ok_or_else(|| Error::Config("files source needs data.hourly_path".into()))?,
                weekly,
            },
            other => return Err(Error::Config(format!("unknown data.source `{other}`"))),
        };
        for g in cfg.grids.iter_mut() {
            if let Some(custom) = grids.remove(&g.family) {
                *g = custom;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        if self.window_length == 0 {
            return Err(Error::Config("window_length must be positive".into()));
        }
        match &self.source {
            DataSource::Synth(s) => {
                s.validate()?;
                if s.scenario != self.scenario {
                    return Err(Error::Config("synth scenario differs from data.scenario".into()));
                }
            }
            DataSource::Files { weekly, .. } => {
                if self.scenario == Scenario::TomatoYield && weekly.is_none() {
                    return Err(Error::Config("tomato_yield needs data.weekly_path".into()));
                }
            }
        }
        for g in &self.grids {
            g.validate()?;
        }
        self.defaults.lstm.validate()?;
        self.defaults.svr.validate()?;
        Ok(())
    }

    pub fn grid(&self, family: Family) -> GridSpec {
        self.grids
            .iter()
            .find(|g| g.family == family)
            .cloned()
            .unwrap_or_else(|| GridSpec::new(family))
    }

    /// A copy running `scenario` with its own target and synthetic defaults,
    /// keeping every other setting.
    pub fn for_scenario(&self, scenario: Scenario) -> Self {
        let mut cfg = self.clone();
        if scenario != self.scenario {
            cfg.scenario = scenario;
            cfg.target = default_target(scenario).to_string();
            if let DataSource::Synth(s) = &self.source {
                cfg.source = DataSource::Synth(SynthConfig {
                    scenario,
                    days: SynthConfig::new(scenario).days,
                    ..s.clone()
                });
            }
        }
        cfg
    }
}
