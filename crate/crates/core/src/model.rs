//! Uniform fit/predict over the three model families.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstm::{self, LstmModel, LstmParams, TrainConfig};
use crate::pipeline::SupervisedWindowSet;
use crate::rf::{self, Forest, ForestConfig};
use crate::svr::{self, SvrConfig, SvrModel};
use crate::tuning::{Assignment, Family, ParamValue};

/// Hyperparameters used wherever a grid does not set a value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDefaults {
    pub lstm_hidden_dim: usize,
    pub lstm: TrainConfig,
    pub svr: SvrConfig,
    pub rf: ForestConfig,
}

impl Default for ModelDefaults {
    fn default() -> Self {
        ModelDefaults {
            lstm_hidden_dim: 16,
            lstm: TrainConfig::default(),
            svr: SvrConfig::default(),
            rf: ForestConfig::default(),
        }
    }
}

fn num(a: &Assignment, key: &str) -> Option<f64> {
    a.get(key).and_then(ParamValue::as_f64)
}

fn count(a: &Assignment, key: &str) -> Result<Option<usize>> {
    a.get(key).map(|v| v.as_count(key)).transpose().map(Option::flatten)
}

impl ModelDefaults {
    pub fn lstm_config(&self, a: &Assignment, seed: u64) -> Result<(usize, TrainConfig)> {
        let hidden = count(a, "hidden_dim")?.unwrap_or(self.lstm_hidden_dim);
        let cfg = TrainConfig {
            learning_rate: num(a, "learning_rate").unwrap_or(self.lstm.learning_rate),
            epochs: count(a, "epochs")?.unwrap_or(self.lstm.epochs),
            seed,
            ..self.lstm.clone()
        };
        Ok((hidden, cfg))
    }

    pub fn svr_config(&self, a: &Assignment) -> SvrConfig {
        SvrConfig {
            c: num(a, "C").unwrap_or(self.svr.c),
            gamma: num(a, "gamma").unwrap_or(self.svr.gamma),
            epsilon: num(a, "epsilon").unwrap_or(self.svr.epsilon),
            ..self.svr.clone()
        }
    }

    pub fn rf_config(&self, a: &Assignment, seed: u64) -> Result<ForestConfig> {
        let n_trees = count(a, "n_trees")?.unwrap_or(self.rf.n_trees);
        let max_depth = match a.get("max_depth") {
            Some(v) => v.as_count("max_depth")?,
            None => self.rf.max_depth,
        };
        Ok(ForestConfig {
            n_trees,
            max_depth,
            seed,
            ..self.rf.clone()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)]
pub enum FittedModel {
    Lstm(LstmModel),
    Svr(SvrModel),
    Rf(Forest),
}

impl FittedModel {
    pub fn family(&self) -> Family {
        match self {
            FittedModel::Lstm(_) => Family::Lstm,
            FittedModel::Svr(_) => Family::Svr,
            FittedModel::Rf(_) => Family::Rf,
        }
    }

    pub fn predict(&self, window: &[f64]) -> Result<f64> {
        match self {
            FittedModel::Lstm(m) => m.predict(window),
            FittedModel::Svr(m) => m.predict(window),
            FittedModel::Rf(m) => m.predict(window),
        }
    }

    pub fn predict_set(&self, set: &SupervisedWindowSet) -> Result<Vec<f64>> {
        set.windows().map(|w| self.predict(w)).collect()
    }
}

fn rows(set: &SupervisedWindowSet) -> Vec<Vec<f64>> {
    set.windows().map(<[f64]>::to_vec).collect()
}

/// Trains one model of `family`. The LSTM uses `validation` for epoch
/// selection; the baselines ignore it.
pub fn fit(
    family: Family,
    assignment: &Assignment,
    defaults: &ModelDefaults,
    train: &SupervisedWindowSet,
    validation: &SupervisedWindowSet,
    seed: u64,
) -> Result<FittedModel> {
    if train.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    match family {
        Family::Lstm => {
            let (hidden, cfg) = defaults.lstm_config(assignment, seed)?;
            let init = LstmParams::init(train.n_features(), hidden, seed)?;
            let out = lstm::train(&init, train, validation, &cfg)?;
            Ok(FittedModel::Lstm(LstmModel {
                params: out.params,
                config: cfg,
            }))
        }
        Family::Svr => {
            let cfg = defaults.svr_config(assignment);
            Ok(FittedModel::Svr(svr::fit_smo(&rows(train), train.targets(), &cfg)?))
        }
        Family::Rf => {
            let cfg = defaults.rf_config(assignment, seed)?;
            Ok(FittedModel::Rf(rf::fit_forest(&rows(train), train.targets(), &cfg)?))
        }
    }
}

/// A selected model with the window length its inputs use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub window_length: usize,
    pub hyperparameters: Assignment,
    /// Relative MSE on the validation partition.
    pub validation_metric: f64,
    pub model: FittedModel,
}

impl SavedModel {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
