//! Single-layer LSTM regressor trained by backpropagation through time.

mod bptt;
mod cell;
mod params;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bptt::{bptt_gradients, bptt_gradients_indexed};
pub use cell::{cell_step, forward, predict_one_step, ForwardCache, LstmState, StepCache};
pub use params::{Gate, LstmParams, Matrix, TENSOR_NAMES};
pub use train::{clip_global_norm, evaluate_mse, train, EpochLoss, TrainConfig, TrainOutcome};

use crate::error::Result;

/// Trained network plus the configuration it was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub params: LstmParams,
    pub config: TrainConfig,
}

impl LstmModel {
    pub fn predict(&self, window: &[f64]) -> Result<f64> {
        predict_one_step(&self.params, window)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
