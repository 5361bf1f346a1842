//! Greenhouse growth and yield forecasting.
//!
//! One-step-ahead forecasting of stem diameter variation and crop yield from
//! microclimate series, comparing an LSTM network against epsilon-SVR and
//! random-forest baselines under relative-error metrics.

pub mod error;
pub mod experiment;
pub mod lstm;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod rf;
pub mod svr;
pub mod synth;
pub mod tuning;

pub use error::{Error, Result};
