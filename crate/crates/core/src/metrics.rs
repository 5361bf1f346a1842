//! Forecast error measures.
//!
//! The relative forms divide each residual by the actual value before
//! aggregating. Points whose actual value is within [`ZERO_GUARD`] of zero
//! are excluded and counted, and `n` is the post-guard count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ZERO_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Relative,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub variant: Variant,
    pub n: usize,
    pub guard_count: usize,
}

fn check(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::Dimension(format!(
            "{} actual values vs {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::InsufficientData("no points to score".into()));
    }
    Ok(())
}

/// Relative residuals `(A - F) / A` of the unguarded points, and the number
/// of guarded ones.
fn relative_residuals(actual: &[f64], predicted: &[f64]) -> Result<(Vec<f64>, usize)> {
    check(actual, predicted)?;
    let kept: Vec<f64> = actual
        .iter()
        .zip(predicted)
        .filter(|(a, _)| a.abs() >= ZERO_GUARD)
        .map(|(a, f)| (a - f) / a)
        .collect();
    if kept.is_empty() {
        return Err(Error::UndefinedMetric);
    }
    let guarded = actual.len() - kept.len();
    Ok((kept, guarded))
}

fn summarize(residuals: &[f64], variant: Variant, guard_count: usize) -> MetricsReport {
    let n = residuals.len();
    let mse = residuals.iter().map(|r| r * r).sum::<f64>() / n as f64;
    let mae = residuals.iter().map(|r| r.abs()).sum::<f64>() / n as f64;
    MetricsReport {
        mse,
        rmse: mse.sqrt(),
        mae,
        variant,
        n,
        guard_count,
    }
}

pub fn relative_mse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    relative_report(actual, predicted).map(|r| r.mse)
}

pub fn relative_mae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    relative_report(actual, predicted).map(|r| r.mae)
}

pub fn relative_rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    relative_report(actual, predicted).map(|r| r.rmse)
}

pub fn relative_report(actual: &[f64], predicted: &[f64]) -> Result<MetricsReport> {
    let (res, guarded) = relative_residuals(actual, predicted)?;
    Ok(summarize(&res, Variant::Relative, guarded))
}

/// Plain MSE / RMSE / MAE with no denominator.
pub fn absolute_variants(actual: &[f64], predicted: &[f64]) -> Result<MetricsReport> {
    check(actual, predicted)?;
    let res: Vec<f64> = actual.iter().zip(predicted).map(|(a, f)| a - f).collect();
    Ok(summarize(&res, Variant::Absolute, 0))
}

pub fn report(variant: Variant, actual: &[f64], predicted: &[f64]) -> Result<MetricsReport> {
    match variant {
        Variant::Relative => relative_report(actual, predicted),
        Variant::Absolute => absolute_variants(actual, predicted),
    }
}

/// Plain mean squared error, used as the training loss.
pub fn mse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    absolute_variants(actual, predicted).map(|r| r.mse)
}
