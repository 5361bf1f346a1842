use serde::{Deserialize, Serialize};

use super::table::{Column, TimeSeriesTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl FeatureRange {
    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn denormalize(&self, x: f64) -> f64 {
        x * (self.max - self.min) + self.min
    }
}

/// Per-feature min-max ranges, fitted on a training partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub features: Vec<FeatureRange>,
}

impl NormalizationParams {
    /// Fits ranges on every column of `table`. Pass only training rows.
    pub fn fit(table: &TimeSeriesTable) -> Result<Self> {
        let features = table
            .columns()
            .iter()
            .map(|c| fit_column(&c.name, &c.values))
            .collect::<Result<Vec<_>>>()?;
        Ok(NormalizationParams { features })
    }

    pub fn feature(&self, name: &str) -> Result<&FeatureRange> {
        self.features
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Scales every column of `table` that has a fitted range.
    pub fn apply(&self, table: &TimeSeriesTable) -> Result<TimeSeriesTable> {
        let columns = table
            .columns()
            .iter()
            .map(|c| {
                let range = self.feature(&c.name)?;
                Ok(Column {
                    name: c.name.clone(),
                    values: c.values.iter().map(|&v| range.normalize(v)).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        TimeSeriesTable::new(table.timestamps().to_vec(), columns, table.interval())
    }

    pub fn normalize_values(&self, name: &str, values: &[f64]) -> Result<Vec<f64>> {
        let r = self.feature(name)?;
        Ok(values.iter().map(|&v| r.normalize(v)).collect())
    }

    pub fn denormalize_values(&self, name: &str, values: &[f64]) -> Result<Vec<f64>> {
        let r = self.feature(name)?;
        Ok(values.iter().map(|&v| r.denormalize(v)).collect())
    }
}

pub fn fit_column(name: &str, values: &[f64]) -> Result<FeatureRange> {
    if values.is_empty() {
        return Err(Error::InsufficientData(format!("no training values for `{name}`")));
    }
    let (min, max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if max <= min {
        return Err(Error::DegenerateFeature(name.to_string()));
    }
    Ok(FeatureRange {
        name: name.to_string(),
        min,
        max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn affine_map() {
        let r = fit_column("x", &[2.0, 4.0, 6.0]).unwrap();
        let n: Vec<f64> = [2.0, 4.0, 6.0].iter().map(|&v| r.normalize(v)).collect();
        assert_eq!(n, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_column_is_degenerate() {
        assert!(matches!(
            fit_column("x", &[3.0, 3.0, 3.0]),
            Err(Error::DegenerateFeature(n)) if n == "x"
        ));
    }

    proptest! {
        #[test]
        fn round_trip(values in prop::collection::vec(-1e3f64..1e3, 2..64)) {
            prop_assume!(values.iter().any(|&v| v != values[0]));
            let r = fit_column("x", &values).unwrap();
            for &v in &values {
                prop_assert!((r.denormalize(r.normalize(v)) - v).abs() < 1e-12);
            }
        }
    }
}
