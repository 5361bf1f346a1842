use log::warn;
use serde::{Deserialize, Serialize};

use super::window::SupervisedWindowSet;
use crate::error::{Error, Result};

/// Train / validation / test fractions of a chronological split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.60,
            validation_fraction: 0.15,
            test_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train_fraction, self.validation_fraction, self.test_fraction];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Config(format!("split fractions out of range: {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Floor for train and validation, remainder to test.
    pub fn counts(&self, n: usize) -> Result<SplitCounts> {
        self.validate()?;
        if n < 4 {
            return Err(Error::InsufficientData(format!(
                "{n} samples, a three-way split needs at least 4"
            )));
        }
        // The nudge keeps products like 0.6 * 5 from flooring to 2.
        let floor = |f: f64| ((f * n as f64) + 1e-9).floor() as usize;
        let train = floor(self.train_fraction);
        let validation = floor(self.validation_fraction).min(n - train);
        Ok(SplitCounts {
            train,
            validation,
            test: n - train - validation,
        })
    }
}

/// Cuts a window set into contiguous train, validation and test blocks, in
/// that order.
pub fn split_chronological(
    set: &SupervisedWindowSet,
    spec: &SplitSpec,
) -> Result<(SupervisedWindowSet, SupervisedWindowSet, SupervisedWindowSet)> {
    let c = spec.counts(set.len())?;
    if c.validation == 0 {
        warn!("validation partition is empty for {} samples", set.len());
    }
    let a = c.train;
    let b = a + c.validation;
    Ok((set.subset(0..a), set.subset(a..b), set.subset(b..set.len())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts(n: usize) -> (usize, usize, usize) {
        let c = SplitSpec::default().counts(n).unwrap();
        (c.train, c.validation, c.test)
    }

    #[test]
    fn hundred_samples() {
        assert_eq!(counts(100), (60, 15, 25));
    }

    #[test]
    fn floor_rule() {
        assert_eq!(counts(10), (6, 1, 3));
        assert_eq!(counts(4), (2, 0, 2));
        assert_eq!(counts(5), (3, 0, 2));
    }

    #[test]
    fn too_few() {
        assert!(matches!(
            SplitSpec::default().counts(3),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn bad_fractions() {
        let s = SplitSpec {
            train_fraction: 0.7,
            validation_fraction: 0.2,
            test_fraction: 0.2,
        };
        assert!(matches!(s.counts(100), Err(Error::Config(_))));
    }

    #[test]
    fn blocks_are_ordered() {
        let n = 20;
        let set = SupervisedWindowSet::from_parts(
            (0..n).map(f64::from).collect(),
            (0..n).map(f64::from).collect(),
            vec!["y".into()],
            "y".into(),
            1,
        )
        .unwrap();
        let (tr, va, te) = split_chronological(&set, &SplitSpec::default()).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (12, 3, 5));
        assert_eq!(tr.targets().last(), Some(&11.0));
        assert_eq!(va.targets(), &[12.0, 13.0, 14.0]);
        assert_eq!(te.targets()[0], 15.0);
    }

    proptest! {
        #[test]
        fn partitions_cover(n in 4usize..5000) {
            let c = SplitSpec::default().counts(n).unwrap();
            prop_assert_eq!(c.train + c.validation + c.test, n);
            prop_assert_eq!(c.train, (n * 60) / 100);
            prop_assert_eq!(c.validation, (n * 15) / 100);
        }
    }
}
