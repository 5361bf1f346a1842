use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bptt::bptt_gradients_indexed;
use super::cell::predict_unchecked;
use super::params::LstmParams;
use crate::error::{Error, Result};
use crate::pipeline::SupervisedWindowSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Cap on the global L2 norm of each gradient step.
    pub gradient_clip: f64,
    pub seed: u64,
    pub shuffle_each_epoch: bool,
    /// Minibatch size; `None` trains full-batch.
    pub batch_size: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 200,
            gradient_clip: 1.0,
            seed: 0,
            shuffle_each_epoch: true,
            batch_size: Some(16),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate {}", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.gradient_clip.is_nan() || self.gradient_clip <= 0.0 {
            return Err(Error::Config(format!("gradient_clip {}", self.gradient_clip)));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_mse: f64,
    pub validation_mse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation MSE (training MSE
    /// when there is no validation data).
    pub params: LstmParams,
    pub best_epoch: usize,
    pub history: Vec<EpochLoss>,
}

/// Rescales `grads` so its global norm is at most `clip`; returns the norm
/// before clipping.
pub fn clip_global_norm(grads: &mut LstmParams, clip: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > clip {
        grads.scale(clip / norm);
    }
    norm
}

/// Mean squared error of the network over a window set.
pub fn evaluate_mse(params: &LstmParams, set: &SupervisedWindowSet) -> f64 {
    set.windows()
        .zip(set.targets())
        .map(|(x, y)| (predict_unchecked(params, x) - y).powi(2))
        .sum::<f64>()
        / set.len() as f64
}

/// Minibatch gradient descent with global-norm clipping.
pub fn train(
    params: &LstmParams,
    train_set: &SupervisedWindowSet,
    validation: &SupervisedWindowSet,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    for set in [train_set, validation] {
        if !set.is_empty() && set.n_features() != params.input_dim {
            return Err(Error::Dimension(format!(
                "{} features for input_dim {}",
                set.n_features(),
                params.input_dim
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut current = params.clone();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let batch = config.batch_size.unwrap_or(order.len()).min(order.len());
    let mut best: Option<(f64, usize, LstmParams)> = None;
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        if config.shuffle_each_epoch {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let (_, mut grads) = bptt_gradients_indexed(&current, train_set, chunk)?;
            clip_global_norm(&mut grads, config.gradient_clip);
            if config.learning_rate > 0.0 {
                current.add_scaled(&grads, -config.learning_rate);
            }
        }
        let train_mse = evaluate_mse(&current, train_set);
        let validation_mse = (!validation.is_empty()).then(|| evaluate_mse(&current, validation));
        let score = validation_mse.unwrap_or(train_mse);
        if !train_mse.is_finite() || !score.is_finite() || !current.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        history.push(EpochLoss {
            epoch,
            train_mse,
            validation_mse,
        });
        if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
            best = Some((score, epoch, current.clone()));
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        params,
        best_epoch,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine_set(n: usize, w: usize) -> SupervisedWindowSet {
        let series: Vec<f64> = (0..n + w).map(|t| 0.5 + 0.4 * (0.3 * t as f64).sin()).collect();
        let inputs = (0..n).flat_map(|i| series[i..i + w].to_vec()).collect();
        SupervisedWindowSet::from_parts(inputs, series[w..].to_vec(), vec!["y".into()], "y".into(), w).unwrap()
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let p = LstmParams::init(1, 4, 3).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 5,
            ..TrainConfig::default()
        };
        let out = train(&p, &sine_set(30, 4), &sine_set(10, 4), &cfg).unwrap();
        assert_eq!(out.params, p);
        assert_eq!(out.history.len(), 5);
    }

    #[test]
    fn deterministic_history() {
        let p = LstmParams::init(1, 4, 3).unwrap();
        let cfg = TrainConfig {
            epochs: 10,
            ..TrainConfig::default()
        };
        let a = train(&p, &sine_set(30, 4), &sine_set(10, 4), &cfg).unwrap();
        let b = train(&p, &sine_set(30, 4), &sine_set(10, 4), &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn loss_goes_down() {
        let p = LstmParams::init(1, 8, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 60,
            learning_rate: 0.2,
            ..TrainConfig::default()
        };
        let out = train(&p, &sine_set(60, 5), &sine_set(20, 5), &cfg).unwrap();
        let first = out.history[0].train_mse;
        let last = out.history.last().unwrap().train_mse;
        assert!(last < first * 0.5, "{first} -> {last}");
    }

    #[test]
    fn divergence_names_epoch() {
        let p = LstmParams::init(1, 4, 3).unwrap();
        let set = SupervisedWindowSet::from_parts(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![1e300, -1e300],
            vec!["y".into()],
            "y".into(),
            2,
        )
        .unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&p, &set, &set, &cfg),
            Err(Error::TrainingDiverged { epoch: 1 })
        ));
    }

    #[test]
    fn clipping_caps_norm() {
        let mut g = LstmParams::init(2, 3, 0).unwrap();
        g.scale(50.0);
        let before = clip_global_norm(&mut g, 0.5);
        assert!(before > 0.5);
        assert!(g.global_norm() <= 0.5 + 1e-9);
    }

    #[test]
    fn zero_residual_step_is_noop() {
        let p = LstmParams::init(1, 3, 9).unwrap();
        let base = sine_set(8, 3);
        let preds: Vec<f64> = base.windows().map(|x| predict_unchecked(&p, x)).collect();
        let set = SupervisedWindowSet::from_parts(
            base.windows().flatten().copied().collect(),
            preds,
            vec!["y".into()],
            "y".into(),
            3,
        )
        .unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            learning_rate: 0.5,
            ..TrainConfig::default()
        };
        let out = train(
            &p,
            &set,
            &SupervisedWindowSet::from_parts(vec![], vec![], vec!["y".into()], "y".into(), 3).unwrap(),
            &cfg,
        )
        .unwrap();
        assert_eq!(out.params, p);
    }
}
