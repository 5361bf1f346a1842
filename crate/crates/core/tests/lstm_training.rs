use ghforecast::lstm::{self, bptt_gradients, LstmParams, TrainConfig, TENSOR_NAMES};
use ghforecast::metrics;
use ghforecast::pipeline::SupervisedWindowSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sine_set(n: usize, w: usize) -> SupervisedWindowSet {
    let series: Vec<f64> = (0..n + w).map(|t| 0.5 + 0.4 * (0.3 * t as f64).sin()).collect();
    let inputs = (0..n).flat_map(|i| series[i..i + w].to_vec()).collect();
    SupervisedWindowSet::from_parts(inputs, series[w..].to_vec(), vec!["y".into()], "y".into(), w).unwrap()
}

fn random_set(d: usize, w: usize, n: usize, seed: u64) -> SupervisedWindowSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = (0..n * w * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let targets = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let names = (0..d).map(|i| format!("x{i}")).collect();
    SupervisedWindowSet::from_parts(inputs, targets, names, "y".into(), w).unwrap()
}

fn loss(p: &LstmParams, set: &SupervisedWindowSet) -> f64 {
    set.windows()
        .zip(set.targets())
        .map(|(x, y)| (lstm::predict_one_step(p, x).unwrap() - y).powi(2))
        .sum::<f64>()
        / set.len() as f64
}

/// Largest relative gap between BPTT and central differences over every
/// coordinate of every tensor.
fn worst_gradient_gap(p: &LstmParams, set: &SupervisedWindowSet) -> f64 {
    let (_, grads) = bptt_gradients(p, set).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (ti, tensor) in analytic.iter().enumerate() {
        for (k, a) in tensor.iter().enumerate() {
            let mut plus = p.clone();
            plus.tensors_mut()[ti][k] += h;
            let mut minus = p.clone();
            minus.tensors_mut()[ti][k] -= h;
            let numeric = (loss(&plus, set) - loss(&minus, set)) / (2.0 * h);
            let gap = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-7);
            assert!(gap.is_finite(), "{}[{k}]", TENSOR_NAMES[ti]);
            worst = worst.max(gap);
        }
    }
    worst
}

#[test]
fn bptt_matches_finite_differences_across_shapes() {
    for (d, hidden, w, seed) in [(1, 1, 1, 0), (2, 3, 4, 1), (3, 5, 6, 2), (1, 4, 10, 3)] {
        let p = LstmParams::init(d, hidden, seed).unwrap();
        let set = random_set(d, w, 5, seed + 100);
        let gap = worst_gradient_gap(&p, &set);
        assert!(gap < 1e-4, "d={d} h={hidden} w={w}: {gap}");
    }
}

#[test]
fn fits_a_noiseless_sine() {
    let train = sine_set(200, 8);
    let cfg = TrainConfig {
        learning_rate: 0.5,
        epochs: 500,
        seed: 0,
        ..TrainConfig::default()
    };
    let init = LstmParams::init(1, 16, 0).unwrap();
    let out = lstm::train(&init, &train, &sine_set(0, 8), &cfg).unwrap();
    let pred: Vec<f64> = train
        .windows()
        .map(|w| lstm::predict_one_step(&out.params, w).unwrap())
        .collect();
    let rel = metrics::relative_mse(train.targets(), &pred).unwrap();
    assert!(rel < 1e-3, "relative MSE {rel}");
}

#[test]
fn longer_windows_help_on_lagged_data() {
    // y depends on x three steps back, so a one-step window cannot see it.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x: Vec<f64> = (0..400).map(|_| rng.random_range(0.0..1.0)).collect();
    let y: Vec<f64> = (0..400)
        .map(|t| if t >= 3 { 0.2 + 0.6 * x[t - 3] } else { 0.5 })
        .collect();
    let set = |w: usize| {
        let n = 400 - w;
        let inputs = (0..n).flat_map(|i| (i..i + w).flat_map(|r| [x[r], y[r]])).collect();
        SupervisedWindowSet::from_parts(inputs, y[w..].to_vec(), vec!["x".into(), "y".into()], "y".into(), w).unwrap()
    };
    let cfg = TrainConfig {
        learning_rate: 0.2,
        epochs: 60,
        ..TrainConfig::default()
    };
    let score = |w: usize| {
        let s = set(w);
        let out = lstm::train(&LstmParams::init(2, 8, 0).unwrap(), &s, &s.subset(0..0), &cfg).unwrap();
        lstm::evaluate_mse(&out.params, &s)
    };
    let (short, long) = (score(1), score(4));
    assert!(long < 0.5 * short, "w=1: {short}, w=4: {long}");
}
