use super::cell::{forward_unchecked, LstmState};
use super::params::LstmParams;
use crate::error::{Error, Result};
use crate::pipeline::SupervisedWindowSet;

/// Adds `scale * d(pred - target)^2 / d(params)` for one sample into
/// `grads` and returns the squared residual.
fn accumulate_sample(params: &LstmParams, window: &[f64], target: f64, scale: f64, grads: &mut LstmParams) -> f64 {
    let h = params.hidden_dim;
    let d = params.input_dim;
    let (pred, cache) = forward_unchecked(params, window);
    let residual = pred - target;
    let dpred = 2.0 * residual * scale;
    if dpred == 0.0 {
        return 0.0;
    }

    let last = cache.steps.last().expect("non-empty window");
    grads.head_bias += dpred;
    for (g, m) in grads.head_weights.iter_mut().zip(&last.hidden) {
        *g += dpred * m;
    }

    let mut dm: Vec<f64> = params.head_weights.iter().map(|v| v * dpred).collect();
    let mut dc = vec![0.0; h];
    let zero = LstmState::zeros(h);
    let (mut da_i, mut da_f, mut da_o, mut da_s) = (vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]);

    for t in (0..cache.steps.len()).rev() {
        let s = &cache.steps[t];
        let (m_prev, c_prev) = if t == 0 {
            (&zero.hidden, &zero.cell)
        } else {
            (&cache.steps[t - 1].hidden, &cache.steps[t - 1].cell)
        };
        let x = &window[t * d..(t + 1) * d];
        for k in 0..h {
            let tc = s.cell_tanh[k];
            let d_o = dm[k] * tc;
            dc[k] += dm[k] * s.output_gate[k] * (1.0 - tc * tc);
            let d_i = dc[k] * s.candidate[k];
            let d_s = dc[k] * s.input_gate[k];
            let d_f = dc[k] * c_prev[k];
            da_i[k] = d_i * s.input_gate[k] * (1.0 - s.input_gate[k]);
            da_f[k] = d_f * s.forget_gate[k] * (1.0 - s.forget_gate[k]);
            da_o[k] = d_o * s.output_gate[k] * (1.0 - s.output_gate[k]);
            da_s[k] = d_s * (1.0 - s.candidate[k] * s.candidate[k]);
            // carry the cell gradient through the forget gate
            dc[k] *= s.forget_gate[k];
        }
        dm.fill(0.0);
        for (gate, grad, da) in [
            (&params.input_gate, &mut grads.input_gate, &da_i),
            (&params.forget_gate, &mut grads.forget_gate, &da_f),
            (&params.output_gate, &mut grads.output_gate, &da_o),
            (&params.candidate, &mut grads.candidate, &da_s),
        ] {
            grad.w.add_outer(da, x);
            if t > 0 {
                grad.u.add_outer(da, m_prev);
            }
            for (b, a) in grad.b.iter_mut().zip(da.iter()) {
                *b += a;
            }
            gate.u.tr_mul_vec_add(da, &mut dm);
        }
    }
    residual * residual
}

/// Mean squared error and its exact gradient over the listed samples.
pub fn bptt_gradients_indexed(
    params: &LstmParams,
    set: &SupervisedWindowSet,
    indices: &[usize],
) -> Result<(f64, LstmParams)> {
    if indices.is_empty() {
        return Err(Error::InsufficientData("empty batch".into()));
    }
    if set.n_features() != params.input_dim {
        return Err(Error::Dimension(format!(
            "{} features for input_dim {}",
            set.n_features(),
            params.input_dim
        )));
    }
    let mut grads = LstmParams::zeros(params.input_dim, params.hidden_dim)?;
    let scale = 1.0 / indices.len() as f64;
    let mut loss = 0.0;
    for &i in indices {
        loss += accumulate_sample(params, set.window(i), set.target(i), scale, &mut grads);
    }
    Ok((loss * scale, grads))
}

/// Mean squared error over the whole set and its gradient.
pub fn bptt_gradients(params: &LstmParams, set: &SupervisedWindowSet) -> Result<(f64, LstmParams)> {
    let all: Vec<usize> = (0..set.len()).collect();
    bptt_gradients_indexed(params, set, &all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::cell::predict_one_step;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(d: usize, w: usize, n: usize, seed: u64) -> SupervisedWindowSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = (0..n * w * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let targets = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let names = (0..d).map(|k| format!("f{k}")).collect();
        SupervisedWindowSet::from_parts(inputs, targets, names, "f0".into(), w).unwrap()
    }

    fn loss(p: &LstmParams, set: &SupervisedWindowSet) -> f64 {
        set.windows()
            .zip(set.targets())
            .map(|(x, y)| (predict_one_step(p, x).unwrap() - y).powi(2))
            .sum::<f64>()
            / set.len() as f64
    }

    #[test]
    fn head_bias_gradient_closed_form() {
        let p = LstmParams::init(2, 3, 5).unwrap();
        let set = random_set(2, 4, 6, 1);
        let (_, g) = bptt_gradients(&p, &set).unwrap();
        let expected = set
            .windows()
            .zip(set.targets())
            .map(|(x, y)| 2.0 * (predict_one_step(&p, x).unwrap() - y))
            .sum::<f64>()
            / set.len() as f64;
        assert!((g.head_bias - expected).abs() < 1e-14);
    }

    #[test]
    fn perfect_fit_has_zero_gradient() {
        let p = LstmParams::init(2, 3, 5).unwrap();
        let mut set = random_set(2, 4, 5, 2);
        let preds: Vec<f64> = set.windows().map(|x| predict_one_step(&p, x).unwrap()).collect();
        set = SupervisedWindowSet::from_parts(
            set.windows().flatten().copied().collect(),
            preds,
            set.feature_names().to_vec(),
            "f0".into(),
            4,
        )
        .unwrap();
        let (l, g) = bptt_gradients(&p, &set).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn matches_central_differences() {
        let mut p = LstmParams::init(2, 3, 0).unwrap();
        // nonzero biases so every path is exercised
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for b in [&mut p.input_gate.b, &mut p.output_gate.b, &mut p.candidate.b] {
            b.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
        }
        let set = random_set(2, 4, 3, 0);
        let (_, g) = bptt_gradients(&p, &set).unwrap();
        let eps = 1e-5;
        for (k, grad) in g.tensors().iter().enumerate() {
            for j in 0..grad.len() {
                let mut plus = p.clone();
                plus.tensors_mut()[k][j] += eps;
                let mut minus = p.clone();
                minus.tensors_mut()[k][j] -= eps;
                let fd = (loss(&plus, &set) - loss(&minus, &set)) / (2.0 * eps);
                let denom = fd.abs().max(grad[j].abs()).max(1e-8);
                assert!(
                    (fd - grad[j]).abs() / denom < 1e-4,
                    "tensor {k} coord {j}: analytic {} fd {fd}",
                    grad[j]
                );
            }
        }
    }

    #[test]
    fn empty_batch_rejected() {
        let p = LstmParams::init(2, 3, 0).unwrap();
        let set = random_set(2, 4, 3, 0);
        assert!(bptt_gradients_indexed(&p, &set, &[]).is_err());
    }
}
