use super::params::LstmParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        LstmState {
            hidden: vec![0.0; hidden_dim],
            cell: vec![0.0; hidden_dim],
        }
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Activations of one time step, kept for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    pub input_gate: Vec<f64>,
    pub forget_gate: Vec<f64>,
    pub output_gate: Vec<f64>,
    pub candidate: Vec<f64>,
    pub cell: Vec<f64>,
    pub cell_tanh: Vec<f64>,
    pub hidden: Vec<f64>,
}

/// Per-step activations of a forward pass, one entry per window step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForwardCache {
    pub steps: Vec<StepCache>,
}

impl ForwardCache {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

fn step(params: &LstmParams, x: &[f64], prev: &LstmState) -> StepCache {
    let m = &prev.hidden;
    let mut input_gate = params.input_gate.pre_activation(x, m);
    let mut forget_gate = params.forget_gate.pre_activation(x, m);
    let mut output_gate = params.output_gate.pre_activation(x, m);
    let mut candidate = params.candidate.pre_activation(x, m);
    input_gate.iter_mut().for_each(|z| *z = sigmoid(*z));
    forget_gate.iter_mut().for_each(|z| *z = sigmoid(*z));
    output_gate.iter_mut().for_each(|z| *z = sigmoid(*z));
    candidate.iter_mut().for_each(|z| *z = z.tanh());
    let cell: Vec<f64> = (0..params.hidden_dim)
        .map(|k| prev.cell[k] * forget_gate[k] + candidate[k] * input_gate[k])
        .collect();
    let cell_tanh: Vec<f64> = cell.iter().map(|c| c.tanh()).collect();
    let hidden = output_gate.iter().zip(&cell_tanh).map(|(o, t)| o * t).collect();
    StepCache {
        input_gate,
        forget_gate,
        output_gate,
        candidate,
        cell,
        cell_tanh,
        hidden,
    }
}

/// One LSTM update: gated cell write, then `m = o * tanh(c)`.
pub fn cell_step(params: &LstmParams, x: &[f64], prev: &LstmState) -> Result<LstmState> {
    if x.len() != params.input_dim {
        return Err(Error::Dimension(format!(
            "input of length {} for input_dim {}",
            x.len(),
            params.input_dim
        )));
    }
    if prev.hidden.len() != params.hidden_dim || prev.cell.len() != params.hidden_dim {
        return Err(Error::Dimension("state does not match hidden_dim".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericInput("cell input".into()));
    }
    let s = step(params, x, prev);
    Ok(LstmState {
        hidden: s.hidden,
        cell: s.cell,
    })
}

fn check_window(params: &LstmParams, window: &[f64]) -> Result<usize> {
    if window.is_empty() {
        return Err(Error::InsufficientData("empty window".into()));
    }
    if !window.len().is_multiple_of(params.input_dim) {
        return Err(Error::Dimension(format!(
            "window of {} values is not a multiple of input_dim {}",
            window.len(),
            params.input_dim
        )));
    }
    if window.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericInput("window".into()));
    }
    Ok(window.len() / params.input_dim)
}

/// Runs the window (flat, time-major) from a zero state and applies the
/// regression head to the final hidden state.
pub fn forward(params: &LstmParams, window: &[f64]) -> Result<(f64, ForwardCache)> {
    check_window(params, window)?;
    Ok(forward_unchecked(params, window))
}

pub(crate) fn forward_unchecked(params: &LstmParams, window: &[f64]) -> (f64, ForwardCache) {
    let mut state = LstmState::zeros(params.hidden_dim);
    let mut steps = Vec::with_capacity(window.len() / params.input_dim);
    for x in window.chunks_exact(params.input_dim) {
        let s = step(params, x, &state);
        state.hidden.clone_from(&s.hidden);
        state.cell.clone_from(&s.cell);
        steps.push(s);
    }
    (head(params, &state.hidden), ForwardCache { steps })
}

fn head(params: &LstmParams, hidden: &[f64]) -> f64 {
    params.head_bias + params.head_weights.iter().zip(hidden).map(|(v, m)| v * m).sum::<f64>()
}

/// Prediction without keeping activations.
pub fn predict_one_step(params: &LstmParams, window: &[f64]) -> Result<f64> {
    check_window(params, window)?;
    Ok(predict_unchecked(params, window))
}

pub(crate) fn predict_unchecked(params: &LstmParams, window: &[f64]) -> f64 {
    let mut state = LstmState::zeros(params.hidden_dim);
    for x in window.chunks_exact(params.input_dim) {
        let s = step(params, x, &state);
        state = LstmState {
            hidden: s.hidden,
            cell: s.cell,
        };
    }
    head(params, &state.hidden)
}
