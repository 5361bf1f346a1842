use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// `out += self * x`
    #[inline]
    pub fn mul_vec_add(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (row, o) in self.data.chunks_exact(self.cols).zip(out.iter_mut()) {
            *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// `out += self^T * y`
    #[inline]
    pub fn tr_mul_vec_add(&self, y: &[f64], out: &mut [f64]) {
        for (row, &yr) in self.data.chunks_exact(self.cols).zip(y) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yr;
            }
        }
    }

    /// `self += a ⊗ b`
    #[inline]
    pub fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        for (row, &ar) in self.data.chunks_exact_mut(self.cols).zip(a) {
            for (v, bc) in row.iter_mut().zip(b) {
                *v += ar * bc;
            }
        }
    }
}

/// Weights of one gate: `act(w x + U m + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    /// Input weights, `h x d`.
    pub w: Matrix,
    /// Recurrent weights, `h x h`.
    pub u: Matrix,
    pub b: Vec<f64>,
}

impl Gate {
    fn zeros(d: usize, h: usize) -> Self {
        Gate {
            w: Matrix::zeros(h, d),
            u: Matrix::zeros(h, h),
            b: vec![0.0; h],
        }
    }

    /// Pre-activation `w x + U m + b`.
    #[inline]
    pub fn pre_activation(&self, x: &[f64], m: &[f64]) -> Vec<f64> {
        let mut z = self.b.clone();
        self.w.mul_vec_add(x, &mut z);
        self.u.mul_vec_add(m, &mut z);
        z
    }
}

/// Single-layer LSTM with a linear regression head.
///
/// Also used as the container for gradients, which have identical shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub input_gate: Gate,
    pub forget_gate: Gate,
    pub output_gate: Gate,
    pub candidate: Gate,
    pub head_weights: Vec<f64>,
    pub head_bias: f64,
}

pub const TENSOR_NAMES: [&str; 14] = [
    "w_i", "u_i", "b_i", "w_f", "u_f", "b_f", "w_o", "u_o", "b_o", "w_s", "u_s", "b_s", "v", "c_out",
];

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::Dimension(format!(
                "input_dim {input_dim} and hidden_dim {hidden_dim} must be positive"
            )));
        }
        Ok(LstmParams {
            input_dim,
            hidden_dim,
            input_gate: Gate::zeros(input_dim, hidden_dim),
            forget_gate: Gate::zeros(input_dim, hidden_dim),
            output_gate: Gate::zeros(input_dim, hidden_dim),
            candidate: Gate::zeros(input_dim, hidden_dim),
            head_weights: vec![0.0; hidden_dim],
            head_bias: 0.0,
        })
    }

    /// Weights uniform in `±1/sqrt(h)`, biases zero except the forget gate
    /// bias, which starts at one.
    pub fn init(input_dim: usize, hidden_dim: usize, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(input_dim, hidden_dim)?;
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for gate in [
            &mut p.input_gate,
            &mut p.forget_gate,
            &mut p.output_gate,
            &mut p.candidate,
        ] {
            for v in gate.w.data.iter_mut().chain(gate.u.data.iter_mut()) {
                *v = rng.random_range(-bound..=bound);
            }
        }
        for v in &mut p.head_weights {
            *v = rng.random_range(-bound..=bound);
        }
        p.forget_gate.b.fill(1.0);
        Ok(p)
    }

    /// All tensors as flat slices, in [`TENSOR_NAMES`] order.
    pub fn tensors(&self) -> [&[f64]; 14] {
        [
            &self.input_gate.w.data,
            &self.input_gate.u.data,
            &self.input_gate.b,
            &self.forget_gate.w.data,
            &self.forget_gate.u.data,
            &self.forget_gate.b,
            &self.output_gate.w.data,
            &self.output_gate.u.data,
            &self.output_gate.b,
            &self.candidate.w.data,
            &self.candidate.u.data,
            &self.candidate.b,
            &self.head_weights,
            std::slice::from_ref(&self.head_bias),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 14] {
        [
            &mut self.input_gate.w.data,
            &mut self.input_gate.u.data,
            &mut self.input_gate.b,
            &mut self.forget_gate.w.data,
            &mut self.forget_gate.u.data,
            &mut self.forget_gate.b,
            &mut self.output_gate.w.data,
            &mut self.output_gate.u.data,
            &mut self.output_gate.b,
            &mut self.candidate.w.data,
            &mut self.candidate.u.data,
            &mut self.candidate.b,
            &mut self.head_weights,
            std::slice::from_mut(&mut self.head_bias),
        ]
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= k);
        }
    }

    /// `self += k * other`
    pub fn add_scaled(&mut self, other: &LstmParams, k: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += k * y);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic() {
        assert_eq!(LstmParams::init(3, 8, 7).unwrap(), LstmParams::init(3, 8, 7).unwrap());
        assert_ne!(LstmParams::init(3, 8, 7).unwrap(), LstmParams::init(3, 8, 8).unwrap());
    }

    #[test]
    fn init_shapes_and_biases() {
        let p = LstmParams::init(3, 8, 0).unwrap();
        assert_eq!((p.input_gate.w.rows, p.input_gate.w.cols), (8, 3));
        assert_eq!((p.input_gate.u.rows, p.input_gate.u.cols), (8, 8));
        assert_eq!(p.forget_gate.b, vec![1.0; 8]);
        assert!(p.input_gate.b.iter().all(|&b| b == 0.0));
        assert_eq!(p.head_bias, 0.0);
        let bound = 1.0 / 8f64.sqrt();
        assert!(p.candidate.u.data.iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(matches!(LstmParams::init(0, 4, 0), Err(Error::Dimension(_))));
        assert!(matches!(LstmParams::init(2, 0, 0), Err(Error::Dimension(_))));
    }
}
