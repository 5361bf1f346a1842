//! Epsilon-insensitive support vector regression with an RBF kernel.
//!
//! The dual is solved over `2n` variables `a = [alpha; alpha*]` with signs
//! `z = [+1; -1]`, minimizing `1/2 a'Qa + p'a` subject to `z'a = 0` and
//! `0 <= a <= C`, where `Q_st = z_s z_t K(x_s, x_t)` and
//! `p = [eps - y; eps + y]`. Each iteration picks the maximal violating pair
//! and solves the two-variable subproblem analytically. The fitted function
//! is `f(x) = sum_i beta_i K(x_i, x) + b` with `beta = alpha - alpha*`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrConfig {
    #[serde(rename = "C")]
    pub c: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Stop once the maximal violating pair gap is at most this.
    pub tolerance: f64,
    /// Iteration budget in units of `n` pair updates.
    pub max_passes: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        SvrConfig {
            c: 1.0,
            gamma: 0.1,
            epsilon: 0.1,
            tolerance: 1e-3,
            max_passes: 200,
        }
    }
}

impl SvrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("C must be positive, got {}", self.c)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 || self.max_passes == 0 {
            return Err(Error::Config("tolerance and max_passes must be positive".into()));
        }
        Ok(())
    }
}

pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("{} vs {}", a.len(), b.len())));
    }
    Ok(rbf(a, b, gamma))
}

#[inline]
fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Full kernel matrix of the rows of `x`, row-major.
pub fn kernel_matrix(x: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf(&x[i], &x[j], gamma);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// Position of each support vector in the training set.
    pub support_indices: Vec<usize>,
    /// `beta_i = alpha_i - alpha*_i`, each in `[-C, C]`.
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub config: SvrConfig,
    pub converged: bool,
    pub iterations: usize,
    /// Minimized dual objective `1/2 b'Kb + eps |b|_1 - y'b`.
    pub dual_objective: f64,
    /// Maximal violating pair gap at the end of each pass.
    pub gap_history: Vec<f64>,
}

impl SvrModel {
    /// Model with every coefficient zero and the given bias.
    pub fn zero(config: SvrConfig, bias: f64) -> Self {
        SvrModel {
            support_vectors: Vec::new(),
            support_indices: Vec::new(),
            coefficients: Vec::new(),
            bias,
            config,
            converged: false,
            iterations: 0,
            dual_objective: 0.0,
            gap_history: Vec::new(),
        }
    }

    pub fn dim(&self) -> Option<usize> {
        self.support_vectors.first().map(|v| v.len())
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if let Some(d) = self.dim() {
            if d != x.len() {
                return Err(Error::Dimension(format!("input of length {} for {d}", x.len())));
            }
        }
        Ok(self.bias
            + self
                .support_vectors
                .iter()
                .zip(&self.coefficients)
                .map(|(sv, b)| b * rbf(sv, x, self.config.gamma))
                .sum::<f64>())
    }

    /// Coefficient of training point `i` (zero when it is not a support
    /// vector).
    pub fn coefficient_of(&self, i: usize) -> f64 {
        self.support_indices
            .iter()
            .position(|&s| s == i)
            .map_or(0.0, |k| self.coefficients[k])
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

fn check_data(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} rows vs {} targets", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(format!("{} training points, need 2", x.len())));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension("ragged input rows".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NumericInput("training data".into()));
    }
    Ok(d)
}

struct Solver<'a> {
    n: usize,
    k: &'a [f64],
    c: f64,
    /// `a[t]`, `t < n` is alpha, `t >= n` is alpha*.
    a: Vec<f64>,
    grad: Vec<f64>,
}

impl<'a> Solver<'a> {
    #[inline]
    fn sign(&self, t: usize) -> f64 {
        if t < self.n {
            1.0
        } else {
            -1.0
        }
    }

    #[inline]
    fn q(&self, s: usize, t: usize) -> f64 {
        self.sign(s) * self.sign(t) * self.k[(s % self.n) * self.n + t % self.n]
    }

    fn in_up(&self, t: usize) -> bool {
        if t < self.n {
            self.a[t] < self.c
        } else {
            self.a[t] > 0.0
        }
    }

    fn in_low(&self, t: usize) -> bool {
        if t < self.n {
            self.a[t] > 0.0
        } else {
            self.a[t] < self.c
        }
    }

    /// Maximal violating pair `(i, j)` and its gap `m - M`, ties to the
    /// lowest index.
    fn select(&self) -> (Option<usize>, Option<usize>, f64) {
        let (mut i, mut m) = (None, f64::NEG_INFINITY);
        let (mut j, mut big_m) = (None, f64::INFINITY);
        for t in 0..2 * self.n {
            let v = -self.sign(t) * self.grad[t];
            if self.in_up(t) && v > m {
                m = v;
                i = Some(t);
            }
            if self.in_low(t) && v < big_m {
                big_m = v;
                j = Some(t);
            }
        }
        (i, j, m - big_m)
    }

    fn update_pair(&mut self, i: usize, j: usize) {
        let c = self.c;
        let (old_i, old_j) = (self.a[i], self.a[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        let qii = self.q(i, i);
        let qjj = self.q(j, j);
        let qij = self.q(i, j);
        if self.sign(i) != self.sign(j) {
            let quad = (qii + qjj + 2.0 * qij).max(TAU);
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (qii + qjj - 2.0 * qij).max(TAU);
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.a[i] = ai;
        self.a[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        if di != 0.0 || dj != 0.0 {
            for t in 0..2 * self.n {
                self.grad[t] += self.q(t, i) * di + self.q(t, j) * dj;
            }
        }
    }

    fn bias(&self) -> f64 {
        let mut free_sum = 0.0;
        let mut free = 0usize;
        for t in 0..2 * self.n {
            if self.a[t] > 0.0 && self.a[t] < self.c {
                free_sum += -self.sign(t) * self.grad[t];
                free += 1;
            }
        }
        if free > 0 {
            return free_sum / free as f64;
        }
        let mut m = f64::NEG_INFINITY;
        let mut big_m = f64::INFINITY;
        for t in 0..2 * self.n {
            let v = -self.sign(t) * self.grad[t];
            if self.in_up(t) {
                m = m.max(v);
            }
            if self.in_low(t) {
                big_m = big_m.min(v);
            }
        }
        match (m.is_finite(), big_m.is_finite()) {
            (true, true) => 0.5 * (m + big_m),
            (true, false) => m,
            (false, true) => big_m,
            (false, false) => 0.0,
        }
    }
}

/// Minimized dual objective for coefficients `beta`.
pub fn dual_objective(k: &[f64], y: &[f64], beta: &[f64], epsilon: f64) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        if beta[i] == 0.0 {
            continue;
        }
        let row = &k[i * n..(i + 1) * n];
        quad += beta[i] * row.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
    }
    0.5 * quad + epsilon * beta.iter().map(|b| b.abs()).sum::<f64>()
        - y.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()
}

/// Fits an epsilon-SVR by sequential minimal optimization.
///
/// Hitting the iteration budget is not an error; the model comes back with
/// `converged == false`.
pub fn fit_smo(x: &[Vec<f64>], y: &[f64], config: &SvrConfig) -> Result<SvrModel> {
    config.validate()?;
    check_data(x, y)?;
    let n = x.len();
    let k = kernel_matrix(x, config.gamma);
    let grad = (0..2 * n)
        .map(|t| {
            if t < n {
                config.epsilon - y[t]
            } else {
                config.epsilon + y[t - n]
            }
        })
        .collect();
    let mut s = Solver {
        n,
        k: &k,
        c: config.c,
        a: vec![0.0; 2 * n],
        grad,
    };
    let budget = config.max_passes.saturating_mul(n);
    let mut iterations = 0;
    let mut converged = false;
    let mut gap_history = Vec::new();
    loop {
        let (i, j, gap) = s.select();
        if iterations % n == 0 {
            gap_history.push(gap.max(0.0));
        }
        let (Some(i), Some(j)) = (i, j) else {
            converged = true;
            break;
        };
        if gap <= config.tolerance {
            converged = true;
            break;
        }
        if iterations >= budget {
            break;
        }
        s.update_pair(i, j);
        iterations += 1;
    }
    let bias = s.bias();
    let beta: Vec<f64> = (0..n).map(|i| s.a[i] - s.a[i + n]).collect();
    let dual = dual_objective(&k, y, &beta, config.epsilon);
    let support_indices: Vec<usize> = (0..n).filter(|&i| beta[i] != 0.0).collect();
    Ok(SvrModel {
        support_vectors: support_indices.iter().map(|&i| x[i].clone()).collect(),
        coefficients: support_indices.iter().map(|&i| beta[i]).collect(),
        support_indices,
        bias,
        config: config.clone(),
        converged,
        iterations,
        dual_objective: dual,
        gap_history,
    })
}

/// Largest epsilon-SVR KKT violation of `model` over the training points,
/// measured on the residual `y - f(x)` against its required value or bound.
pub fn kkt_violation(model: &SvrModel, x: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    check_data(x, y)?;
    let c = model.config.c;
    let eps = model.config.epsilon;
    let bound_tol = 1e-12 * c.max(1.0);
    let mut worst = 0.0f64;
    for (i, (xi, yi)) in x.iter().zip(y).enumerate() {
        let r = yi - model.predict(xi)?;
        let b = model.coefficient_of(i);
        let v = if b.abs() <= bound_tol {
            (r.abs() - eps).max(0.0)
        } else if b >= c - bound_tol {
            (eps - r).max(0.0)
        } else if b <= -c + bound_tol {
            (r + eps).max(0.0)
        } else if b > 0.0 {
            (r - eps).abs()
        } else {
            (r + eps).abs()
        };
        worst = worst.max(v);
    }
    Ok(worst)
}
