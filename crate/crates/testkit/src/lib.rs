//! Slow, obviously-correct reference solvers for cross-checking the
//! production models. Nothing here shares code with `ghforecast`.

pub mod svr {
    /// Solution of the epsilon-SVR dual.
    #[derive(Debug, Clone)]
    pub struct DualSolution {
        pub beta: Vec<f64>,
        pub bias: f64,
        pub objective: f64,
    }

    pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
        (-gamma * d2).exp()
    }

    /// 0.5 b'Kb + eps |b|_1 - y'b
    pub fn objective(k: &[Vec<f64>], y: &[f64], beta: &[f64], eps: f64) -> f64 {
        let n = y.len();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += beta[i] * beta[j] * k[i][j];
            }
        }
        0.5 * quad + eps * beta.iter().map(|b| b.abs()).sum::<f64>()
            - y.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Euclidean projection onto {0 <= v <= c, sum(z v) = 0} by bisection on
    /// the multiplier of the equality.
    fn project(v: &[f64], z: &[f64], c: f64) -> Vec<f64> {
        let at = |lam: f64| -> (Vec<f64>, f64) {
            let p: Vec<f64> = v.iter().zip(z).map(|(vi, zi)| (vi - lam * zi).clamp(0.0, c)).collect();
            let s = p.iter().zip(z).map(|(pi, zi)| pi * zi).sum();
            (p, s)
        };
        let (mut lo, mut hi) = (-1e6, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if at(mid).1 > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(0.5 * (lo + hi)).0
    }

    /// Accelerated projected gradient on the 2n-variable form
    /// beta = a - a*, 0 <= a, a* <= C, sum(beta) = 0.
    pub fn solve(x: &[Vec<f64>], y: &[f64], c: f64, gamma: f64, eps: f64, iterations: usize) -> DualSolution {
        let n = y.len();
        let k: Vec<Vec<f64>> = x.iter().map(|a| x.iter().map(|b| rbf(a, b, gamma)).collect()).collect();
        let z: Vec<f64> = (0..2 * n).map(|i| if i < n { 1.0 } else { -1.0 }).collect();
        let beta_of = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| v[i] - v[n + i]).collect() };
        let grad = |v: &[f64]| -> Vec<f64> {
            let beta = beta_of(v);
            let kb: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k[i][j] * beta[j]).sum()).collect();
            (0..2 * n)
                .map(|i| {
                    let j = i % n;
                    z[i] * (kb[j] - y[j]) + eps
                })
                .collect()
        };
        // Lipschitz bound: 2 * trace(K) >= 2 * lambda_max(K)
        let lip = 2.0 * (0..n).map(|i| k[i][i]).sum::<f64>();
        let step = 1.0 / lip;
        let mut v = vec![0.0; 2 * n];
        let mut w = v.clone();
        let mut t = 1.0f64;
        for _ in 0..iterations {
            let g = grad(&w);
            let moved: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - step * gi).collect();
            let next = project(&moved, &z, c);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            w = next
                .iter()
                .zip(&v)
                .map(|(a, b)| a + (t - 1.0) / t_next * (a - b))
                .collect();
            v = next;
            t = t_next;
        }
        let beta = beta_of(&v);
        let f: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k[i][j] * beta[j]).sum()).collect();

        // bias from the KKT conditions
        let tol = 1e-7 * c.max(1.0);
        let mut free = Vec::new();
        let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..n {
            let r = y[i] - f[i];
            let b = beta[i];
            if b > tol && b < c - tol {
                free.push(r - eps);
            } else if b < -tol && b > -c + tol {
                free.push(r + eps);
            } else if b >= c - tol {
                upper = upper.min(r - eps);
            } else if b <= -c + tol {
                lower = lower.max(r + eps);
            } else {
                lower = lower.max(r - eps);
                upper = upper.min(r + eps);
            }
        }
        let bias = if free.is_empty() {
            0.5 * (lower + upper)
        } else {
            free.iter().sum::<f64>() / free.len() as f64
        };
        let objective = objective(&k, y, &beta, eps);
        DualSolution { beta, bias, objective }
    }

    pub fn predict(x: &[Vec<f64>], sol: &DualSolution, gamma: f64, q: &[f64]) -> f64 {
        x.iter()
            .zip(&sol.beta)
            .map(|(xi, b)| b * rbf(xi, q, gamma))
            .sum::<f64>()
            + sol.bias
    }
}

pub mod cart {
    /// Sum of squared deviations from the mean, two-pass.
    pub fn sse(values: &[f64]) -> f64 {
        if values.is_empty() {
            return 0.0;
        }
        let m = values.iter().sum::<f64>() / values.len() as f64;
        values.iter().map(|v| (v - m) * (v - m)).sum()
    }

    /// Training rows grouped by the leaf they land in.
    pub type Partition = Vec<Vec<usize>>;

    /// Loss of a partition: summed within-group SSE.
    pub fn partition_loss(y: &[f64], p: &Partition) -> f64 {
        p.iter()
            .map(|g| sse(&g.iter().map(|&i| y[i]).collect::<Vec<_>>()))
            .sum()
    }

    /// Canonical form: each group sorted, groups sorted.
    pub fn canonical(mut p: Partition) -> Partition {
        for g in p.iter_mut() {
            g.sort_unstable();
        }
        p.sort();
        p
    }

    /// Greedy CART by brute force: at each node every (feature, cut between
    /// distinct values) is scored with a fresh two-pass SSE, and the lowest
    /// wins. A later candidate must beat the incumbent by more than
    /// `tie` (relative) to replace it. Returns the leaf partition.
    pub fn greedy(x: &[Vec<f64>], y: &[f64], max_depth: usize, tie: f64) -> Partition {
        let rows: Vec<usize> = (0..y.len()).collect();
        let mut out = Vec::new();
        grow(x, y, rows, max_depth, tie, &mut out);
        out
    }

    #[allow(clippy::needless_range_loop)]
    fn grow(x: &[Vec<f64>], y: &[f64], rows: Vec<usize>, depth_left: usize, tie: f64, out: &mut Partition) {
        let pure = rows.iter().all(|&i| y[i] == y[rows[0]]);
        if depth_left == 0 || rows.len() < 2 || pure {
            out.push(rows);
            return;
        }
        let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
        for f in 0..x[0].len() {
            let mut cuts: Vec<f64> = rows.iter().map(|&i| x[i][f]).collect();
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            for w in cuts.windows(2) {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][f] <= w[0]);
                let loss = sse(&l.iter().map(|&i| y[i]).collect::<Vec<_>>())
                    + sse(&r.iter().map(|&i| y[i]).collect::<Vec<_>>());
                let better = match &best {
                    None => true,
                    Some((b, _, _)) => loss < b - tie * b.abs().max(1e-300),
                };
                if better {
                    best = Some((loss, l, r));
                }
            }
        }
        match best {
            None => out.push(rows),
            Some((_, l, r)) => {
                grow(x, y, l, depth_left - 1, tie, out);
                grow(x, y, r, depth_left - 1, tie, out);
            }
        }
    }

    /// Lowest loss over every tree of depth at most `max_depth`, not just the
    /// greedy one.
    pub fn optimal_loss(x: &[Vec<f64>], y: &[f64], rows: &[usize], max_depth: usize) -> f64 {
        let here = sse(&rows.iter().map(|&i| y[i]).collect::<Vec<_>>());
        if max_depth == 0 || rows.len() < 2 {
            return here;
        }
        let mut best = here;
        for f in 0..x[0].len() {
            let mut cuts: Vec<f64> = rows.iter().map(|&i| x[i][f]).collect();
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            for w in cuts.windows(2) {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][f] <= w[0]);
                let loss = optimal_loss(x, y, &l, max_depth - 1) + optimal_loss(x, y, &r, max_depth - 1);
                best = best.min(loss);
            }
        }
        best
    }
}

pub mod stats {
    pub fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let (ma, mb) = (mean(a), mean(b));
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    /// Mean of ((a - f) / a)^2, written out directly.
    pub fn relative_mse(actual: &[f64], predicted: &[f64]) -> f64 {
        let terms: Vec<f64> = actual
            .iter()
            .zip(predicted)
            .filter(|(a, _)| a.abs() >= 1e-12)
            .map(|(a, f)| ((a - f) / a).powi(2))
            .collect();
        mean(&terms)
    }
}
