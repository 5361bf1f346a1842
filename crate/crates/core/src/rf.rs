//! Random-forest regression over CART trees.
//!
//! Each tree sees a bootstrap resample of the training rows drawn from its
//! own ChaCha stream, picks a random feature subset at every node, and
//! splits on the midpoint threshold that minimizes the children's summed
//! squared error. The forest predicts the unweighted mean of its trees.

use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Candidate splits whose error is within this relative margin of the best so
/// far count as ties and lose to the earlier candidate.
pub const SPLIT_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or `min_samples_leaf` binds.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// `None` means `ceil(d / 3)`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn features_for(&self, d: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| d.div_ceil(3))
            .clamp(1, d.max(1))
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        if let Some(k) = self.features_per_split {
            if k == 0 || k > d {
                return Err(Error::Config(format!("features_per_split {k} not in [1, {d}]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Split,
    Leaf,
}

/// One node of the flattened tree. Split nodes route `x[feature] <=
/// threshold` to `left`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub kind: NodeKind,
    pub feature: Option<usize>,
    pub threshold: Option<f64>,
    pub left: Option<usize>,
    pub right: Option<usize>,
    /// Mean of the training targets reaching this node.
    pub value: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub dim: usize,
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Dimension(format!(
                "input of length {} for {}",
                x.len(),
                self.dim
            )));
        }
        Ok(self.predict_unchecked(x))
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let mut node = &self.nodes[0];
        while let (Some(f), Some(t), Some(l), Some(r)) = (node.feature, node.threshold, node.left, node.right) {
            node = &self.nodes[if x[f] <= t { l } else { r }];
        }
        node.value
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &RegressionTree, id: usize) -> usize {
            match (t.nodes[id].left, t.nodes[id].right) {
                (Some(l), Some(r)) => 1 + walk(t, l).max(walk(t, r)),
                _ => 0,
            }
        }
        walk(self, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Leaf)
    }
}

fn mean(y: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

struct Grower<'a, R: Rng> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    max_depth: Option<usize>,
    min_leaf: usize,
    n_features: usize,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    error: f64,
}

impl<R: Rng> Grower<'_, R> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            id,
            kind: NodeKind::Leaf,
            feature: None,
            threshold: None,
            left: None,
            right: None,
            value: mean(self.y, &idx),
            count: idx.len(),
        });
        let pure = idx.iter().all(|&i| self.y[i] == self.y[idx[0]]);
        let depth_ok = self.max_depth.is_none_or(|m| depth < m);
        if pure || !depth_ok || idx.len() < 2 * self.min_leaf {
            return id;
        }
        let Some(best) = self.best_split(&idx) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x[i][best.feature] <= best.threshold);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        let node = &mut self.nodes[id];
        node.kind = NodeKind::Split;
        node.feature = Some(best.feature);
        node.threshold = Some(best.threshold);
        node.left = Some(l);
        node.right = Some(r);
        id
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<BestSplit> {
        let d = self.x[0].len();
        let mut features = sample(self.rng, d, self.n_features).into_vec();
        features.sort_unstable();
        let n = idx.len();
        let mut best: Option<BestSplit> = None;
        let mut order = idx.to_vec();
        for f in features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let total: f64 = order.iter().map(|&i| self.y[i]).sum();
            let total_sq: f64 = order.iter().map(|&i| self.y[i] * self.y[i]).sum();
            let (mut s, mut sq) = (0.0, 0.0);
            for k in 0..n - 1 {
                let yi = self.y[order[k]];
                s += yi;
                sq += yi * yi;
                let (lo, hi) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                let nl = k + 1;
                let nr = n - nl;
                if lo == hi || nl < self.min_leaf || nr < self.min_leaf {
                    continue;
                }
                let left = (sq - s * s / nl as f64).max(0.0);
                let rs = total - s;
                let right = ((total_sq - sq) - rs * rs / nr as f64).max(0.0);
                let error = left + right;
                let better = best
                    .as_ref()
                    .is_none_or(|b| error < b.error - SPLIT_TIE_TOLERANCE * b.error.abs().max(1e-300));
                if better {
                    let mid = 0.5 * (lo + hi);
                    best = Some(BestSplit {
                        feature: f,
                        // adjacent floats can round the midpoint up to `hi`
                        threshold: if mid < hi { mid } else { lo },
                        error,
                    });
                }
            }
        }
        best
    }
}

fn check_data(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} rows vs {} targets", x.len(), y.len())));
    }
    if x.is_empty() {
        return Err(Error::InsufficientData("no training rows".into()));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension("empty or ragged input rows".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NumericInput("training data".into()));
    }
    Ok(d)
}

/// Grows one CART tree on the rows listed in `rows` (repeats allowed).
pub fn fit_tree_on<R: Rng>(
    x: &[Vec<f64>],
    y: &[f64],
    rows: Vec<usize>,
    config: &ForestConfig,
    rng: &mut R,
) -> Result<RegressionTree> {
    let d = check_data(x, y)?;
    config.validate(d)?;
    if rows.is_empty() {
        return Err(Error::InsufficientData("no training rows".into()));
    }
    let mut g = Grower {
        x,
        y,
        max_depth: config.max_depth,
        min_leaf: config.min_samples_leaf,
        n_features: config.features_for(d),
        rng,
        nodes: Vec::new(),
    };
    g.grow(rows, 0);
    Ok(RegressionTree { dim: d, nodes: g.nodes })
}

/// Grows one CART tree on every row.
pub fn fit_tree<R: Rng>(x: &[Vec<f64>], y: &[f64], config: &ForestConfig, rng: &mut R) -> Result<RegressionTree> {
    fit_tree_on(x, y, (0..x.len()).collect(), config, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<RegressionTree>,
    pub config: ForestConfig,
    /// ChaCha stream each tree drew its bootstrap and feature subsets from,
    /// under the forest seed.
    pub tree_streams: Vec<u64>,
}

impl Forest {
    /// Unweighted mean of the tree predictions.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let dim = self.trees[0].dim;
        if x.len() != dim {
            return Err(Error::Dimension(format!("input of length {} for {dim}", x.len())));
        }
        Ok(self.trees.iter().map(|t| t.predict_unchecked(x)).sum::<f64>() / self.trees.len() as f64)
    }

    pub fn tree_predictions(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.trees.iter().map(|t| t.predict(x)).collect()
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

/// Trees are grown in parallel; each one only touches its own stream, so the
/// result does not depend on scheduling.
pub fn fit_forest(x: &[Vec<f64>], y: &[f64], config: &ForestConfig) -> Result<Forest> {
    let d = check_data(x, y)?;
    config.validate(d)?;
    let n = x.len();
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64);
            let rows = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree_on(x, y, rows, config, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest {
        trees,
        config: config.clone(),
        tree_streams: (0..config.n_trees as u64).collect(),
    })
}
