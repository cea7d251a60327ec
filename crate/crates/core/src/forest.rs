//! Bootstrap-aggregated CART regression trees for the POD metamodel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Forest hyperparameters. `max_depth = None` grows trees until the
/// `min_leaf` constraint stops them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestHyper {
    pub n_trees: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    /// Bootstrap sample size as a fraction of the training set; 0 disables
    /// resampling and every tree sees the full set.
    pub bootstrap_ratio: f64,
}

impl Default for ForestHyper {
    fn default() -> Self {
        ForestHyper { n_trees: 100, min_leaf: 2, max_depth: None, bootstrap_ratio: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum TreeNode {
    Leaf { value: f64 },
    Split { dim: usize, threshold: f64, left: usize, right: usize },
}

/// One CART regression tree, nodes stored in a flat arena.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { dim, threshold, left, right } => {
                    idx = if x[*dim] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// A trained forest for one scalar regression target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub n_features: usize,
    pub hyper: ForestHyper,
    pub seed: u64,
}

impl Forest {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        sum / self.trees.len() as f64
    }
}

/// Fit a forest on rows `x` (row-major, `n_features` wide) against scalar
/// targets `y`. All features are candidates at every split.
pub fn fit_forest(x: &[f64], y: &[f64], n_features: usize, hyper: &ForestHyper, seed: u64) -> Result<Forest> {
    if n_features == 0 || x.len() % n_features != 0 {
        return Err(Error::shape(format!(
            "feature matrix length {} is not a multiple of {n_features}",
            x.len()
        )));
    }
    let n = x.len() / n_features;
    if n != y.len() {
        return Err(Error::shape(format!("{n} rows vs {} targets", y.len())));
    }
    if n < 2 {
        return Err(Error::config(format!("need >= 2 training rows, got {n}")));
    }
    if hyper.n_trees == 0 || hyper.min_leaf == 0 {
        return Err(Error::config("n_trees and min_leaf must be >= 1".to_string()));
    }
    let mut trees = Vec::with_capacity(hyper.n_trees);
    for t in 0..hyper.n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e3779b97f4a7c15u64.wrapping_mul(t as u64 + 1)));
        let indices: Vec<usize> = if hyper.bootstrap_ratio > 0.0 {
            let m = ((n as f64 * hyper.bootstrap_ratio).round() as usize).max(1);
            (0..m).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut builder = TreeBuilder { x, y, n_features, hyper: *hyper, nodes: Vec::new() };
        builder.grow(indices, 0);
        trees.push(Tree { nodes: builder.nodes });
    }
    Ok(Forest { trees, n_features, hyper: *hyper, seed })
}

struct TreeBuilder<'a> {
    x: &'a [f64],
    y: &'a [f64],
    n_features: usize,
    hyper: ForestHyper,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    fn feature(&self, row: usize, dim: usize) -> f64 {
        self.x[row * self.n_features + dim]
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let mean = rows.iter().map(|&r| self.y[r]).sum::<f64>() / rows.len() as f64;
        let depth_stop = self.hyper.max_depth.is_some_and(|d| depth >= d);
        if rows.len() < 2 * self.hyper.min_leaf || depth_stop {
            self.nodes.push(TreeNode::Leaf { value: mean });
            return self.nodes.len() - 1;
        }
        match self.best_split(&rows) {
            None => {
                self.nodes.push(TreeNode::Leaf { value: mean });
                self.nodes.len() - 1
            }
            Some((dim, threshold)) => {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                    rows.into_iter().partition(|&r| self.feature(r, dim) <= threshold);
                let idx = self.nodes.len();
                self.nodes.push(TreeNode::Split { dim, threshold, left: 0, right: 0 });
                let left = self.grow(left_rows, depth + 1);
                let right = self.grow(right_rows, depth + 1);
                if let TreeNode::Split { left: l, right: r, .. } = &mut self.nodes[idx] {
                    *l = left;
                    *r = right;
                }
                idx
            }
        }
    }

    /// Exhaustive SSE-minimizing split over all features and all midpoints
    /// between consecutive distinct sorted values.
    fn best_split(&self, rows: &[usize]) -> Option<(usize, f64)> {
        let n = rows.len();
        let total_sum: f64 = rows.iter().map(|&r| self.y[r]).sum();
        let total_sq: f64 = rows.iter().map(|&r| self.y[r] * self.y[r]).sum();
        let base_sse = total_sq - total_sum * total_sum / n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<usize> = Vec::with_capacity(n);
        for dim in 0..self.n_features {
            order.clear();
            order.extend_from_slice(rows);
            order.sort_by(|&a, &b| {
                self.feature(a, dim)
                    .partial_cmp(&self.feature(b, dim))
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for k in 0..n - 1 {
                let r = order[k];
                left_sum += self.y[r];
                left_sq += self.y[r] * self.y[r];
                let n_left = k + 1;
                let n_right = n - n_left;
                if n_left < self.hyper.min_leaf || n_right < self.hyper.min_leaf {
                    continue;
                }
                let xv = self.feature(r, dim);
                let xn = self.feature(order[k + 1], dim);
                if xn <= xv {
                    continue;
                }
                let right_sum = total_sum - left_sum;
                let right_sq = total_sq - left_sq;
                let sse = (left_sq - left_sum * left_sum / n_left as f64)
                    + (right_sq - right_sum * right_sum / n_right as f64);
                if best.map_or(sse < base_sse - 1e-12 * base_sse.abs().max(1e-300), |(b, _, _)| sse < b) {
                    best = Some((sse, dim, 0.5 * (xv + xn)));
                }
            }
        }
        best.map(|(_, dim, thr)| (dim, thr))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_target_predicts_constant() {
        let x: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let y = vec![7.0; 20];
        let f = fit_forest(&x, &y, 1, &ForestHyper::default(), 0).unwrap();
        for k in 0..40 {
            assert!((f.predict(&[k as f64 * 0.5]) - 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_deep_tree_memorizes_distinct_inputs() {
        let hyper = ForestHyper { n_trees: 1, min_leaf: 1, max_depth: None, bootstrap_ratio: 0.0 };
        let x: Vec<f64> = (0..16).map(|k| k as f64).collect();
        let y: Vec<f64> = (0..16).map(|k| (k as f64 * 1.7).sin()).collect();
        let f = fit_forest(&x, &y, 1, &hyper, 0).unwrap();
        for k in 0..16 {
            assert!(
                (f.predict(&[k as f64]) - y[k]).abs() < 1e-12,
                "row {k}: {} vs {}",
                f.predict(&[k as f64]),
                y[k]
            );
        }
    }

    #[test]
    fn recovers_step_function_plateaus() {
        // Piecewise-constant target on a threshold of the first feature.
        let mut rng_state = 0x12345u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng_state >> 33) as f64 / (1u64 << 31) as f64
        };
        let n = 100;
        let mut x = Vec::with_capacity(2 * n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let omega = 4750.0 + 500.0 * next();
            let noise_dim = next();
            x.push(omega);
            x.push(noise_dim);
            y.push(if omega < 5000.0 { 2.0 } else { 10.0 });
        }
        let f = fit_forest(&x, &y, 2, &ForestHyper::default(), 9).unwrap();
        let lo = f.predict(&[4800.0, 0.5]);
        let hi = f.predict(&[5200.0, 0.5]);
        assert!((lo - 2.0).abs() / 2.0 < 0.05, "low plateau {lo}");
        assert!((hi - 10.0).abs() / 10.0 < 0.05, "high plateau {hi}");
    }

    #[test]
    fn deterministic_given_seed() {
        let x: Vec<f64> = (0..30).map(|k| (k as f64 * 0.3).sin()).collect();
        let y: Vec<f64> = (0..30).map(|k| (k as f64 * 0.7).cos()).collect();
        let a = fit_forest(&x, &y, 1, &ForestHyper::default(), 4).unwrap();
        let b = fit_forest(&x, &y, 1, &ForestHyper::default(), 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_empty_or_tiny_training_sets() {
        assert!(fit_forest(&[], &[], 1, &ForestHyper::default(), 0).is_err());
        assert!(fit_forest(&[1.0], &[1.0], 1, &ForestHyper::default(), 0).is_err());
    }
}
