//! Regression tree (CART): axis-aligned splits minimizing the summed squared
//! error of child means, grown until the leaf-size or depth limits bind.
//!
//! The implementation is deterministic: features are scanned in order,
//! candidate thresholds in ascending order, and only a strictly better score
//! replaces the incumbent, so ties resolve to the first candidate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Growth limits. Defaults: unlimited depth, split nodes of 2+, leaves of 5+.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: None, min_samples_split: 2, min_samples_leaf: 5 }
    }
}

impl TreeParams {
    pub fn with_min_leaf(min_samples_leaf: usize) -> Self {
        Self { min_samples_leaf, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf { value: f64 },
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Fitted regression tree. Leaf values are training-target means, so every
/// prediction lies within the training target range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    params: TreeParams,
    nodes: Vec<Node>,
}

impl RegressionTree {
    /// Grows a tree on `(x, y)`. Errors when shapes disagree or there are
    /// fewer rows than one leaf requires.
    pub fn fit(x: &Mat, y: &[f64], params: TreeParams) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::Data(format!(
                "feature matrix has {} rows but target has {}",
                x.rows(),
                y.len()
            )));
        }
        if params.min_samples_leaf == 0 || params.min_samples_split < 2 {
            return Err(Error::Config(
                "min_samples_leaf must be >= 1 and min_samples_split >= 2".into(),
            ));
        }
        if y.len() < params.min_samples_leaf {
            return Err(Error::Data(format!(
                "{} training rows cannot fill a leaf of at least {}",
                y.len(),
                params.min_samples_leaf
            )));
        }
        let mut tree = Self { params, nodes: Vec::new() };
        let idx: Vec<usize> = (0..y.len()).collect();
        tree.build(x, y, idx, 0);
        Ok(tree)
    }

    /// Appends the subtree for `idx` and returns its node index.
    fn build(&mut self, x: &Mat, y: &[f64], idx: Vec<usize>, depth: usize) -> usize {
        let n = idx.len();
        let sum: f64 = idx.iter().map(|&i| y[i]).sum();
        let mean = sum / n as f64;

        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        let splittable = n >= self.params.min_samples_split
            && n >= 2 * self.params.min_samples_leaf
            && !depth_capped;
        let best = if splittable { self.best_split(x, y, &idx) } else { None };

        match best {
            None => {
                self.nodes.push(Node::Leaf { value: mean });
                self.nodes.len() - 1
            }
            Some((feature, threshold)) => {
                let (mut left_idx, mut right_idx) = (Vec::new(), Vec::new());
                for &i in &idx {
                    if x.get(i, feature) <= threshold {
                        left_idx.push(i);
                    } else {
                        right_idx.push(i);
                    }
                }
                // Reserve our slot first so child indices are stable.
                let me = self.nodes.len();
                self.nodes.push(Node::Leaf { value: mean });
                let left = self.build(x, y, left_idx, depth + 1);
                let right = self.build(x, y, right_idx, depth + 1);
                self.nodes[me] = Node::Split { feature, threshold, left, right };
                me
            }
        }
    }

    /// Best `(feature, threshold)` by summed child squared error, or `None`
    /// when no threshold separates distinct values with full-size leaves or
    /// the node is already pure.
    fn best_split(&self, x: &Mat, y: &[f64], idx: &[usize]) -> Option<(usize, f64)> {
        let n = idx.len();
        let min_leaf = self.params.min_samples_leaf;
        let total: f64 = idx.iter().map(|&i| y[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| y[i] * y[i]).sum();
        let node_sse = total_sq - total * total / n as f64;
        if node_sse <= 0.0 {
            return None; // pure node
        }

        let mut best: Option<(f64, usize, f64)> = None; // (cost, feature, threshold)
        let mut order: Vec<usize> = Vec::with_capacity(n);
        for f in 0..x.cols() {
            order.clear();
            order.extend_from_slice(idx);
            order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));

            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for s in 1..n {
                let yi = y[order[s - 1]];
                left_sum += yi;
                left_sq += yi * yi;
                if s < min_leaf || n - s < min_leaf {
                    continue;
                }
                let a = x.get(order[s - 1], f);
                let b = x.get(order[s], f);
                if a == b {
                    continue;
                }
                let right_sum = total - left_sum;
                let right_sq = total_sq - left_sq;
                let cost = (left_sq - left_sum * left_sum / s as f64)
                    + (right_sq - right_sum * right_sum / (n - s) as f64);
                if best.as_ref().is_none_or(|&(c, _, _)| cost < c) {
                    // Midpoint can round up to b for adjacent floats; fall
                    // back to a so `<= threshold` keeps the left block exact.
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some((cost, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    node = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, x: &Mat) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Smallest number of training rows across leaves, for invariant checks.
    pub fn min_leaf_population(&self, x: &Mat) -> usize {
        let mut counts = vec![0usize; self.nodes.len()];
        for row in x.iter_rows() {
            let mut node = 0;
            loop {
                match &self.nodes[node] {
                    Node::Leaf { .. } => {
                        counts[node] += 1;
                        break;
                    }
                    Node::Split { feature, threshold, left, right } => {
                        node = if row[*feature] <= *threshold { *left } else { *right };
                    }
                }
            }
        }
        self.nodes
            .iter()
            .zip(&counts)
            .filter(|(n, _)| matches!(n, Node::Leaf { .. }))
            .map(|(_, c)| *c)
            .min()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn xy(points: &[(f64, f64)]) -> (Mat, Vec<f64>) {
        let x = Mat::from_rows(&points.iter().map(|p| vec![p.0]).collect::<Vec<_>>()).unwrap();
        let y = points.iter().map(|p| p.1).collect();
        (x, y)
    }

    #[test]
    fn constant_target_yields_single_leaf() {
        let (x, y) = xy(&(0..20).map(|i| (i as f64, 3.5)).collect::<Vec<_>>());
        let tree = RegressionTree::fit(&x, &y, TreeParams::default()).unwrap();
        assert_eq!(tree.leaf_count(), 1);
        assert_abs_diff_eq!(tree.predict_row(&[100.0]), 3.5);
    }

    #[test]
    fn recovers_step_function_exactly() {
        // 10 rows at x=0 with y=1, 10 rows at x=1 with y=5.
        let pts: Vec<(f64, f64)> = (0..20)
            .map(|i| if i < 10 { (0.0, 1.0) } else { (1.0, 5.0) })
            .collect();
        let (x, y) = xy(&pts);
        let tree = RegressionTree::fit(&x, &y, TreeParams::default()).unwrap();
        assert_abs_diff_eq!(tree.predict_row(&[0.0]), 1.0);
        assert_abs_diff_eq!(tree.predict_row(&[1.0]), 5.0);
        assert_eq!(tree.leaf_count(), 2);
    }

    #[test]
    fn fits_repeated_values_to_zero_training_error() {
        // Each distinct x value appears min_leaf times, so leaves are pure.
        let mut pts = Vec::new();
        for v in 0..8 {
            for _ in 0..5 {
                pts.push((v as f64, (v * v) as f64));
            }
        }
        let (x, y) = xy(&pts);
        let tree = RegressionTree::fit(&x, &y, TreeParams::default()).unwrap();
        let mse: f64 = x
            .iter_rows()
            .zip(&y)
            .map(|(r, &t)| (tree.predict_row(r) - t).powi(2))
            .sum::<f64>()
            / y.len() as f64;
        assert!(mse < 1e-12, "mse = {mse}");
    }

    #[test]
    fn respects_min_leaf_and_predicts_within_target_range() {
        let pts: Vec<(f64, f64)> =
            (0..50).map(|i| (i as f64, (i as f64 * 0.7).sin() * 3.0)).collect();
        let (x, y) = xy(&pts);
        let params = TreeParams::with_min_leaf(7);
        let tree = RegressionTree::fit(&x, &y, params).unwrap();
        assert!(tree.min_leaf_population(&x) >= 7);
        let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
        for probe in [-100.0, 0.0, 3.3, 49.0, 1e6] {
            let p = tree.predict_row(&[probe]);
            assert!(p >= lo && p <= hi);
        }
    }

    #[test]
    fn deeper_trees_never_increase_training_error() {
        let pts: Vec<(f64, f64)> =
            (0..60).map(|i| (i as f64, (i as f64 / 6.0).cos() + i as f64 * 0.01)).collect();
        let (x, y) = xy(&pts);
        let mut last = f64::INFINITY;
        for depth in [0, 1, 2, 4, 8] {
            let params = TreeParams {
                max_depth: Some(depth),
                min_samples_leaf: 1,
                min_samples_split: 2,
            };
            let tree = RegressionTree::fit(&x, &y, params).unwrap();
            let mse: f64 = x
                .iter_rows()
                .zip(&y)
                .map(|(r, &t)| (tree.predict_row(r) - t).powi(2))
                .sum::<f64>()
                / y.len() as f64;
            assert!(mse <= last + 1e-12);
            last = mse;
        }
    }

    #[test]
    fn rejects_too_few_rows() {
        let (x, y) = xy(&[(0.0, 1.0), (1.0, 2.0)]);
        assert!(RegressionTree::fit(&x, &y, TreeParams::with_min_leaf(5)).is_err());
    }

    #[test]
    fn fitting_is_deterministic() {
        let pts: Vec<(f64, f64)> =
            (0..40).map(|i| ((i % 7) as f64, (i % 5) as f64)).collect();
        let (x, y) = xy(&pts);
        let a = RegressionTree::fit(&x, &y, TreeParams::default()).unwrap();
        let b = RegressionTree::fit(&x, &y, TreeParams::default()).unwrap();
        assert_eq!(a, b);
    }
}
