use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART regression tree; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or `min_leaf` binds.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: Some(12),
            min_leaf: 5,
        }
    }
}

impl RegressionTree {
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: TreeParams) -> Result<RegressionTree> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Degenerate("rows and targets differ in length or are empty".into()));
        }
        let idx: Vec<usize> = (0..x.len()).collect();
        Self::fit_indices(x, y, &idx, params)
    }

    /// Fits on the multiset of rows `idx` (repeats allowed).
    fn fit_indices(x: &[Vec<f64>], y: &[f64], idx: &[usize], params: TreeParams) -> Result<RegressionTree> {
        let p = x[0].len();
        if x.iter().any(|r| r.len() != p) {
            return Err(Error::FeatureMismatch("ragged feature rows".into()));
        }
        if params.min_leaf == 0 {
            return Err(Error::Config("min_leaf must be at least 1".into()));
        }
        let mut tree = RegressionTree {
            nodes: Vec::new(),
            n_features: p,
        };
        tree.grow(x, y, idx.to_vec(), 0, params);
        Ok(tree)
    }

    fn grow(&mut self, x: &[Vec<f64>], y: &[f64], idx: Vec<usize>, depth: usize, params: TreeParams) -> usize {
        let n = idx.len();
        let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(mean));
        if params.max_depth.is_some_and(|d| depth >= d) || n < 2 * params.min_leaf {
            return id;
        }
        let Some((feature, threshold)) = best_split(x, y, &idx, mean, params.min_leaf) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| x[i][feature] <= threshold);
        let left = self.grow(x, y, l, depth + 1, params);
        let right = self.grow(x, y, r, depth + 1, params);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(v) => return *v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &RegressionTree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}

/// Split maximizing variance reduction with at least `min_leaf` rows per side.
fn best_split(x: &[Vec<f64>], y: &[f64], idx: &[usize], mean: f64, min_leaf: usize) -> Option<(usize, f64)> {
    let n = idx.len();
    let total: f64 = idx.iter().map(|&i| y[i] - mean).sum();
    let sse: f64 = idx.iter().map(|&i| (y[i] - mean).powi(2)).sum();
    if sse <= 0.0 {
        return None;
    }
    let base = total * total / n as f64;
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order: Vec<(f64, f64)> = Vec::with_capacity(n);
    for f in 0..x[0].len() {
        order.clear();
        order.extend(idx.iter().map(|&i| (x[i][f], y[i] - mean)));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_sum = 0.0;
        for k in 0..n - 1 {
            left_sum += order[k].1;
            let nl = k + 1;
            if nl < min_leaf || n - nl < min_leaf || order[k].0 == order[k + 1].0 {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / (n - nl) as f64 - base;
            if best.is_none_or(|b| gain > b.0) {
                let threshold = 0.5 * (order[k].0 + order[k + 1].0);
                // keep the midpoint strictly below the right value
                let threshold = if threshold < order[k + 1].0 { threshold } else { order[k].0 };
                best = Some((gain, f, threshold));
            }
        }
    }
    best.filter(|b| b.0 > 1e-12 * sse).map(|b| (b.1, b.2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            tree: TreeParams::default(),
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<RegressionTree>,
}

impl RandomForest {
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: ForestParams) -> Result<RandomForest> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Degenerate("rows and targets differ in length or are empty".into()));
        }
        if params.n_trees == 0 {
            return Err(Error::Config("a forest needs at least one tree".into()));
        }
        let n = x.len();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let idx: Vec<usize> = if params.bootstrap {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive(params.seed, &[t as u64]));
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                RegressionTree::fit_indices(x, y, &idx, params.tree)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RandomForest { trees })
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(x)).sum();
        sum / self.trees.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wavy(n: usize, phase: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let t = i as f64 * 0.37 + phase;
                vec![t.sin() * 3.0, (t * 1.7).cos() * 2.0]
            })
            .collect();
        let y = x.iter().map(|r| r[0] * r[1] + r[0].powi(2)).collect();
        (x, y)
    }

    #[test]
    fn constant_target_is_a_single_leaf() {
        let (x, _) = wavy(50, 0.0);
        let t = RegressionTree::fit(&x, &[4.0; 50], TreeParams::default()).unwrap();
        assert_eq!(t.nodes, vec![Node::Leaf(4.0)]);
    }

    #[test]
    fn unbounded_tree_memorizes_distinct_rows() {
        let (x, y) = wavy(80, 0.0);
        let params = TreeParams {
            max_depth: None,
            min_leaf: 1,
        };
        let t = RegressionTree::fit(&x, &y, params).unwrap();
        for (r, v) in x.iter().zip(&y) {
            assert_eq!(t.predict_row(r), *v);
        }
    }

    #[test]
    fn depth_and_leaf_bounds_hold() {
        let (x, y) = wavy(200, 0.0);
        let t = RegressionTree::fit(&x, &y, TreeParams { max_depth: Some(3), min_leaf: 5 }).unwrap();
        assert!(t.depth() <= 3);
        assert!(t.leaves() <= 8);
    }

    #[test]
    fn single_tree_forest_without_bootstrap_is_the_tree() {
        let (x, y) = wavy(120, 0.0);
        let tree = RegressionTree::fit(&x, &y, TreeParams::default()).unwrap();
        let forest = RandomForest::fit(
            &x,
            &y,
            ForestParams {
                n_trees: 1,
                bootstrap: false,
                ..ForestParams::default()
            },
        )
        .unwrap();
        let (xt, _) = wavy(40, 0.5);
        for r in &xt {
            assert_eq!(forest.predict_row(r), tree.predict_row(r));
        }
    }

    #[test]
    fn forest_is_deterministic() {
        let (x, y) = wavy(100, 0.0);
        let p = ForestParams {
            n_trees: 10,
            seed: 5,
            ..ForestParams::default()
        };
        assert_eq!(RandomForest::fit(&x, &y, p).unwrap(), RandomForest::fit(&x, &y, p).unwrap());
    }
}
