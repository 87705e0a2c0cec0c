//! Classical regressors on raw features: linear, ridge, regression tree and random forest.

mod linear;
mod tree;

pub use linear::{fit_linear, fit_ridge, LinearModel};
pub use tree::{ForestParams, Node, RandomForest, RegressionTree, TreeParams};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observer::{Component, Feature, SampleTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BaselineKind {
    Linear,
    Ridge,
    DecisionTree,
    RandomForest,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::Linear,
        BaselineKind::Ridge,
        BaselineKind::DecisionTree,
        BaselineKind::RandomForest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Linear => "lr",
            BaselineKind::Ridge => "ridge",
            BaselineKind::DecisionTree => "dt",
            BaselineKind::RandomForest => "rf",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown baseline `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub ridge_lambda: f64,
    pub tree: TreeParams,
    pub forest_trees: usize,
    pub forest_tree: TreeParams,
    pub forest_bootstrap: bool,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            ridge_lambda: 1.0,
            tree: TreeParams::default(),
            forest_trees: 100,
            forest_tree: TreeParams::default(),
            forest_bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Fitted {
    Linear(LinearModel),
    Ridge { model: LinearModel, lambda: f64 },
    Tree(RegressionTree),
    Forest(RandomForest),
}

/// A fitted baseline together with the feature layout it was trained on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub features: Vec<Feature>,
    pub fitted: Fitted,
}

pub fn fit(kind: BaselineKind, table: &SampleTable, target: Component, cfg: &BaselineConfig) -> Result<BaselineModel> {
    let x = table.matrix();
    let y = table.target(target);
    if x.is_empty() {
        return Err(Error::Degenerate("empty sample table".into()));
    }
    let fitted = match kind {
        BaselineKind::Linear => Fitted::Linear(fit_linear(&x, &y)?),
        BaselineKind::Ridge => Fitted::Ridge {
            model: fit_ridge(&x, &y, cfg.ridge_lambda)?,
            lambda: cfg.ridge_lambda,
        },
        BaselineKind::DecisionTree => Fitted::Tree(RegressionTree::fit(&x, &y, cfg.tree)?),
        BaselineKind::RandomForest => Fitted::Forest(RandomForest::fit(
            &x,
            &y,
            ForestParams {
                n_trees: cfg.forest_trees,
                tree: cfg.forest_tree,
                bootstrap: cfg.forest_bootstrap,
                seed: cfg.seed,
            },
        )?),
    };
    Ok(BaselineModel {
        features: table.features.clone(),
        fitted,
    })
}

impl BaselineModel {
    pub fn kind(&self) -> BaselineKind {
        match self.fitted {
            Fitted::Linear(_) => BaselineKind::Linear,
            Fitted::Ridge { .. } => BaselineKind::Ridge,
            Fitted::Tree(_) => BaselineKind::DecisionTree,
            Fitted::Forest(_) => BaselineKind::RandomForest,
        }
    }

    pub fn predict(&self, table: &SampleTable) -> Result<Vec<f64>> {
        if table.features != self.features {
            return Err(Error::FeatureMismatch(format!(
                "model trained on {:?}, table has {:?}",
                self.features, table.features
            )));
        }
        Ok(table.matrix().iter().map(|r| self.predict_row(r)).collect())
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        match &self.fitted {
            Fitted::Linear(m) | Fitted::Ridge { model: m, .. } => m.predict_row(x),
            Fitted::Tree(t) => t.predict_row(x),
            Fitted::Forest(f) => f.predict_row(x),
        }
    }

    /// Plain-text summary: weights for linear models, depth and leaf counts for trees.
    pub fn summary(&self) -> String {
        let mut out = format!("model: {}\n", self.kind());
        match &self.fitted {
            Fitted::Linear(m) | Fitted::Ridge { model: m, .. } => {
                if let Fitted::Ridge { lambda, .. } = &self.fitted {
                    out.push_str(&format!("lambda: {lambda}\n"));
                }
                out.push_str(&format!("intercept: {}\n", m.intercept));
                for (f, w) in self.features.iter().zip(&m.weights) {
                    out.push_str(&format!("weight[{f}]: {w}\n"));
                }
            }
            Fitted::Tree(t) => {
                out.push_str(&format!("depth: {}\nleaves: {}\n", t.depth(), t.leaves()));
            }
            Fitted::Forest(f) => {
                let n = f.trees.len();
                let depth = f.trees.iter().map(|t| t.depth()).max().unwrap_or(0);
                let leaves: usize = f.trees.iter().map(|t| t.leaves()).sum();
                out.push_str(&format!("trees: {n}\nmax_depth: {depth}\ntotal_leaves: {leaves}\n"));
            }
        }
        out
    }
}
