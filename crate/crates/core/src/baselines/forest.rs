use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree_rows, TreeNode, TreeParams};
use crate::nn::Matrix;
use crate::rng;
use crate::{Error, Result};

/// Minimum rows per leaf: an absolute count or a fraction of the training
/// set, resolved to `⌈fraction × rows⌉`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MinLeaf {
    Count(usize),
    Fraction(f64),
}

impl MinLeaf {
    pub fn resolve(self, rows: usize) -> usize {
        match self {
            MinLeaf::Count(k) => k.max(1),
            MinLeaf::Fraction(f) => ((f * rows as f64 - 1e-9).ceil() as usize).max(1),
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            MinLeaf::Fraction(f) if !(f > 0.0 && f < 1.0) => {
                Err(Error::invalid(format!("fractional min_leaf {f} outside (0, 1)")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: MinLeaf,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: Some(5),
            min_leaf: MinLeaf::Count(1),
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("forest needs at least one tree"));
        }
        if self.max_depth == Some(0) {
            return Err(Error::invalid("max_depth must be at least 1"));
        }
        self.min_leaf.validate()
    }
}

/// Averaged regression trees. Tree `i` depends only on the seed and `i`, so
/// the first `k` trees of a large forest equal a `k`-tree forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub config: ForestConfig,
    trees: Vec<TreeNode>,
}

impl Forest {
    pub fn fit(features: &Matrix, outcomes: &[f64], config: &ForestConfig) -> Result<Self> {
        config.validate()?;
        let n = outcomes.len();
        if n == 0 {
            return Err(Error::invalid("cannot fit a forest on no rows"));
        }
        if features.rows() != n {
            return Err(Error::Dimension {
                context: "forest outcomes",
                expected: features.rows(),
                actual: n,
            });
        }
        let params = TreeParams {
            max_depth: config.max_depth,
            min_leaf: config.min_leaf.resolve(n),
        };
        let trees = (0..config.n_trees)
            .into_par_iter()
            .map(|i| {
                let rows = if config.bootstrap {
                    let mut r = rng::stream(config.seed, &[rng::label("bootstrap"), i as u64]);
                    (0..n).map(|_| r.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                fit_tree_rows(features, outcomes, rows, &params)
            })
            .collect();
        Ok(Forest {
            config: config.clone(),
            trees,
        })
    }

    pub fn trees(&self) -> &[TreeNode] {
        &self.trees
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if self.trees.is_empty() {
            return Err(Error::NotFitted);
        }
        Ok(self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64)
    }

    /// The forest made of the first `k` trees.
    pub fn truncated(&self, k: usize) -> Result<Forest> {
        if k == 0 || k > self.trees.len() {
            return Err(Error::invalid(format!("cannot keep {k} of {} trees", self.trees.len())));
        }
        Ok(Forest {
            config: ForestConfig {
                n_trees: k,
                ..self.config.clone()
            },
            trees: self.trees[..k].to_vec(),
        })
    }
}

pub fn forest_predict(forest: &Forest, query: &[f64]) -> Result<f64> {
    forest.predict(query)
}
