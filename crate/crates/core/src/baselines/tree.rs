use serde::{Deserialize, Serialize};

use crate::nn::Matrix;
use crate::{Error, Result};

/// Regression tree node. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        value: f64,
        count: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> Vec<(f64, usize)> {
        match self {
            TreeNode::Leaf { value, count } => vec![(*value, *count)],
            TreeNode::Split { left, right, .. } => {
                let mut l = left.leaves();
                l.extend(right.leaves());
                l
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until the other stopping rules apply.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// Reduction in summed squared error.
    pub gain: f64,
}

/// Gains closer than this (relative) count as ties.
const TIE_TOLERANCE: f64 = 1e-12;

fn better(gain: f64, best: f64) -> bool {
    gain > best + TIE_TOLERANCE * best.abs().max(f64::MIN_POSITIVE)
}

/// Best squared-error split of `rows` over all features and midpoints
/// between consecutive distinct values, with both sides holding at least
/// `min_leaf` rows. Ties go to the lowest feature, then the lowest threshold.
pub fn best_split(features: &Matrix, outcomes: &[f64], rows: &[usize], min_leaf: usize) -> Option<SplitChoice> {
    let n = rows.len();
    let min_leaf = min_leaf.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    let total: f64 = rows.iter().map(|&i| outcomes[i]).sum();
    let parent = total * total / n as f64;
    let mut best: Option<SplitChoice> = None;
    let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(n);
    for f in 0..features.cols() {
        sorted.clear();
        sorted.extend(rows.iter().map(|&i| (features.get(i, f), outcomes[i])));
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_sum = 0.0;
        for k in 0..n - 1 {
            left_sum += sorted[k].1;
            let n_left = k + 1;
            if n_left < min_leaf {
                continue;
            }
            if n - n_left < min_leaf {
                break;
            }
            let (lo, hi) = (sorted[k].0, sorted[k + 1].0);
            if lo == hi {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / n_left as f64 + right_sum * right_sum / (n - n_left) as f64 - parent;
            if best.as_ref().is_none_or(|b| better(gain, b.gain)) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: lo + (hi - lo) / 2.0,
                    gain,
                });
            }
        }
    }
    best
}

/// Greedy variance-reduction tree; leaves predict their mean outcome.
pub fn fit_tree(features: &Matrix, outcomes: &[f64], params: &TreeParams) -> Result<TreeNode> {
    if outcomes.is_empty() {
        return Err(Error::invalid("cannot fit a tree on no rows"));
    }
    if features.rows() != outcomes.len() {
        return Err(Error::Dimension {
            context: "tree outcomes",
            expected: features.rows(),
            actual: outcomes.len(),
        });
    }
    if params.max_depth == Some(0) {
        return Err(Error::invalid("max_depth must be at least 1"));
    }
    let rows: Vec<usize> = (0..outcomes.len()).collect();
    Ok(grow(features, outcomes, rows, 0, params))
}

/// Fits on a row multiset (repeats allowed, as in a bootstrap sample).
pub(crate) fn fit_tree_rows(features: &Matrix, outcomes: &[f64], rows: Vec<usize>, params: &TreeParams) -> TreeNode {
    grow(features, outcomes, rows, 0, params)
}

fn grow(features: &Matrix, outcomes: &[f64], rows: Vec<usize>, depth: usize, params: &TreeParams) -> TreeNode {
    let n = rows.len();
    let mean = rows.iter().map(|&i| outcomes[i]).sum::<f64>() / n as f64;
    let leaf = TreeNode::Leaf { value: mean, count: n };
    if params.max_depth.is_some_and(|d| depth >= d) {
        return leaf;
    }
    let first = outcomes[rows[0]];
    if rows.iter().all(|&i| outcomes[i] == first) {
        return leaf;
    }
    let Some(split) = best_split(features, outcomes, &rows, params.min_leaf) else {
        return leaf;
    };
    if !(split.gain > 0.0) {
        return leaf;
    }
    let (left, right): (Vec<usize>, Vec<usize>) = rows
        .into_iter()
        .partition(|&i| features.get(i, split.feature) <= split.threshold);
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow(features, outcomes, left, depth + 1, params)),
        right: Box::new(grow(features, outcomes, right, depth + 1, params)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unbounded() -> TreeParams {
        TreeParams {
            max_depth: None,
            min_leaf: 1,
        }
    }

    #[test]
    fn constant_outcomes_make_one_leaf() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let t = fit_tree(&x, &[4.0; 3], &unbounded()).unwrap();
        assert_eq!(t, TreeNode::Leaf { value: 4.0, count: 3 });
    }

    #[test]
    fn step_data_splits_between_one_and_two() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let t = fit_tree(
            &x,
            &[0.0, 0.0, 1.0, 1.0],
            &TreeParams {
                max_depth: Some(1),
                min_leaf: 1,
            },
        )
        .unwrap();
        let TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } = t
        else {
            panic!("expected a split")
        };
        assert_eq!(feature, 0);
        assert!(threshold > 1.0 && threshold < 2.0);
        assert_eq!(left.predict(&[0.0]), 0.0);
        assert_eq!(right.predict(&[3.0]), 1.0);
    }

    #[test]
    fn unbounded_tree_memorizes_distinct_rows() {
        let x = Matrix::from_rows(&[[0.3, 1.0], [0.1, -2.0], [0.9, 0.0], [0.5, 0.5], [0.2, 3.0]]).unwrap();
        let y = [1.0, -4.0, 2.5, 0.0, 7.0];
        let t = fit_tree(&x, &y, &unbounded()).unwrap();
        for (i, &yi) in y.iter().enumerate() {
            assert_eq!(t.predict(x.row(i)), yi);
        }
    }

    #[test]
    fn min_leaf_and_depth_are_respected() {
        let x = Matrix::from_rows(&(0..20).map(|i| [f64::from(i)]).collect::<Vec<_>>()).unwrap();
        let y: Vec<f64> = (0..20).map(|i| f64::from(i * i % 7)).collect();
        let t = fit_tree(
            &x,
            &y,
            &TreeParams {
                max_depth: Some(3),
                min_leaf: 4,
            },
        )
        .unwrap();
        assert!(t.depth() <= 3);
        let leaves = t.leaves();
        assert!(leaves.iter().all(|&(_, c)| c >= 4));
        assert_eq!(leaves.iter().map(|l| l.1).sum::<usize>(), 20);
    }

    #[test]
    fn errors() {
        assert!(fit_tree(&Matrix::zeros(0, 1), &[], &unbounded()).is_err());
        let x = Matrix::from_rows(&[[0.0]]).unwrap();
        assert!(fit_tree(
            &x,
            &[1.0],
            &TreeParams {
                max_depth: Some(0),
                min_leaf: 1
            }
        )
        .is_err());
    }
}
