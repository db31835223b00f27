//! Comparison estimators: Gaussian-kernel Nadaraya-Watson and random-forest
//! base regressors, composed into T-, S- and X-learners.

mod forest;
mod gaussian_nw;
mod meta;
mod tree;

pub use forest::{forest_predict, Forest, ForestConfig, MinLeaf};
pub use gaussian_nw::{gaussian_nw_predict, GaussianNw};
pub use meta::{
    s_learner_cate, t_learner_cate, x_learner_cate, BaseLearner, FittedBase, FittedMeta, MetaKind, MetaLearnerSpec,
};
pub use tree::{best_split, fit_tree, SplitChoice, TreeNode, TreeParams};
