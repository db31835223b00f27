//! Nadaraya-Watson CATE estimation with a trainable, weight-shared kernel.
//!
//! A single [`KernelMLP`](crate::nn::KernelMLP) scores `(query, key)` pairs.
//! Softmax over a query's scores gives attention weights, and the weighted
//! average of the keys' outcomes is the prediction. Training fits the kernel
//! on leave-one-out subset examples drawn from both groups; inference attends
//! over the full stored control and treatment sets and differences the two
//! predictions.

mod attention;
mod bundle;
mod loss;
mod model;
mod subsets;
mod train;

pub use attention::{attention_weights, nw_head, pair_inputs, softmax, PairEncoding};
pub use loss::{example_loss, joint_loss, joint_objective, ExampleSet, PreparedGroup};
pub use model::{estimate_cate, predict_response, FeatureScaler, TnwModel};
pub use subsets::{sample_subsets, SubsetExample};
pub use train::{train_tnw, SubsetSize, TnwConfig, TrainReport};
