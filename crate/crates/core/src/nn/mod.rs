//! Minimal dense network engine backing the trainable kernel.

mod adam;
mod gradcheck;
mod matrix;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{grad_check, grad_check_against, GradCheckReport, ParamError};
pub use matrix::{dot, Matrix};
pub use mlp::{backward_mlp, forward_mlp, Activation, DenseLayer, ForwardCache, KernelArch, KernelMLP};
