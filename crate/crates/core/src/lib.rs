//! Conditional average treatment effect estimation with Nadaraya-Watson
//! regression whose kernel is a small trainable network shared between the
//! control and treatment heads.
//!
//! The crate is organised by subsystem:
//!
//! - [`nn`]: dense feed-forward kernel network, reverse-mode gradients, Adam.
//! - [`datagen`]: synthetic control/treatment populations with exact CATE oracles.
//! - [`tnw`]: the trainable-kernel estimator (subset sampling, attention heads,
//!   joint loss, training and inference).
//! - [`baselines`]: Gaussian Nadaraya-Watson, random forests and T/S/X meta-learners.
//! - [`bench`]: grid search, replicated experiments, sweeps and result tables.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod datagen;
mod error;
pub mod nn;
pub mod rng;
pub mod tnw;

pub use error::{Error, Result};
