//! Synthetic control/treatment populations with exact CATE oracles.
//!
//! Four families are provided. Each replication draws its family parameters
//! once ([`GeneratorSpec::sample`]); rows then differ only through the latent
//! parameter `t` (or the raw features for the indicator family), so the
//! noise-free response functions `g0`, `g1` and the true effect
//! `τ(x) = g1(x) − g0(x)` are well defined.

mod dataset;
mod export;
mod family;
mod normalize;
mod split;
mod store;

pub use dataset::{Dataset, Group};
pub use export::{read_csv, read_csv_path, write_csv, write_csv_path};
pub use family::{
    gen_indicator, gen_logarithmic, gen_power, gen_spiral, power_noise_features, spiral_features, true_cate, Family,
    FamilyParams, GeneratorSpec, TruthOracle,
};
pub use normalize::{normalize_outcomes, GroupNorm, NormStats};
pub use split::{make_split, make_split_with, GroupPair, Split, TestSet, TEST_POINTS};
pub use store::{
    read_generator, read_split_dir, write_generator, write_split_dir, write_test_csv, SplitDir, GENERATOR_FILE,
};
