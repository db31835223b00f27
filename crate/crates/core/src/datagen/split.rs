use super::dataset::{Dataset, Group};
use super::family::GeneratorSpec;
use crate::nn::Matrix;
use crate::rng;
use crate::{Error, Result};

/// Number of fresh test points per replication.
pub const TEST_POINTS: usize = 1000;

/// Control and treatment rows of one partition.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPair {
    pub control: Dataset,
    pub treatment: Dataset,
}

impl GroupPair {
    pub fn get(&self, group: Group) -> &Dataset {
        match group {
            Group::Control => &self.control,
            Group::Treatment => &self.treatment,
        }
    }

    pub fn combined(&self) -> Result<Dataset> {
        self.control.concat(&self.treatment)
    }
}

/// Test points with their noise-free responses and true effects.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub features: Matrix,
    pub latent_t: Option<Vec<f64>>,
    pub g0: Vec<f64>,
    pub g1: Vec<f64>,
    pub true_cate: Vec<f64>,
}

impl TestSet {
    pub fn len(&self) -> usize {
        self.true_cate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.true_cate.is_empty()
    }

    /// Draws `count` points from the shared feature distribution.
    pub fn generate(spec: &GeneratorSpec, count: usize, stream: u64) -> Result<Self> {
        let rows = spec.generate(count, Group::Control, stream)?;
        let oracle = spec.oracle();
        let latent = rows.latent_t();
        let mut g0 = Vec::with_capacity(count);
        let mut g1 = Vec::with_capacity(count);
        for i in 0..count {
            let x = rows.features().row(i);
            let t = latent.map(|t| t[i]);
            g0.push(oracle.g0(x, t)?);
            g1.push(oracle.g1(x, t)?);
        }
        let true_cate = g1.iter().zip(&g0).map(|(a, b)| a - b).collect();
        Ok(TestSet {
            features: rows.features().clone(),
            latent_t: latent.map(<[f64]>::to_vec),
            g0,
            g1,
            true_cate,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: GroupPair,
    pub validation: GroupPair,
    pub test: TestSet,
}

/// `⌈x⌉` that ignores floating-point fuzz just above an integer.
fn ceil_count(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

/// Training, validation and test data for one replication, with
/// [`TEST_POINTS`] test points.
pub fn make_split(spec: &GeneratorSpec, c: usize, ratio: f64, val_fraction: f64) -> Result<Split> {
    make_split_with(spec, c, ratio, val_fraction, TEST_POINTS)
}

/// `c` training controls and `⌈ratio·c⌉` treatments; `⌈val_fraction·c⌉`
/// validation controls with `max(1, ⌈ratio·val⌉)` validation treatments;
/// `test_points` fresh test points. Every partition is a fresh draw.
pub fn make_split_with(
    spec: &GeneratorSpec,
    c: usize,
    ratio: f64,
    val_fraction: f64,
    test_points: usize,
) -> Result<Split> {
    if c < 10 {
        return Err(Error::invalid(format!("need at least 10 controls, got {c}")));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::invalid(format!("treatment ratio {ratio} outside (0, 1]")));
    }
    if !(val_fraction > 0.0 && val_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "validation fraction {val_fraction} outside (0, 1]"
        )));
    }
    let t = ceil_count(ratio * c as f64);
    if t < 2 {
        return Err(Error::invalid(format!(
            "ratio {ratio} with {c} controls gives {t} treatments; at least 2 are needed"
        )));
    }
    let val_c = ceil_count(val_fraction * c as f64).max(1);
    let val_t = ceil_count(ratio * val_c as f64).max(1);
    let train = GroupPair {
        control: spec.generate(c, Group::Control, rng::label("train"))?,
        treatment: spec.generate(t, Group::Treatment, rng::label("train"))?,
    };
    let validation = GroupPair {
        control: spec.generate(val_c, Group::Control, rng::label("validation"))?,
        treatment: spec.generate(val_t, Group::Treatment, rng::label("validation"))?,
    };
    let test = TestSet::generate(spec, test_points, rng::label("test"))?;
    Ok(Split {
        train,
        validation,
        test,
    })
}
