use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Group};
use crate::{Error, Result};

/// Standard deviations below this are treated as degenerate and replaced by 1.
const MIN_STD: f64 = 1e-12;

/// Outcome z-scoring statistics of one group, kept for test-time use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
    pub group: Group,
}

impl NormStats {
    /// Mean and population standard deviation of `outcomes`.
    pub fn fit(outcomes: &[f64], group: Group) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::invalid(format!("cannot normalize empty {group} group")));
        }
        let n = outcomes.len() as f64;
        let mean = outcomes.iter().sum::<f64>() / n;
        let var = outcomes.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        Ok(NormStats {
            mean,
            std: if std < MIN_STD { 1.0 } else { std },
            group,
        })
    }

    pub fn identity(group: Group) -> Self {
        NormStats {
            mean: 0.0,
            std: 1.0,
            group,
        }
    }

    #[inline]
    pub fn normalize(&self, y: f64) -> f64 {
        (y - self.mean) / self.std
    }

    #[inline]
    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Per-group statistics of a training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupNorm {
    pub control: NormStats,
    pub treatment: NormStats,
}

impl GroupNorm {
    pub fn get(&self, group: Group) -> &NormStats {
        match group {
            Group::Control => &self.control,
            Group::Treatment => &self.treatment,
        }
    }

    /// Normalizes each row with its own group's statistics.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let z = data
            .outcomes()
            .iter()
            .zip(data.groups())
            .map(|(&y, &g)| self.get(g).normalize(y))
            .collect();
        data.with_outcomes(z)
    }

    pub fn fit(data: &Dataset) -> Result<Self> {
        let stats = |g: Group| {
            let ys: Vec<f64> = data
                .outcomes()
                .iter()
                .zip(data.groups())
                .filter(|(_, &gg)| gg == g)
                .map(|(&y, _)| y)
                .collect();
            NormStats::fit(&ys, g)
        };
        Ok(GroupNorm {
            control: stats(Group::Control)?,
            treatment: stats(Group::Treatment)?,
        })
    }
}

/// Per-group z-scoring of a training set containing both groups.
pub fn normalize_outcomes(train: &Dataset) -> Result<(Dataset, GroupNorm)> {
    let norm = GroupNorm::fit(train)?;
    Ok((norm.apply(train)?, norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Matrix;
    use proptest::prelude::*;

    fn one_group(ys: &[f64]) -> Vec<f64> {
        let s = NormStats::fit(ys, Group::Control).unwrap();
        ys.iter().map(|&y| s.normalize(y)).collect()
    }

    #[test]
    fn two_point_z_score() {
        let s = NormStats::fit(&[1.0, 3.0], Group::Control).unwrap();
        assert_eq!((s.mean, s.std), (2.0, 1.0));
        assert_eq!(one_group(&[1.0, 3.0]), vec![-1.0, 1.0]);
    }

    #[test]
    fn constant_outcomes_clamp_std() {
        let s = NormStats::fit(&[4.0; 5], Group::Treatment).unwrap();
        assert_eq!(s.std, 1.0);
        assert!(one_group(&[4.0; 5]).iter().all(|&z| z == 0.0));
    }

    #[test]
    fn empty_group_is_an_error() {
        let ds = Dataset::single_group(
            Matrix::from_rows(&[[0.0], [1.0]]).unwrap(),
            vec![1.0, 2.0],
            Group::Control,
        )
        .unwrap();
        assert!(normalize_outcomes(&ds).is_err());
        assert!(NormStats::fit(&[], Group::Control).is_err());
    }

    #[test]
    fn groups_use_their_own_stats() {
        let ds = Dataset::new(
            Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap(),
            vec![1.0, 3.0, 10.0, 30.0],
            vec![Group::Control, Group::Control, Group::Treatment, Group::Treatment],
            None,
        )
        .unwrap();
        let (z, norm) = normalize_outcomes(&ds).unwrap();
        assert_eq!(z.outcomes(), &[-1.0, 1.0, -1.0, 1.0]);
        assert_eq!(norm.treatment.mean, 20.0);
    }

    proptest! {
        #[test]
        fn round_trip(ys in proptest::collection::vec(-1e3f64..1e3, 2..40)) {
            let s = NormStats::fit(&ys, Group::Control).unwrap();
            for &y in &ys {
                prop_assert!((s.denormalize(s.normalize(y)) - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }
}
