use serde::{Deserialize, Serialize};

use crate::nn::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Control,
    Treatment,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Control => "control",
            Group::Treatment => "treatment",
        }
    }

    /// Treatment indicator `T`.
    pub fn indicator(self) -> f64 {
        match self {
            Group::Control => 0.0,
            Group::Treatment => 1.0,
        }
    }
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "control" | "0" => Ok(Group::Control),
            "treatment" | "1" => Ok(Group::Treatment),
            _ => Err(Error::Unknown {
                kind: "group",
                name: s.to_string(),
            }),
        }
    }
}

/// Feature rows with outcomes, a group flag per row, and optionally the
/// generator's latent parameter per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    outcomes: Vec<f64>,
    groups: Vec<Group>,
    latent_t: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(features: Matrix, outcomes: Vec<f64>, groups: Vec<Group>, latent_t: Option<Vec<f64>>) -> Result<Self> {
        let n = features.rows();
        for (context, len) in [
            ("dataset outcomes", outcomes.len()),
            ("dataset groups", groups.len()),
            ("dataset latent", latent_t.as_ref().map_or(n, Vec::len)),
        ] {
            if len != n {
                return Err(Error::Dimension {
                    context,
                    expected: n,
                    actual: len,
                });
            }
        }
        if let Some(index) = outcomes.iter().position(|y| !y.is_finite()) {
            return Err(Error::NonFinite {
                context: "dataset outcomes",
                index,
            });
        }
        Ok(Dataset {
            features,
            outcomes,
            groups,
            latent_t,
        })
    }

    /// All rows in one group.
    pub fn single_group(features: Matrix, outcomes: Vec<f64>, group: Group) -> Result<Self> {
        let n = features.rows();
        Self::new(features, outcomes, vec![group; n], None)
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn latent_t(&self) -> Option<&[f64]> {
        self.latent_t.as_deref()
    }

    pub fn count(&self, group: Group) -> usize {
        self.groups.iter().filter(|&&g| g == group).count()
    }

    /// Same rows with outcomes replaced.
    pub fn with_outcomes(&self, outcomes: Vec<f64>) -> Result<Self> {
        Self::new(
            self.features.clone(),
            outcomes,
            self.groups.clone(),
            self.latent_t.clone(),
        )
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            outcomes: indices.iter().map(|&i| self.outcomes[i]).collect(),
            groups: indices.iter().map(|&i| self.groups[i]).collect(),
            latent_t: self.latent_t.as_ref().map(|t| indices.iter().map(|&i| t[i]).collect()),
        }
    }

    pub fn filter_group(&self, group: Group) -> Dataset {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.groups[i] == group).collect();
        self.select(&idx)
    }

    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        let latent_t = match (&self.latent_t, &other.latent_t) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            (None, None) => None,
            _ => return Err(Error::invalid("cannot concatenate datasets with and without latent t")),
        };
        Dataset::new(
            self.features.vstack(&other.features)?,
            self.outcomes.iter().chain(&other.outcomes).copied().collect(),
            self.groups.iter().chain(&other.groups).copied().collect(),
            latent_t,
        )
    }
}
