use serde::{Deserialize, Serialize};

use super::attention::{pair_inputs, softmax, PairEncoding};
use super::loss::PreparedGroup;
use crate::datagen::{Dataset, Group, GroupNorm};
use crate::nn::{KernelMLP, Matrix};
use crate::{Error, Result};

/// Column-wise feature standardization applied before the kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureScaler {
    pub fn identity(d: usize) -> Self {
        FeatureScaler {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    /// Fits on the union of the feature rows of `sets`; outcomes are not read.
    pub fn fit(sets: &[&Matrix]) -> Result<Self> {
        let d = sets.first().map_or(0, |m| m.cols());
        let n: usize = sets.iter().map(|m| m.rows()).sum();
        if n == 0 {
            return Err(Error::invalid("cannot fit feature scaler on no rows"));
        }
        let mut mean = vec![0.0; d];
        for m in sets {
            for r in m.iter_rows() {
                for (a, x) in mean.iter_mut().zip(r) {
                    *a += x;
                }
            }
        }
        mean.iter_mut().for_each(|v| *v /= n as f64);
        let mut var = vec![0.0; d];
        for m in sets {
            for r in m.iter_rows() {
                for ((v, x), mu) in var.iter_mut().zip(r).zip(&mean) {
                    *v += (x - mu).powi(2);
                }
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n as f64).sqrt();
                if s < 1e-12 {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Ok(FeatureScaler { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            for ((v, mu), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - mu) / s;
            }
        }
        out
    }
}

/// A trained kernel together with the stored training sets it attends over.
#[derive(Debug, Clone)]
pub struct TnwModel {
    kernel: KernelMLP,
    encoding: PairEncoding,
    scaler: FeatureScaler,
    norm: GroupNorm,
    /// Training rows with normalized outcomes.
    control: Dataset,
    treatment: Dataset,
    prepared_control: PreparedGroup,
    prepared_treatment: PreparedGroup,
}

impl TnwModel {
    /// `control` and `treatment` carry normalized outcomes.
    pub fn new(
        kernel: KernelMLP,
        scaler: FeatureScaler,
        norm: GroupNorm,
        control: Dataset,
        treatment: Dataset,
    ) -> Result<Self> {
        let d = scaler.dim();
        for (set, name) in [(&control, "control"), (&treatment, "treatment")] {
            if set.is_empty() {
                return Err(Error::invalid(format!("stored {name} set is empty")));
            }
            if set.dim() != d {
                return Err(Error::Dimension {
                    context: "stored set features",
                    expected: d,
                    actual: set.dim(),
                });
            }
        }
        let encoding = PairEncoding::infer(kernel.input_dim(), d)?;
        let prep = |s: &Dataset| PreparedGroup {
            features: scaler.transform(s.features()),
            outcomes: s.outcomes().to_vec(),
        };
        let prepared_control = prep(&control);
        let prepared_treatment = prep(&treatment);
        Ok(TnwModel {
            kernel,
            encoding,
            scaler,
            norm,
            control,
            treatment,
            prepared_control,
            prepared_treatment,
        })
    }

    pub fn kernel(&self) -> &KernelMLP {
        &self.kernel
    }

    pub fn encoding(&self) -> PairEncoding {
        self.encoding
    }

    pub fn scaler(&self) -> &FeatureScaler {
        &self.scaler
    }

    pub fn norm(&self) -> &GroupNorm {
        &self.norm
    }

    pub fn stored(&self, group: Group) -> &Dataset {
        match group {
            Group::Control => &self.control,
            Group::Treatment => &self.treatment,
        }
    }

    pub fn dim(&self) -> usize {
        self.scaler.dim()
    }

    fn prepared(&self, group: Group) -> &PreparedGroup {
        match group {
            Group::Control => &self.prepared_control,
            Group::Treatment => &self.prepared_treatment,
        }
    }

    /// Attention weights of a raw query over all stored rows of `group`.
    pub fn weights(&self, group: Group, query: &[f64]) -> Result<Vec<f64>> {
        if query.len() != self.dim() {
            return Err(Error::Dimension {
                context: "query features",
                expected: self.dim(),
                actual: query.len(),
            });
        }
        let q = self.scaler.transform_row(query);
        let data = self.prepared(group);
        let pairs = pair_inputs(self.encoding, &q, &data.features, 0..data.len());
        softmax(&self.kernel.scores(&pairs)?)
    }

    /// Prediction in the original outcome scale.
    pub fn predict_response(&self, group: Group, query: &[f64]) -> Result<f64> {
        let w = self.weights(group, query)?;
        let z: f64 = w.iter().zip(&self.prepared(group).outcomes).map(|(a, y)| a * y).sum();
        Ok(self.norm.get(group).denormalize(z))
    }

    pub fn estimate_cate(&self, query: &[f64]) -> Result<f64> {
        Ok(self.predict_response(Group::Treatment, query)? - self.predict_response(Group::Control, query)?)
    }

    pub fn predict_many(&self, group: Group, queries: &Matrix) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        (0..queries.rows())
            .into_par_iter()
            .map(|i| self.predict_response(group, queries.row(i)))
            .collect()
    }

    /// Same kernel and inputs with the stored outcomes of `group` replaced
    /// (original scale); the group's normalization statistics are kept.
    pub fn with_outcomes(&self, group: Group, outcomes: &[f64]) -> Result<Self> {
        let stats = *self.norm.get(group);
        let z: Vec<f64> = outcomes.iter().map(|&y| stats.normalize(y)).collect();
        let mut control = self.control.clone();
        let mut treatment = self.treatment.clone();
        match group {
            Group::Control => control = control.with_outcomes(z)?,
            Group::Treatment => treatment = treatment.with_outcomes(z)?,
        }
        TnwModel::new(self.kernel.clone(), self.scaler.clone(), self.norm, control, treatment)
    }
}

pub fn predict_response(model: &TnwModel, group: Group, query: &[f64]) -> Result<f64> {
    model.predict_response(group, query)
}

/// `ĥ(x) − ŷ(x)`.
pub fn estimate_cate(model: &TnwModel, query: &[f64]) -> Result<f64> {
    model.estimate_cate(query)
}
