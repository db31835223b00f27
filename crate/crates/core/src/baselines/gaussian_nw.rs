use serde::{Deserialize, Serialize};

use crate::nn::Matrix;
use crate::tnw::softmax;
use crate::{Error, Result};

/// Nadaraya-Watson regression with kernel `exp(−‖z − x‖² / γ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNw {
    pub bandwidth: f64,
    features: Matrix,
    outcomes: Vec<f64>,
}

impl GaussianNw {
    pub fn fit(features: &Matrix, outcomes: &[f64], bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::invalid(format!("bandwidth {bandwidth} must be positive")));
        }
        if features.rows() == 0 {
            return Err(Error::invalid("Gaussian NW needs at least one training row"));
        }
        if features.rows() != outcomes.len() {
            return Err(Error::Dimension {
                context: "Gaussian NW outcomes",
                expected: features.rows(),
                actual: outcomes.len(),
            });
        }
        Ok(GaussianNw {
            bandwidth,
            features: features.clone(),
            outcomes: outcomes.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Kernel weights over the stored rows, normalized in log space.
    pub fn weights(&self, query: &[f64]) -> Result<Vec<f64>> {
        if query.len() != self.dim() {
            return Err(Error::Dimension {
                context: "Gaussian NW query",
                expected: self.dim(),
                actual: query.len(),
            });
        }
        let logits: Vec<f64> = self
            .features
            .iter_rows()
            .map(|x| {
                let d2: f64 = x.iter().zip(query).map(|(a, b)| (a - b).powi(2)).sum();
                -d2 / self.bandwidth
            })
            .collect();
        softmax(&logits)
    }

    pub fn predict(&self, query: &[f64]) -> Result<f64> {
        let w = self.weights(query)?;
        Ok(w.iter().zip(&self.outcomes).map(|(a, y)| a * y).sum())
    }
}

pub fn gaussian_nw_predict(model: &GaussianNw, query: &[f64]) -> Result<f64> {
    model.predict(query)
}
