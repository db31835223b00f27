use serde::{Deserialize, Serialize};

use crate::nn::{KernelMLP, Matrix};
use crate::{Error, Result};

/// How a (query, key) pair is presented to the kernel network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairEncoding {
    /// `[x ‖ z]`, width `2d`.
    Concat,
    /// `[x ‖ z ‖ x − z]`, width `3d`.
    #[default]
    ConcatDifference,
}

impl PairEncoding {
    pub fn width(self, d: usize) -> usize {
        match self {
            PairEncoding::Concat => 2 * d,
            PairEncoding::ConcatDifference => 3 * d,
        }
    }

    /// The encoding a kernel with `input_dim` inputs expects for `d` features.
    pub fn infer(input_dim: usize, d: usize) -> Result<Self> {
        if d > 0 && input_dim == 2 * d {
            Ok(PairEncoding::Concat)
        } else if d > 0 && input_dim == 3 * d {
            Ok(PairEncoding::ConcatDifference)
        } else {
            Err(Error::Dimension {
                context: "kernel input for pair encoding",
                expected: 2 * d,
                actual: input_dim,
            })
        }
    }
}

/// One encoded row per key row.
pub fn pair_inputs(
    encoding: PairEncoding,
    query: &[f64],
    keys: &Matrix,
    key_rows: impl ExactSizeIterator<Item = usize>,
) -> Matrix {
    let d = query.len();
    let n = key_rows.len();
    let width = encoding.width(d);
    let mut data = Vec::with_capacity(n * width);
    for j in key_rows {
        let key = keys.row(j);
        data.extend_from_slice(query);
        data.extend_from_slice(key);
        if encoding == PairEncoding::ConcatDifference {
            data.extend(query.iter().zip(key).map(|(a, b)| a - b));
        }
    }
    Matrix::new(n, width, data).expect("finite inputs")
}

/// Max-shifted softmax of log-kernel scores.
pub fn softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::invalid("attention needs at least one neighbor"));
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite {
            context: "kernel score",
            index,
        });
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    Ok(w)
}

/// Normalized kernel weights of `target` against each neighbor row.
pub fn attention_weights(kernel: &KernelMLP, target: &[f64], neighbors: &Matrix) -> Result<Vec<f64>> {
    if neighbors.cols() != target.len() {
        return Err(Error::Dimension {
            context: "attention features",
            expected: target.len(),
            actual: neighbors.cols(),
        });
    }
    let encoding = PairEncoding::infer(kernel.input_dim(), target.len())?;
    let pairs = pair_inputs(encoding, target, neighbors, 0..neighbors.rows());
    softmax(&kernel.scores(&pairs)?)
}

/// Weighted average `Σ_j w_j y_j`.
pub fn nw_head(weights: &[f64], outcomes: &[f64]) -> Result<f64> {
    if weights.len() != outcomes.len() {
        return Err(Error::Dimension {
            context: "attention head outcomes",
            expected: weights.len(),
            actual: outcomes.len(),
        });
    }
    Ok(weights.iter().zip(outcomes).map(|(w, y)| w * y).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::KernelArch;
    use proptest::prelude::*;

    #[test]
    fn equal_scores_are_uniform() {
        let net = KernelMLP::zeros(&KernelArch::for_features(2)).unwrap();
        let keys = Matrix::from_rows(&[[0.0, 1.0], [2.0, 3.0], [4.0, 5.0], [6.0, 7.0]]).unwrap();
        let w = attention_weights(&net, &[0.5, 0.5], &keys).unwrap();
        assert!(w.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn log_two_gives_two_to_one() {
        let w = softmax(&[2f64.ln(), 0.0]).unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(softmax(&[]).is_err());
        assert!(matches!(
            softmax(&[0.0, f64::NAN]),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(nw_head(&[1.0], &[1.0, 2.0]).is_err());
        let net = KernelMLP::zeros(&KernelArch::for_features(2)).unwrap();
        assert!(attention_weights(&net, &[0.0; 3], &Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn head_examples() {
        assert_eq!(nw_head(&[1.0], &[7.5]).unwrap(), 7.5);
        let third = 1.0 / 3.0;
        assert!((nw_head(&[third; 3], &[1.0, 2.0, 3.0]).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(nw_head(&[0.25, 0.75], &[0.0, 4.0]).unwrap(), 3.0);
    }

    proptest! {
        #[test]
        fn shift_invariant_and_normalized(scores in proptest::collection::vec(-50.0f64..50.0, 1..30), shift in -100.0f64..100.0) {
            let w = softmax(&scores).unwrap();
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            let ws = softmax(&shifted).unwrap();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(w.iter().all(|&v| v >= 0.0));
            for (a, b) in w.iter().zip(&ws) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn permuting_neighbors_permutes_weights(seed in 0u64..500, rows in proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 3), 2..10), ys in proptest::collection::vec(-5.0f64..5.0, 10)) {
            let net = KernelMLP::new(&KernelArch::for_features(3), seed).unwrap();
            let keys = Matrix::from_rows(&rows).unwrap();
            let q = [0.3, -0.1, 0.8];
            let w = attention_weights(&net, &q, &keys).unwrap();
            let perm: Vec<usize> = (0..rows.len()).rev().collect();
            let wp = attention_weights(&net, &q, &keys.select_rows(&perm)).unwrap();
            for (k, &p) in perm.iter().enumerate() {
                prop_assert!((wp[k] - w[p]).abs() <= 1e-15);
            }
            let y = &ys[..rows.len()];
            let yp: Vec<f64> = perm.iter().map(|&p| y[p]).collect();
            prop_assert!((nw_head(&w, y).unwrap() - nw_head(&wp, &yp).unwrap()).abs() <= 1e-12);
        }
    }
}
