use rayon::prelude::*;

use super::attention::{pair_inputs, softmax, PairEncoding};
use super::subsets::SubsetExample;
use crate::datagen::Group;
use crate::nn::{KernelMLP, Matrix};
use crate::{Error, Result};

/// One group's rows as the kernel sees them: scaled features and
/// normalized outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedGroup {
    pub features: Matrix,
    pub outcomes: Vec<f64>,
}

impl PreparedGroup {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }
}

/// Squared-error loss `(ŷ − y)²` of one subset example. When `grad` is
/// given, `weight · ∂loss/∂θ` is added into it.
pub fn example_loss(
    kernel: &KernelMLP,
    data: &PreparedGroup,
    example: &SubsetExample,
    weight: f64,
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    let target = data.features.row(example.target_index);
    let encoding = PairEncoding::infer(kernel.input_dim(), target.len())?;
    let pairs = pair_inputs(
        encoding,
        target,
        &data.features,
        example.neighbor_indices.iter().copied(),
    );
    let ys: Vec<f64> = example.neighbor_indices.iter().map(|&j| data.outcomes[j]).collect();
    let residual_of = |w: &[f64]| -> (f64, f64) {
        let pred: f64 = w.iter().zip(&ys).map(|(a, y)| a * y).sum();
        (pred, pred - data.outcomes[example.target_index])
    };
    match grad {
        None => {
            let w = softmax(&kernel.scores(&pairs)?)?;
            let (_, r) = residual_of(&w);
            Ok(r * r)
        }
        Some(grad) => {
            let (scores, cache) = kernel.forward(&pairs)?;
            let w = softmax(&scores)?;
            let (pred, r) = residual_of(&w);
            // ∂ŷ/∂s_j = w_j (y_j − ŷ)
            let scale = weight * 2.0 * r;
            let upstream: Vec<f64> = w.iter().zip(&ys).map(|(wj, yj)| scale * wj * (yj - pred)).collect();
            kernel.backward_into(&cache, &upstream, grad)?;
            Ok(r * r)
        }
    }
}

/// `mean((ŷ_c − y_c)²) + α · mean((ĥ_t − h_t)²)`.
pub fn joint_loss(
    control_preds: &[f64],
    control_targets: &[f64],
    treatment_preds: &[f64],
    treatment_targets: &[f64],
    alpha: f64,
) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::invalid("alpha must be non-negative"));
    }
    if control_preds.len() != control_targets.len() {
        return Err(Error::Dimension {
            context: "control predictions",
            expected: control_targets.len(),
            actual: control_preds.len(),
        });
    }
    if treatment_preds.len() != treatment_targets.len() {
        return Err(Error::Dimension {
            context: "treatment predictions",
            expected: treatment_targets.len(),
            actual: treatment_preds.len(),
        });
    }
    if control_preds.is_empty() {
        return Err(Error::invalid("joint loss needs at least one control example"));
    }
    let mse = |p: &[f64], t: &[f64]| p.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / p.len() as f64;
    let control = mse(control_preds, control_targets);
    if treatment_preds.is_empty() {
        if alpha != 0.0 {
            return Err(Error::invalid("treatment examples are required when alpha is positive"));
        }
        return Ok(control);
    }
    Ok(control + alpha * mse(treatment_preds, treatment_targets))
}

/// Subset examples of both groups with their loss weights
/// `1/(N·c)` and `α/(M·t)`.
#[derive(Debug, Clone)]
pub struct ExampleSet {
    pub examples: Vec<SubsetExample>,
    pub control_weight: f64,
    pub treatment_weight: f64,
}

impl ExampleSet {
    pub fn new(control: Vec<SubsetExample>, treatment: Vec<SubsetExample>, alpha: f64) -> Result<Self> {
        if control.is_empty() {
            return Err(Error::invalid("no control subset examples"));
        }
        if alpha > 0.0 && treatment.is_empty() {
            return Err(Error::invalid("no treatment subset examples for positive alpha"));
        }
        let control_weight = 1.0 / control.len() as f64;
        let treatment_weight = if treatment.is_empty() {
            0.0
        } else {
            alpha / treatment.len() as f64
        };
        let mut examples = control;
        examples.extend(treatment);
        Ok(ExampleSet {
            examples,
            control_weight,
            treatment_weight,
        })
    }

    pub fn weight(&self, example: &SubsetExample) -> f64 {
        match example.group {
            Group::Control => self.control_weight,
            Group::Treatment => self.treatment_weight,
        }
    }

    /// Weighted loss and gradient over the examples at `indices`, reduced
    /// in index order.
    pub fn loss_and_grad(
        &self,
        kernel: &KernelMLP,
        control: &PreparedGroup,
        treatment: &PreparedGroup,
        indices: &[usize],
    ) -> Result<(f64, Vec<f64>)> {
        let p = kernel.num_params();
        let parts: Vec<Result<(f64, Vec<f64>)>> = indices
            .par_iter()
            .map(|&k| {
                let ex = &self.examples[k];
                let data = match ex.group {
                    Group::Control => control,
                    Group::Treatment => treatment,
                };
                let w = self.weight(ex);
                let mut g = vec![0.0; p];
                let l = example_loss(kernel, data, ex, w, Some(&mut g))?;
                Ok((w * l, g))
            })
            .collect();
        let mut total = 0.0;
        let mut grad = vec![0.0; p];
        for part in parts {
            let (l, g) = part?;
            total += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        Ok((total, grad))
    }

    /// Weighted loss only.
    pub fn loss(&self, kernel: &KernelMLP, control: &PreparedGroup, treatment: &PreparedGroup) -> Result<f64> {
        let parts: Vec<Result<f64>> = self
            .examples
            .par_iter()
            .map(|ex| {
                let data = match ex.group {
                    Group::Control => control,
                    Group::Treatment => treatment,
                };
                Ok(self.weight(ex) * example_loss(kernel, data, ex, 0.0, None)?)
            })
            .collect();
        parts.into_iter().sum()
    }
}

/// Full joint objective over every example, with its gradient.
pub fn joint_objective(
    kernel: &KernelMLP,
    control: &PreparedGroup,
    treatment: &PreparedGroup,
    examples: &ExampleSet,
) -> Result<(f64, Vec<f64>)> {
    let all: Vec<usize> = (0..examples.examples.len()).collect();
    examples.loss_and_grad(kernel, control, treatment, &all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joint_loss_examples() {
        assert_eq!(joint_loss(&[1.0, 2.0], &[1.0, 2.0], &[3.0], &[3.0], 0.7).unwrap(), 0.0);
        assert_eq!(joint_loss(&[2.0], &[0.0], &[], &[], 0.0).unwrap(), 4.0);
        // control term 1, treatment term 2
        let l = joint_loss(&[1.0, -1.0], &[0.0, 0.0], &[2f64.sqrt()], &[0.0], 0.5).unwrap();
        assert!((l - 2.0).abs() < 1e-15);
    }

    #[test]
    fn joint_loss_errors() {
        assert!(joint_loss(&[], &[], &[1.0], &[1.0], 1.0).is_err());
        assert!(joint_loss(&[1.0], &[1.0], &[], &[], 0.5).is_err());
        assert!(joint_loss(&[1.0], &[1.0, 2.0], &[], &[], 0.0).is_err());
        assert!(joint_loss(&[1.0], &[1.0], &[], &[], -1.0).is_err());
    }
}
