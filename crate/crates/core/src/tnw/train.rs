use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::attention::PairEncoding;
use super::loss::{ExampleSet, PreparedGroup};
use super::model::{FeatureScaler, TnwModel};
use super::subsets::sample_subsets;
use crate::datagen::{Dataset, Group, GroupNorm, NormStats};
use crate::nn::{Activation, AdamConfig, AdamState, KernelArch, KernelMLP};
use crate::rng;
use crate::{Error, Result};

/// Subset size as an absolute count or a fraction of the group size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubsetSize {
    Count(usize),
    Fraction(f64),
}

impl SubsetSize {
    /// Fractions round to the nearest count and are clamped to `1..=rows−1`;
    /// counts are taken as given.
    pub fn resolve(self, rows: usize) -> usize {
        match self {
            SubsetSize::Count(k) => k,
            SubsetSize::Fraction(f) => {
                let k = (f * rows as f64).round() as usize;
                k.clamp(1, rows.saturating_sub(1).max(1))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TnwConfig {
    /// Neighbors per control example.
    pub n: SubsetSize,
    /// Neighbors per treatment example.
    pub m: SubsetSize,
    /// Subsets drawn per control row.
    pub subsets_per_control: usize,
    /// Subsets drawn per treatment row.
    pub subsets_per_treatment: usize,
    /// Weight of the treatment term in the joint loss. `None` means the
    /// family default when run from the harness, and 0.5 otherwise.
    pub alpha: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Redraw subsets at the start of every epoch after the first.
    pub resample_each_epoch: bool,
    pub standardize_features: bool,
    /// Kernel input layout; fixes the kernel's input width.
    pub pair_encoding: PairEncoding,
}

impl Default for TnwConfig {
    fn default() -> Self {
        TnwConfig {
            n: SubsetSize::Count(80),
            m: SubsetSize::Fraction(0.8),
            subsets_per_control: 1,
            subsets_per_treatment: 1,
            alpha: None,
            epochs: 100,
            batch_size: 32,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            adam: AdamConfig::default(),
            seed: 0,
            resample_each_epoch: false,
            standardize_features: true,
            pair_encoding: PairEncoding::default(),
        }
    }
}

impl TnwConfig {
    pub fn alpha_or(&self, default: f64) -> f64 {
        self.alpha.unwrap_or(default)
    }

    pub fn arch(&self, d: usize) -> KernelArch {
        KernelArch {
            input_dim: self.pair_encoding.width(d),
            hidden: self.hidden.clone(),
            activation: self.activation,
        }
    }

    fn validate(&self, c: usize, t: usize, alpha: f64) -> Result<(usize, usize)> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!("alpha {alpha} must be finite and non-negative")));
        }
        if self.subsets_per_control == 0 || self.subsets_per_treatment == 0 {
            return Err(Error::invalid("subsets per example must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        let n = self.n.resolve(c);
        if n == 0 || n + 1 > c {
            return Err(Error::invalid(format!(
                "n = {n} must lie in 1..={}",
                c.saturating_sub(1)
            )));
        }
        let m = self.m.resolve(t);
        if alpha > 0.0 && (m == 0 || m + 1 > t) {
            return Err(Error::invalid(format!(
                "m = {m} must lie in 1..={}",
                t.saturating_sub(1)
            )));
        }
        Ok((n, m))
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Joint loss accumulated over each epoch.
    pub loss_history: Vec<f64>,
    pub alpha: f64,
    pub n: usize,
    pub m: usize,
}

/// Fits the shared kernel on both groups (outcomes in original scale) and
/// returns the model with its per-epoch loss history. `alpha` falls back to
/// 0.5 when the config leaves it unset.
pub fn train_tnw(control: &Dataset, treatment: &Dataset, config: &TnwConfig) -> Result<(TnwModel, TrainReport)> {
    let alpha = config.alpha_or(0.5);
    let (c, t) = (control.len(), treatment.len());
    if t == 0 {
        return Err(Error::invalid("treatment set is empty"));
    }
    if control.dim() != treatment.dim() {
        return Err(Error::Dimension {
            context: "treatment features",
            expected: control.dim(),
            actual: treatment.dim(),
        });
    }
    let (n, m) = config.validate(c, t, alpha)?;
    let d = control.dim();

    let norm = GroupNorm {
        control: NormStats::fit(control.outcomes(), Group::Control)?,
        treatment: NormStats::fit(treatment.outcomes(), Group::Treatment)?,
    };
    let normalize = |set: &Dataset, g: Group| {
        let s = norm.get(g);
        set.with_outcomes(set.outcomes().iter().map(|&y| s.normalize(y)).collect())
    };
    let control_z = normalize(control, Group::Control)?;
    let treatment_z = normalize(treatment, Group::Treatment)?;

    let scaler = if config.standardize_features {
        FeatureScaler::fit(&[control.features(), treatment.features()])?
    } else {
        FeatureScaler::identity(d)
    };
    let prep = |s: &Dataset| PreparedGroup {
        features: scaler.transform(s.features()),
        outcomes: s.outcomes().to_vec(),
    };
    let pc = prep(&control_z);
    let pt = prep(&treatment_z);

    let mut kernel = KernelMLP::new(&config.arch(d), config.seed)?;
    let mut adam = AdamState::new(kernel.num_params(), config.adam)?;

    let mut control_rng = rng::stream(config.seed, &[rng::label("subsets"), Group::Control as u64]);
    let mut treatment_rng = rng::stream(config.seed, &[rng::label("subsets"), Group::Treatment as u64]);
    let mut shuffle_rng = rng::stream(config.seed, &[rng::label("shuffle")]);
    let mut draw = || -> Result<ExampleSet> {
        let ce = sample_subsets(Group::Control, c, config.subsets_per_control, n, &mut control_rng)?;
        // α = 0: the treatment term has no weight, so its examples are not built.
        let te = if alpha > 0.0 {
            sample_subsets(Group::Treatment, t, config.subsets_per_treatment, m, &mut treatment_rng)?
        } else {
            Vec::new()
        };
        ExampleSet::new(ce, te, alpha)
    };

    let mut examples = draw()?;
    let mut order: Vec<usize> = (0..examples.examples.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        if epoch > 0 && config.resample_each_epoch {
            examples = draw()?;
        }
        order.shuffle(&mut shuffle_rng);
        let total = order.len() as f64;
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (loss, mut grad) = examples.loss_and_grad(&kernel, &pc, &pt, batch)?;
            // Rescale so the expected batch gradient is the full-objective gradient.
            let scale = total / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            kernel.update_params(|p| adam.step(p, &grad))?;
            epoch_loss += loss;
        }
        if !epoch_loss.is_finite() {
            return Err(Error::NonFinite {
                context: "epoch loss",
                index: epoch,
            });
        }
        loss_history.push(epoch_loss);
    }

    let model = TnwModel::new(kernel, scaler, norm, control_z, treatment_z)?;
    Ok((
        model,
        TrainReport {
            loss_history,
            alpha,
            n,
            m,
        },
    ))
}
