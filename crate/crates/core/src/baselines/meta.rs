use serde::{Deserialize, Serialize};

use super::forest::{Forest, ForestConfig};
use super::gaussian_nw::GaussianNw;
use crate::datagen::{Dataset, Group};
use crate::nn::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseLearner {
    Forest(ForestConfig),
    GaussianNw { bandwidth: f64 },
}

impl BaseLearner {
    pub fn fit(&self, features: &Matrix, outcomes: &[f64]) -> Result<FittedBase> {
        Ok(match self {
            BaseLearner::Forest(cfg) => FittedBase::Forest(Forest::fit(features, outcomes, cfg)?),
            BaseLearner::GaussianNw { bandwidth } => {
                FittedBase::GaussianNw(GaussianNw::fit(features, outcomes, *bandwidth)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedBase {
    Forest(Forest),
    GaussianNw(GaussianNw),
}

impl FittedBase {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            FittedBase::Forest(f) => f.predict(x),
            FittedBase::GaussianNw(m) => m.predict(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetaKind {
    T,
    S,
    X,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaLearnerSpec {
    pub kind: MetaKind,
    pub base: BaseLearner,
    /// X-learner blend weight on `τ₀`; defaults to the treated share `t/(c+t)`.
    pub x_weight: Option<f64>,
}

impl MetaLearnerSpec {
    pub fn new(kind: MetaKind, base: BaseLearner) -> Self {
        MetaLearnerSpec {
            kind,
            base,
            x_weight: None,
        }
    }
}

/// A fitted meta-learner. Every prediction is in the outcome scale of the
/// data it was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedMeta {
    T {
        g0: FittedBase,
        g1: FittedBase,
    },
    S {
        g: FittedBase,
    },
    X {
        g0: FittedBase,
        g1: FittedBase,
        tau0: FittedBase,
        tau1: FittedBase,
        weight: f64,
    },
}

fn check_groups(control: &Dataset, treatment: &Dataset, min_rows: usize) -> Result<()> {
    for (set, name) in [(control, "control"), (treatment, "treatment")] {
        if set.len() < min_rows {
            return Err(Error::invalid(format!(
                "{name} group has {} rows; at least {min_rows} required",
                set.len()
            )));
        }
    }
    if control.dim() != treatment.dim() {
        return Err(Error::Dimension {
            context: "treatment features",
            expected: control.dim(),
            actual: treatment.dim(),
        });
    }
    Ok(())
}

fn with_indicator(x: &[f64], t: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(x.len() + 1);
    v.extend_from_slice(x);
    v.push(t);
    v
}

impl FittedMeta {
    pub fn fit(spec: &MetaLearnerSpec, control: &Dataset, treatment: &Dataset) -> Result<Self> {
        match spec.kind {
            MetaKind::T => {
                check_groups(control, treatment, 1)?;
                Ok(FittedMeta::T {
                    g0: spec.base.fit(control.features(), control.outcomes())?,
                    g1: spec.base.fit(treatment.features(), treatment.outcomes())?,
                })
            }
            MetaKind::S => {
                check_groups(control, treatment, 1)?;
                let features = control
                    .features()
                    .with_constant_column(Group::Control.indicator())
                    .vstack(&treatment.features().with_constant_column(Group::Treatment.indicator()))?;
                let outcomes: Vec<f64> = control.outcomes().iter().chain(treatment.outcomes()).copied().collect();
                Ok(FittedMeta::S {
                    g: spec.base.fit(&features, &outcomes)?,
                })
            }
            MetaKind::X => {
                check_groups(control, treatment, 2)?;
                let (c, t) = (control.len() as f64, treatment.len() as f64);
                let weight = spec.x_weight.unwrap_or(t / (c + t));
                if !(0.0..=1.0).contains(&weight) {
                    return Err(Error::invalid(format!("X-learner weight {weight} outside [0, 1]")));
                }
                let g0 = spec.base.fit(control.features(), control.outcomes())?;
                let g1 = spec.base.fit(treatment.features(), treatment.outcomes())?;
                // D₁(z_i) = h_i − g0(z_i), D₀(x_i) = g1(x_i) − y_i
                let d1 = treatment
                    .features()
                    .iter_rows()
                    .zip(treatment.outcomes())
                    .map(|(z, h)| Ok(h - g0.predict(z)?))
                    .collect::<Result<Vec<f64>>>()?;
                let d0 = control
                    .features()
                    .iter_rows()
                    .zip(control.outcomes())
                    .map(|(x, y)| Ok(g1.predict(x)? - y))
                    .collect::<Result<Vec<f64>>>()?;
                let tau1 = spec.base.fit(treatment.features(), &d1)?;
                let tau0 = spec.base.fit(control.features(), &d0)?;
                Ok(FittedMeta::X {
                    g0,
                    g1,
                    tau0,
                    tau1,
                    weight,
                })
            }
        }
    }

    pub fn kind(&self) -> MetaKind {
        match self {
            FittedMeta::T { .. } => MetaKind::T,
            FittedMeta::S { .. } => MetaKind::S,
            FittedMeta::X { .. } => MetaKind::X,
        }
    }

    /// Outcome model of one group at `x`.
    pub fn predict_response(&self, group: Group, x: &[f64]) -> Result<f64> {
        match self {
            FittedMeta::T { g0, g1 } | FittedMeta::X { g0, g1, .. } => match group {
                Group::Control => g0.predict(x),
                Group::Treatment => g1.predict(x),
            },
            FittedMeta::S { g } => g.predict(&with_indicator(x, group.indicator())),
        }
    }

    pub fn cate(&self, x: &[f64]) -> Result<f64> {
        match self {
            FittedMeta::T { g0, g1 } => Ok(g1.predict(x)? - g0.predict(x)?),
            FittedMeta::S { g } => Ok(g.predict(&with_indicator(x, 1.0))? - g.predict(&with_indicator(x, 0.0))?),
            FittedMeta::X { tau0, tau1, weight, .. } => {
                Ok(weight * tau0.predict(x)? + (1.0 - weight) * tau1.predict(x)?)
            }
        }
    }

    /// The X-learner's `(τ₀(x), τ₁(x))`.
    pub fn x_components(&self, x: &[f64]) -> Option<Result<(f64, f64)>> {
        match self {
            FittedMeta::X { tau0, tau1, .. } => Some(tau0.predict(x).and_then(|a| Ok((a, tau1.predict(x)?)))),
            _ => None,
        }
    }
}

pub fn t_learner_cate(control: &Dataset, treatment: &Dataset, base: &BaseLearner, query: &[f64]) -> Result<f64> {
    FittedMeta::fit(&MetaLearnerSpec::new(MetaKind::T, base.clone()), control, treatment)?.cate(query)
}

pub fn s_learner_cate(control: &Dataset, treatment: &Dataset, base: &BaseLearner, query: &[f64]) -> Result<f64> {
    FittedMeta::fit(&MetaLearnerSpec::new(MetaKind::S, base.clone()), control, treatment)?.cate(query)
}

pub fn x_learner_cate(
    control: &Dataset,
    treatment: &Dataset,
    base: &BaseLearner,
    x_weight: Option<f64>,
    query: &[f64],
) -> Result<f64> {
    let spec = MetaLearnerSpec {
        kind: MetaKind::X,
        base: base.clone(),
        x_weight,
    };
    FittedMeta::fit(&spec, control, treatment)?.cate(query)
}
