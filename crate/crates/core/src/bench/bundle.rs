//! A trained model of any kind on disk: `model.json` names the model; TNW
//! models add their own files, meta-learners a `meta.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentSpec;
use super::grid::grid_search;
use super::model_id::ModelId;
use super::replication::mse;
use crate::baselines::{BaseLearner, FittedMeta, MetaLearnerSpec};
use crate::datagen::{Group, GroupPair, TestSet};
use crate::tnw::{train_tnw, TnwConfig, TnwModel};
use crate::{Error, Result};

const FORMAT: &str = "tnw-cate-bundle/1";

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Tnw(TnwModel),
    Meta {
        model: ModelId,
        /// Selected base regressor and its validation score.
        base: BaseLearner,
        validation_mse: f64,
        fitted: FittedMeta,
    },
}

#[derive(Serialize, Deserialize)]
struct BundleHeader {
    format: String,
    model: ModelId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base: Option<BaseLearner>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    validation_mse: Option<f64>,
}

/// TNW settings for one run: the family's default loss weight unless set,
/// and the given seed.
pub fn tnw_config(spec: &ExperimentSpec, seed: u64) -> TnwConfig {
    let mut cfg = spec.tnw.clone();
    cfg.alpha = Some(spec.alpha());
    cfg.seed = seed;
    cfg
}

/// Fits `model` on `train`; baselines pick their hyperparameters on `validation`.
pub fn train_model(
    model: ModelId,
    spec: &ExperimentSpec,
    train: &GroupPair,
    validation: &GroupPair,
    seed: u64,
) -> Result<TrainedModel> {
    match model.meta() {
        None => {
            let (m, _) = train_tnw(&train.control, &train.treatment, &tnw_config(spec, seed))?;
            Ok(TrainedModel::Tnw(m))
        }
        Some((kind, _)) => {
            let grid = grid_search(model, train, validation, &spec.grids, seed)?;
            let fitted = FittedMeta::fit(
                &MetaLearnerSpec::new(kind, grid.base.clone()),
                &train.control,
                &train.treatment,
            )?;
            Ok(TrainedModel::Meta {
                model,
                base: grid.base,
                validation_mse: grid.validation_mse,
                fitted,
            })
        }
    }
}

/// Test-set errors against the noise-free responses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestMetrics {
    pub cate_mse: f64,
    pub control_mse: f64,
    pub treatment_mse: f64,
}

impl TrainedModel {
    pub fn model(&self) -> ModelId {
        match self {
            TrainedModel::Tnw(_) => ModelId::Tnw,
            TrainedModel::Meta { model, .. } => *model,
        }
    }

    pub fn cate(&self, x: &[f64]) -> Result<f64> {
        match self {
            TrainedModel::Tnw(m) => m.estimate_cate(x),
            TrainedModel::Meta { fitted, .. } => fitted.cate(x),
        }
    }

    pub fn predict_response(&self, group: Group, x: &[f64]) -> Result<f64> {
        match self {
            TrainedModel::Tnw(m) => m.predict_response(group, x),
            TrainedModel::Meta { fitted, .. } => fitted.predict_response(group, x),
        }
    }

    /// Per-row `(cate, control, treatment)` predictions.
    pub fn predict_rows(&self, features: &crate::nn::Matrix) -> Result<Vec<(f64, f64, f64)>> {
        features
            .iter_rows()
            .map(|x| {
                let c = self.predict_response(Group::Control, x)?;
                let t = self.predict_response(Group::Treatment, x)?;
                Ok((self.cate(x)?, c, t))
            })
            .collect()
    }

    pub fn evaluate(&self, test: &TestSet) -> Result<TestMetrics> {
        let rows = self.predict_rows(&test.features)?;
        let column = |f: fn(&(f64, f64, f64)) -> f64| rows.iter().map(f).collect::<Vec<_>>();
        Ok(TestMetrics {
            cate_mse: mse(&column(|r| r.0), &test.true_cate),
            control_mse: mse(&column(|r| r.1), &test.g0),
            treatment_mse: mse(&column(|r| r.2), &test.g1),
        })
    }

    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let header = match self {
            TrainedModel::Tnw(m) => {
                m.save_dir(dir)?;
                BundleHeader {
                    format: FORMAT.into(),
                    model: ModelId::Tnw,
                    base: None,
                    validation_mse: None,
                }
            }
            TrainedModel::Meta {
                model,
                base,
                validation_mse,
                fitted,
            } => {
                let path = dir.join("meta.json");
                std::fs::write(&path, serde_json::to_string_pretty(fitted)?).map_err(|e| Error::io(&path, e))?;
                BundleHeader {
                    format: FORMAT.into(),
                    model: *model,
                    base: Some(base.clone()),
                    validation_mse: Some(*validation_mse),
                }
            }
        };
        let path = dir.join("model.json");
        std::fs::write(&path, serde_json::to_string_pretty(&header)?).map_err(|e| Error::io(&path, e))
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        let path = dir.join("model.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let header: BundleHeader = serde_json::from_str(&text)?;
        if header.format != FORMAT {
            return Err(Error::Parse(format!("unsupported bundle format `{}`", header.format)));
        }
        if header.model == ModelId::Tnw {
            return Ok(TrainedModel::Tnw(TnwModel::load_dir(dir)?));
        }
        let path = dir.join("meta.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let fitted: FittedMeta = serde_json::from_str(&text)?;
        let expected = header.model.meta().map(|m| m.0);
        if Some(fitted.kind()) != expected {
            return Err(Error::Parse(format!(
                "bundle says {} but holds a {:?}-learner",
                header.model,
                fitted.kind()
            )));
        }
        Ok(TrainedModel::Meta {
            model: header.model,
            base: header
                .base
                .ok_or_else(|| Error::Parse("bundle header lacks the base regressor".into()))?,
            validation_mse: header.validation_mse.unwrap_or(f64::NAN),
            fitted,
        })
    }
}
