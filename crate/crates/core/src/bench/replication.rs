use std::collections::BTreeMap;
use std::time::Instant;

use super::bundle::tnw_config;
use super::config::{Axis, ExperimentSpec};
use super::grid::{grid_search, GridResult};
use super::model_id::ModelId;
use crate::baselines::{FittedMeta, MetaKind, MetaLearnerSpec};
use crate::datagen::{make_split_with, GeneratorSpec, Group, Split, TestSet};
use crate::rng;
use crate::tnw::train_tnw;
use crate::Result;

/// One model's scores on one replication. Metrics are `None` when the model failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub model: ModelId,
    pub axis: Axis,
    pub value: f64,
    pub replication: usize,
    pub cate_mse: Option<f64>,
    pub control_mse: Option<f64>,
    pub treatment_mse: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

impl ResultRow {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Per-point test predictions of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPredictions {
    pub model: ModelId,
    pub cate: Vec<f64>,
    pub control: Vec<f64>,
    pub treatment: Vec<f64>,
}

/// Seed of a replication's data: depends on the base seed, the axis value
/// index and the replication index.
pub fn replication_seed(base_seed: u64, value_index: usize, replication: usize) -> u64 {
    rng::derive_seed(
        base_seed,
        &[rng::label("replication"), value_index as u64, replication as u64],
    )
}

/// Seed of one model inside a replication.
pub fn model_seed(replication_seed: u64, model: ModelId) -> u64 {
    rng::derive_seed(replication_seed, &[rng::label(model.as_str())])
}

pub(crate) fn mse(pred: &[f64], truth: &[f64]) -> f64 {
    pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / truth.len() as f64
}

fn check_finite(model: ModelId, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(index) => Err(crate::Error::NonFinite {
            context: model.as_str(),
            index,
        }),
    }
}

/// Grid searches are shared between models whose outcome models coincide
/// (T and X both select on first-stage `g0`, `g1`).
type GridCache = BTreeMap<(bool, bool, u64), GridResult>;

fn predict_model(
    spec: &ExperimentSpec,
    model: ModelId,
    seed: u64,
    split: &Split,
    cache: &mut GridCache,
) -> Result<CellPredictions> {
    let test = &split.test;
    let rows = || test.features.iter_rows();
    match model.meta() {
        None => {
            let (tnw, _) = train_tnw(&split.train.control, &split.train.treatment, &tnw_config(spec, seed))?;
            let control = tnw.predict_many(Group::Control, &test.features)?;
            let treatment = tnw.predict_many(Group::Treatment, &test.features)?;
            let cate = treatment.iter().zip(&control).map(|(a, b)| a - b).collect();
            Ok(CellPredictions {
                model,
                cate,
                control,
                treatment,
            })
        }
        Some((kind, forest)) => {
            let key = (kind == MetaKind::S, forest, seed);
            let grid = match cache.get(&key) {
                Some(g) => g.clone(),
                None => {
                    let g = grid_search(model, &split.train, &split.validation, &spec.grids, seed)?;
                    cache.insert(key, g.clone());
                    g
                }
            };
            let fitted = FittedMeta::fit(
                &MetaLearnerSpec::new(kind, grid.base),
                &split.train.control,
                &split.train.treatment,
            )?;
            let mut out = CellPredictions {
                model,
                cate: Vec::with_capacity(test.len()),
                control: Vec::with_capacity(test.len()),
                treatment: Vec::with_capacity(test.len()),
            };
            for x in rows() {
                out.cate.push(fitted.cate(x)?);
                out.control.push(fitted.predict_response(Group::Control, x)?);
                out.treatment.push(fitted.predict_response(Group::Treatment, x)?);
            }
            Ok(out)
        }
    }
}

/// Generates the replication's data.
pub fn replication_split(
    spec: &ExperimentSpec,
    value_index: usize,
    replication: usize,
) -> Result<(GeneratorSpec, Split)> {
    let seed = replication_seed(spec.base_seed, value_index, replication);
    let generator = GeneratorSpec::sample(spec.family, spec.d, spec.noise_std, seed)?;
    let split = make_split_with(&generator, spec.c, spec.ratio, spec.val_fraction, spec.test_points)?;
    Ok((generator, split))
}

/// Runs every model of `spec` on one replication, returning rows in model
/// order with the per-point predictions of the models that succeeded.
pub fn run_replication_with_predictions(
    spec: &ExperimentSpec,
    axis: Axis,
    value: f64,
    value_index: usize,
    replication: usize,
) -> Result<(Vec<ResultRow>, Vec<CellPredictions>, TestSet)> {
    spec.validate()?;
    let (_, split) = replication_split(spec, value_index, replication)?;
    let rep_seed = replication_seed(spec.base_seed, value_index, replication);
    let mut models = spec.models.clone();
    models.sort();
    models.dedup();

    let mut cache = GridCache::new();
    let mut rows = Vec::with_capacity(models.len());
    let mut predictions = Vec::new();
    for model in models {
        // Baseline grid seeds ignore the model so that T and X share one search.
        let seed = match model.meta() {
            Some((kind, forest)) => {
                let stream = match (kind == MetaKind::S, forest) {
                    (true, true) => "S-RF",
                    (true, false) => "S-NW",
                    (false, true) => "T-RF",
                    (false, false) => "T-NW",
                };
                rng::derive_seed(rep_seed, &[rng::label(stream)])
            }
            None => model_seed(rep_seed, model),
        };
        let start = Instant::now();
        let outcome = predict_model(spec, model, seed, &split, &mut cache).and_then(|p| {
            check_finite(model, &p.cate)?;
            check_finite(model, &p.control)?;
            check_finite(model, &p.treatment)?;
            Ok(p)
        });
        let seconds = start.elapsed().as_secs_f64();
        let test = &split.test;
        let row = match outcome {
            Ok(p) => {
                let row = ResultRow {
                    model,
                    axis,
                    value,
                    replication,
                    cate_mse: Some(mse(&p.cate, &test.true_cate)),
                    control_mse: Some(mse(&p.control, &test.g0)),
                    treatment_mse: Some(mse(&p.treatment, &test.g1)),
                    seconds,
                    error: None,
                };
                predictions.push(p);
                row
            }
            Err(e) => ResultRow {
                model,
                axis,
                value,
                replication,
                cate_mse: None,
                control_mse: None,
                treatment_mse: None,
                seconds,
                error: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    Ok((rows, predictions, split.test))
}

pub fn run_replication(
    spec: &ExperimentSpec,
    axis: Axis,
    value: f64,
    value_index: usize,
    replication: usize,
) -> Result<Vec<ResultRow>> {
    run_replication_with_predictions(spec, axis, value, value_index, replication).map(|(rows, _, _)| rows)
}
