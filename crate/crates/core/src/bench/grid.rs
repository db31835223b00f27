use std::collections::BTreeMap;

use super::config::GridOverrides;
use super::model_id::ModelId;
use crate::baselines::{BaseLearner, FittedBase, FittedMeta, ForestConfig, MetaKind, MetaLearnerSpec};
use crate::datagen::{Group, GroupPair, NormStats};
use crate::{Error, Result};

/// All forest settings of the grid, trees outermost, then depth, then leaf size.
pub fn forest_grid(grids: &GridOverrides, seed: u64) -> Vec<ForestConfig> {
    let mut out = Vec::new();
    for &n_trees in &grids.forest_trees {
        for &depth in &grids.forest_depths {
            for &min_leaf in &grids.forest_min_leaf {
                out.push(ForestConfig {
                    n_trees,
                    max_depth: Some(depth),
                    min_leaf,
                    bootstrap: grids.forest_bootstrap,
                    seed,
                });
            }
        }
    }
    out
}

pub fn bandwidth_grid(grids: &GridOverrides) -> Vec<f64> {
    grids.bandwidths.clone()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub base: BaseLearner,
    pub validation_mse: f64,
    pub candidates: usize,
}

/// Summed per-group response MSE on validation rows, each group's errors
/// scaled by that group's training standard deviation.
pub fn validation_mse<F>(
    validation: &GroupPair,
    control: &NormStats,
    treatment: &NormStats,
    mut predict: F,
) -> Result<f64>
where
    F: FnMut(Group, &[f64]) -> Result<f64>,
{
    let mut total = 0.0;
    for (group, stats) in [(Group::Control, control), (Group::Treatment, treatment)] {
        let set = validation.get(group);
        if set.is_empty() {
            return Err(Error::invalid(format!("validation has no {group} rows")));
        }
        let mut sum = 0.0;
        for (x, &y) in set.features().iter_rows().zip(set.outcomes()) {
            let r = (predict(group, x)? - y) / stats.std;
            sum += r * r;
        }
        total += sum / set.len() as f64;
    }
    Ok(total)
}

fn truncate(base: &FittedBase, k: usize) -> Result<FittedBase> {
    match base {
        FittedBase::Forest(f) => Ok(FittedBase::Forest(f.truncated(k)?)),
        other => Ok(other.clone()),
    }
}

fn truncate_meta(meta: &FittedMeta, k: usize) -> Result<FittedMeta> {
    Ok(match meta {
        FittedMeta::T { g0, g1 } => FittedMeta::T {
            g0: truncate(g0, k)?,
            g1: truncate(g1, k)?,
        },
        FittedMeta::S { g } => FittedMeta::S { g: truncate(g, k)? },
        FittedMeta::X { .. } => unreachable!("grid search scores response models only"),
    })
}

/// Exhaustive search of the model's base-regressor grid. Candidates are
/// scored by [`validation_mse`] of the outcome models they induce (the
/// first-stage `g0`, `g1` for T and X, `g(·, T)` for S); the earliest
/// candidate wins ties.
pub fn grid_search(
    model: ModelId,
    train: &GroupPair,
    validation: &GroupPair,
    grids: &GridOverrides,
    seed: u64,
) -> Result<GridResult> {
    let (kind, forest) = model.meta().ok_or_else(|| {
        Error::invalid(format!(
            "{model} has no hyperparameter grid; it is trained as configured"
        ))
    })?;
    let response_kind = if kind == MetaKind::S { MetaKind::S } else { MetaKind::T };
    let control = NormStats::fit(train.control.outcomes(), Group::Control)?;
    let treatment = NormStats::fit(train.treatment.outcomes(), Group::Treatment)?;
    let score =
        |meta: &FittedMeta| validation_mse(validation, &control, &treatment, |g, x| meta.predict_response(g, x));

    let candidates: Vec<BaseLearner> = if forest {
        forest_grid(grids, seed).into_iter().map(BaseLearner::Forest).collect()
    } else {
        bandwidth_grid(grids)
            .into_iter()
            .map(|bandwidth| BaseLearner::GaussianNw { bandwidth })
            .collect()
    };
    if candidates.is_empty() {
        return Err(Error::invalid(format!("empty hyperparameter grid for {model}")));
    }

    // Forests differing only in tree count share a fit: a k-tree forest is
    // the first k trees of the largest one.
    let mut largest: BTreeMap<String, ForestConfig> = BTreeMap::new();
    let forest_key = |cfg: &ForestConfig| format!("{:?}|{:?}|{}", cfg.max_depth, cfg.min_leaf, cfg.bootstrap);
    for cand in &candidates {
        if let BaseLearner::Forest(cfg) = cand {
            let entry = largest.entry(forest_key(cfg)).or_insert_with(|| cfg.clone());
            entry.n_trees = entry.n_trees.max(cfg.n_trees);
        }
    }
    let mut fitted: BTreeMap<String, FittedMeta> = BTreeMap::new();

    let mut best: Option<(usize, f64)> = None;
    for (i, cand) in candidates.iter().enumerate() {
        let meta = match cand {
            BaseLearner::Forest(cfg) => {
                let key = forest_key(cfg);
                if !fitted.contains_key(&key) {
                    let spec = MetaLearnerSpec::new(response_kind, BaseLearner::Forest(largest[&key].clone()));
                    fitted.insert(key.clone(), FittedMeta::fit(&spec, &train.control, &train.treatment)?);
                }
                truncate_meta(&fitted[&key], cfg.n_trees)?
            }
            other => FittedMeta::fit(
                &MetaLearnerSpec::new(response_kind, other.clone()),
                &train.control,
                &train.treatment,
            )?,
        };
        let mse = score(&meta)?;
        if best.is_none_or(|(_, b)| mse < b) {
            best = Some((i, mse));
        }
    }
    let (i, validation_mse) = best.expect("non-empty grid");
    Ok(GridResult {
        base: candidates[i].clone(),
        validation_mse,
        candidates: candidates.len(),
    })
}
