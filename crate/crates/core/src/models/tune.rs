//! Random search over hyperparameter grids with a single inner holdout.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{FeatureStore, Hyperparams, ModelError, ModelSpec, RegressorKind, Representation, TrainedRegressor};
use crate::split::stream_rng;

/// Candidate values per hyperparameter.
pub type Grid = BTreeMap<String, Vec<f64>>;

/// Fraction of the training compounds held out for validation.
pub const HOLDOUT_FRACTION: f64 = 0.2;

fn grid(entries: &[(&str, &[f64])]) -> Grid {
    entries.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect()
}

const DEEP: [(&str, &[f64]); 7] = [
    ("dropout", &[0.0, 0.1, 0.25, 0.5]),
    ("weight_decay", &[0.0, 1e-4, 1e-3, 1e-2]),
    ("lr", &[1e-4, 1e-3, 1e-2]),
    ("lr_decay_factor", &[1.0, 0.9, 0.5]),
    ("lr_decay_interval", &[50.0, 100.0, 250.0]),
    ("batch_size", &[32.0, 64.0, 128.0, 256.0]),
    ("epochs", &[500.0]),
];

const RF: [(&str, &[f64]); 4] = [
    ("n_trees", &[100.0, 200.0, 300.0, 400.0, 500.0]),
    ("max_depth", &[0.0, 8.0, 16.0, 32.0]),
    ("min_leaf", &[1.0, 2.0, 4.0, 8.0]),
    ("max_features", &[0.1, 0.33, 0.5, 1.0]),
];

pub fn default_grid(spec: ModelSpec) -> Grid {
    let knn: Vec<f64> = (1..=25).map(|k| k as f64).collect();
    let mut g = match spec.regressor {
        RegressorKind::Rf => grid(&RF),
        RegressorKind::Knn => grid(&[("k", &knn)]),
        RegressorKind::Mlp => Grid::new(),
    };
    match (spec.representation, spec.regressor) {
        (Representation::Gin, _) => {
            g.extend(grid(&DEEP));
            g.extend(grid(&[("layers", &[1.0, 2.0, 3.0]), ("width", &[32.0, 64.0, 128.0])]));
        }
        (_, RegressorKind::Mlp) => {
            g.extend(grid(&DEEP));
            g.extend(grid(&[
                ("layers", &[1.0, 2.0, 3.0]),
                ("width", &[64.0, 128.0, 256.0, 512.0]),
            ]));
        }
        _ => {}
    }
    g
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TuneTrial {
    pub hyperparams: Hyperparams,
    /// Validation MAE; `None` when fitting failed.
    pub val_mae: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TuneResult {
    pub best: Hyperparams,
    pub best_val_mae: f64,
    pub trials: Vec<TuneTrial>,
}

/// Draws one value per key uniformly from its candidates.
pub fn sample<R: Rng + ?Sized>(grid: &Grid, rng: &mut R) -> Hyperparams {
    grid.iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(k, v)| (k.clone(), v[rng.random_range(0..v.len())]))
        .collect()
}

/// Evaluates `n_samples` random grid points on an inner holdout of `train`.
/// The lowest validation MAE wins; ties keep the earlier sample.
#[allow(clippy::too_many_arguments)]
pub fn tune(
    spec: ModelSpec,
    grid: &Grid,
    n_samples: usize,
    store: &FeatureStore,
    train: &[usize],
    labels: &[f64],
    seed: u64,
) -> Result<TuneResult, ModelError> {
    if n_samples == 0 {
        return Err(ModelError::Hyperparameter("n_samples must be at least 1"));
    }
    if train.len() < 4 {
        return Err(ModelError::EmptyTraining);
    }
    let mut order = train.to_vec();
    order.shuffle(&mut stream_rng(seed, 0));
    let n_val = (libm::round(train.len() as f64 * HOLDOUT_FRACTION) as usize).clamp(1, train.len() - 2);
    let (val, inner) = order.split_at(n_val);
    let mut rng = stream_rng(seed, 1);
    let mut trials = Vec::with_capacity(n_samples);
    let mut best: Option<(f64, usize)> = None;
    for t in 0..n_samples {
        let hp = sample(grid, &mut rng);
        let outcome = TrainedRegressor::fit(spec, &hp, store, inner, labels, seed)
            .and_then(|m| m.predict(store, val))
            .and_then(|pred| {
                let mae = pred.iter().zip(val).map(|(p, &i)| (p - labels[i]).abs()).sum::<f64>() / val.len() as f64;
                if mae.is_finite() {
                    Ok(mae)
                } else {
                    Err(ModelError::Diverged)
                }
            });
        let trial = match outcome {
            Ok(mae) => {
                if best.is_none_or(|(b, _)| mae < b) {
                    best = Some((mae, t));
                }
                TuneTrial {
                    hyperparams: hp,
                    val_mae: Some(mae),
                    error: None,
                }
            }
            Err(e) => TuneTrial {
                hyperparams: hp,
                val_mae: None,
                error: Some(e.to_string()),
            },
        };
        trials.push(trial);
    }
    let (best_val_mae, at) = best.ok_or(ModelError::Diverged)?;
    Ok(TuneResult {
        best: trials[at].hyperparams.clone(),
        best_val_mae,
        trials,
    })
}

/// Tunes, then refits the winner on all of `train`.
pub fn tune_and_fit(
    spec: ModelSpec,
    grid: &Grid,
    n_samples: usize,
    store: &FeatureStore,
    train: &[usize],
    labels: &[f64],
    seed: u64,
) -> Result<(TrainedRegressor, TuneResult), ModelError> {
    let result = tune(spec, grid, n_samples, store, train, labels, seed)?;
    let model = TrainedRegressor::fit(spec, &result.best, store, train, labels, seed)?;
    Ok((model, result))
}

/// Grid with every key fixed to one value.
pub fn fixed(hp: &Hyperparams) -> Grid {
    hp.iter().map(|(k, v)| (k.clone(), vec![*v])).collect()
}
