//! Model × trial jobs for the `train` and `twin` stages.

use std::collections::BTreeMap;

use cliffbench_core::models::{tune_and_fit, FeatureStore, Hyperparams, ModelSpec, TuneResult};
use cliffbench_core::split::SplitPlan;
use cliffbench_core::twin::{twin_fit, TwinConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Settings;
use crate::error::{CliError, Result};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one job. Models are keyed by their position among all nine, so
/// a model's results do not depend on which other models were selected.
pub fn job_seed(master_seed: u64, trial: usize, spec: ModelSpec, salt: u64) -> u64 {
    let model = ModelSpec::ALL.iter().position(|s| *s == spec).expect("known model") as u64;
    let mut h = splitmix64(master_seed);
    for v in [trial as u64, model, salt] {
        h = splitmix64(h ^ v);
    }
    h
}

/// Runs `f` over `items` on `threads` workers (0 = all cores), keeping the
/// input order of the results.
pub fn parallel_map<T, R, F>(threads: usize, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningRecord {
    pub model: String,
    pub i: usize,
    pub j: usize,
    pub seed: u64,
    pub result: TuneResult,
}

/// Predictions of one fitted model for every compound of the data set.
#[derive(Clone, Debug)]
pub struct JobOutput {
    pub model: String,
    pub i: usize,
    pub j: usize,
    pub predictions: Vec<f64>,
}

fn all_compounds(store: &FeatureStore) -> Vec<usize> {
    (0..store.len()).collect()
}

fn failed(spec: impl std::fmt::Display, plan: &SplitPlan, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{spec} trial (i={}, j={}): {e}", plan.i, plan.j))
}

/// Tunes and fits every selected model on every trial's training set.
pub fn train_all(
    settings: &Settings,
    store: &FeatureStore,
    labels: &[f64],
    plans: &[SplitPlan],
    threads: usize,
) -> Result<(Vec<JobOutput>, Vec<TuningRecord>)> {
    let jobs: Vec<(ModelSpec, usize)> = settings
        .model_specs()
        .into_iter()
        .flat_map(|spec| (0..plans.len()).map(move |t| (spec, t)))
        .collect();
    let everything = all_compounds(store);
    let results = parallel_map(threads, &jobs, |&(spec, t)| {
        let plan = &plans[t];
        let seed = job_seed(settings.master_seed, t, spec, 0);
        let grid = settings.grid(spec);
        let (model, tuned) = tune_and_fit(spec, &grid, settings.tuning_budget, store, &plan.d_train, labels, seed)
            .map_err(|e| failed(spec, plan, e))?;
        let predictions = model.predict(store, &everything).map_err(|e| failed(spec, plan, e))?;
        Ok((
            JobOutput {
                model: spec.name(),
                i: plan.i,
                j: plan.j,
                predictions,
            },
            TuningRecord {
                model: spec.name(),
                i: plan.i,
                j: plan.j,
                seed,
                result: tuned,
            },
        ))
    })?;
    Ok(results.into_iter().unzip())
}

/// Model name under which twin-trained results are reported.
pub fn twin_name(spec: ModelSpec) -> String {
    format!("{spec} (twin)")
}

/// Twin-trains each twin model per trial with the hyperparameters tuned for
/// the same model and trial, on the trial's training compounds and 𝓜_train.
pub fn twin_all(
    settings: &Settings,
    store: &FeatureStore,
    labels: &[f64],
    plans: &[SplitPlan],
    pairs: &BTreeMap<usize, (usize, usize)>,
    tuned: &[TuningRecord],
    threads: usize,
) -> Result<Vec<JobOutput>> {
    let best: BTreeMap<(String, usize, usize), &Hyperparams> =
        tuned.iter().map(|r| ((r.model.clone(), r.i, r.j), &r.result.best)).collect();
    let jobs: Vec<(ModelSpec, usize)> = settings
        .twin_specs()
        .into_iter()
        .flat_map(|spec| (0..plans.len()).map(move |t| (spec, t)))
        .collect();
    let everything = all_compounds(store);
    let cfg: TwinConfig = settings.twin;
    parallel_map(threads, &jobs, |&(spec, t)| {
        let plan = &plans[t];
        let hp = best.get(&(spec.name(), plan.i, plan.j)).ok_or_else(|| {
            CliError::Data(format!(
                "no tuned hyperparameters for {spec} trial (i={}, j={}); run `cliffbench train` first",
                plan.i, plan.j
            ))
        })?;
        let m_train = plan
            .m_train
            .iter()
            .map(|id| pairs.get(id).copied().ok_or_else(|| CliError::Data(format!("splits reference unknown MMP {id}"))))
            .collect::<Result<Vec<_>>>()?;
        let seed = job_seed(settings.master_seed, t, spec, 1);
        let model = twin_fit(spec, hp, store, &plan.d_train, &m_train, labels, &cfg, seed, None)
            .map_err(|e| failed(twin_name(spec), plan, e))?;
        let predictions = model.predict(store, &everything).map_err(|e| failed(twin_name(spec), plan, e))?;
        Ok(JobOutput {
            model: twin_name(spec),
            i: plan.i,
            j: plan.j,
            predictions,
        })
    })
}
