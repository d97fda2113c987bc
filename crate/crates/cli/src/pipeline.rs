//! The stages behind the subcommands. Each reads the artifacts of earlier
//! stages from one working directory and writes its own.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cliffbench_core::curation::{curate as curate_records, CurationStats};
use cliffbench_core::eval::{evaluate_trial, AcDecision, EvalReport, TrialMetrics};
use cliffbench_core::mmp::{build_mmps_from_fragments, fragment_single_cuts, MmpCounts};
use cliffbench_core::models::FeatureStore;
use cliffbench_core::split::{plan_trials, SplitPlan};
use serde::{Deserialize, Serialize};

use crate::benchmark::{parallel_map, train_all, twin_all, JobOutput, TuningRecord};
use crate::config::{RunConfig, Settings};
use crate::error::{require, CliError, Result};
use crate::io;

pub const SCHEMA_VERSION: u32 = 1;

pub const CONFIG: &str = "config.json";
pub const CURATED: &str = "curated.csv";
pub const CURATION_LOG: &str = "curation_log.jsonl";
pub const CURATION_SUMMARY: &str = "curation_summary.json";
pub const MMPS: &str = "mmps.csv";
pub const PAIRS_SUMMARY: &str = "pairs_summary.json";
pub const SPLITS: &str = "splits.json";
pub const PREDICTIONS: &str = "predictions.csv";
pub const TUNING: &str = "tuning.json";
pub const TWIN_PREDICTIONS: &str = "twin_predictions.csv";
pub const RESULTS: &str = "results.json";
pub const DECISIONS: &str = "decisions.csv";

/// A stage's working directory.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredConfig {
    pub config_digest: String,
    pub settings: Settings,
}

impl Workspace {
    pub fn new(dir: impl Into<PathBuf>) -> Workspace {
        Workspace { dir: dir.into() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn input(&self, name: &str, producer: &str) -> Result<PathBuf> {
        require(self.path(name), producer)
    }

    /// Settings for a stage: from `config` when given (and then stored for
    /// later stages), else from the stored copy, else the defaults (not stored).
    pub fn settings(&self, config: Option<&RunConfig>) -> Result<Settings> {
        let stored = self.path(CONFIG);
        match config {
            Some(cfg) => {
                let settings = cfg.resolve()?;
                self.store_settings(&settings)?;
                Ok(settings)
            }
            None if stored.is_file() => Ok(io::read_json::<StoredConfig>(&stored)?.settings),
            None => RunConfig::default().resolve(),
        }
    }

    fn store_settings(&self, settings: &Settings) -> Result<()> {
        io::write_json(
            &self.path(CONFIG),
            &StoredConfig {
                config_digest: settings.digest(),
                settings: settings.clone(),
            },
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurationSummary {
    pub config_digest: String,
    pub input_rows: usize,
    pub malformed_rows: usize,
    pub stats: CurationStats,
}

/// Reads an activity CSV and writes the curated table, log and summary.
pub fn curate(input: &Path, ws: &Workspace, settings: &Settings) -> Result<CurationSummary> {
    let table = io::load_activity_csv(input)?;
    let curated = curate_records(&table.records);
    if !curated.stats.reconciles() {
        return Err(CliError::Runtime("curation counts do not reconcile".into()));
    }
    let digest = settings.digest();
    io::write_curated(&ws.path(CURATED), &curated.compounds, &digest)?;
    io::write_curation_log(&ws.path(CURATION_LOG), &curated.log, &table.errors, &digest)?;
    let summary = CurationSummary {
        config_digest: digest,
        input_rows: table.records.len() + table.errors.len(),
        malformed_rows: table.errors.len(),
        stats: curated.stats,
    };
    io::write_json(&ws.path(CURATION_SUMMARY), &summary)?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairsSummary {
    pub config_digest: String,
    pub counts: MmpCounts,
    /// Non-ACs per AC (the "1 : x" ratio); absent without ACs.
    pub non_acs_per_ac: Option<f64>,
}

/// Builds the MMP table of the curated compounds.
pub fn pairs(ws: &Workspace, settings: &Settings, threads: usize) -> Result<PairsSummary> {
    let compounds = io::read_curated(&ws.input(CURATED, "curate")?)?;
    let fragments = parallel_map(threads, &compounds, |c| Ok(fragment_single_cuts(&c.mol)))?;
    let mmps = build_mmps_from_fragments(&compounds, fragments);
    let digest = settings.digest();
    io::write_mmps(&ws.path(MMPS), &mmps, &digest)?;
    let counts = MmpCounts::of(compounds.len(), &mmps);
    let summary = PairsSummary {
        config_digest: digest,
        non_acs_per_ac: counts.non_ac_per_ac(),
        counts,
    };
    io::write_json(&ws.path(PAIRS_SUMMARY), &summary)?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub config_digest: String,
    pub n_compounds: usize,
    pub k: usize,
    pub m: usize,
    pub master_seed: u64,
    pub plans: Vec<SplitPlan>,
}

/// Draws the `k * m` trials and derives their MMP sets.
pub fn split(ws: &Workspace, settings: &Settings) -> Result<Splits> {
    let n = io::read_curated(&ws.input(CURATED, "curate")?)?.len();
    let mmps = io::read_mmps(&ws.input(MMPS, "pairs")?)?;
    if n < settings.k {
        return Err(CliError::Data(format!("{n} compounds cannot be split into {} folds", settings.k)));
    }
    let plans = plan_trials(n, &mmps, settings.k, settings.m, settings.master_seed);
    let pairs = cliffbench_core::split::labeled_pairs(&mmps);
    for p in &plans {
        p.check(n, &pairs).map_err(|e| CliError::Runtime(format!("trial (i={}, j={}): {e}", p.i, p.j)))?;
    }
    let splits = Splits {
        config_digest: settings.digest(),
        n_compounds: n,
        k: settings.k,
        m: settings.m,
        master_seed: settings.master_seed,
        plans,
    };
    io::write_json(&ws.path(SPLITS), &splits)?;
    Ok(splits)
}

struct Loaded {
    store: FeatureStore,
    labels: Vec<f64>,
    splits: Splits,
}

fn load_for_training(ws: &Workspace) -> Result<Loaded> {
    let compounds = io::read_curated(&ws.input(CURATED, "curate")?)?;
    let splits: Splits = io::read_json(&ws.input(SPLITS, "split")?)?;
    if splits.n_compounds != compounds.len() {
        return Err(CliError::Data(format!(
            "{SPLITS} was drawn for {} compounds but {CURATED} has {}; rerun `cliffbench split`",
            splits.n_compounds,
            compounds.len()
        )));
    }
    let labels = compounds.iter().map(|c| c.a).collect();
    Ok(Loaded {
        store: FeatureStore::from_compounds(&compounds),
        labels,
        splits,
    })
}

fn prediction_rows(outputs: &[JobOutput], plans: &[SplitPlan], digest: &str) -> Vec<io::PredictionRow> {
    let train_sets: BTreeMap<(usize, usize), Vec<bool>> = plans
        .iter()
        .map(|p| {
            let mut mask = vec![false; p.d_train.len() + p.d_test.len()];
            for &c in &p.d_train {
                mask[c] = true;
            }
            ((p.i, p.j), mask)
        })
        .collect();
    let mut rows = Vec::new();
    for out in outputs {
        let mask = &train_sets[&(out.i, out.j)];
        for (c, &v) in out.predictions.iter().enumerate() {
            rows.push(io::PredictionRow {
                model: out.model.clone(),
                i: out.i,
                j: out.j,
                compound: c,
                in_train: mask[c],
                prediction: v,
                config_digest: digest.to_string(),
            });
        }
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningLog {
    pub config_digest: String,
    pub records: Vec<TuningRecord>,
}

/// Tunes and fits every model in every trial; writes predictions for all
/// compounds and the tuning log.
pub fn train(ws: &Workspace, settings: &Settings, threads: usize) -> Result<usize> {
    let data = load_for_training(ws)?;
    let (outputs, records) = train_all(settings, &data.store, &data.labels, &data.splits.plans, threads)?;
    let digest = settings.digest();
    io::write_predictions(&ws.path(PREDICTIONS), &prediction_rows(&outputs, &data.splits.plans, &digest))?;
    io::write_json(
        &ws.path(TUNING),
        &TuningLog {
            config_digest: digest,
            records,
        },
    )?;
    Ok(outputs.len())
}

/// Twin-trains the configured MLP models with their tuned hyperparameters.
pub fn twin(ws: &Workspace, settings: &Settings, threads: usize) -> Result<usize> {
    let data = load_for_training(ws)?;
    let mmps = io::read_mmps(&ws.input(MMPS, "pairs")?)?;
    let tuning: TuningLog = io::read_json(&ws.input(TUNING, "train")?)?;
    let pairs = mmps.iter().map(|m| (m.mmp_id, (m.index_1, m.index_2))).collect();
    let outputs = twin_all(settings, &data.store, &data.labels, &data.splits.plans, &pairs, &tuning.records, threads)?;
    let digest = settings.digest();
    io::write_predictions(&ws.path(TWIN_PREDICTIONS), &prediction_rows(&outputs, &data.splits.plans, &digest))?;
    Ok(outputs.len())
}

/// One evaluated model; `training` is `standard` or `twin`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub training: String,
    pub report: EvalReport,
}

/// The full benchmark result, from which every report is rendered.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Results {
    pub schema_version: u32,
    pub config_digest: String,
    pub settings: Settings,
    pub dataset: MmpCounts,
    pub n_trials: usize,
    pub models: Vec<ModelResult>,
}

/// Per-compound predictions keyed by `(i, j)`.
type ByTrial = BTreeMap<(usize, usize), Vec<Option<f64>>>;

fn group_predictions(rows: Vec<io::PredictionRow>, n: usize) -> Result<BTreeMap<String, ByTrial>> {
    let mut out: BTreeMap<String, ByTrial> = BTreeMap::new();
    for r in rows {
        let slot = out.entry(r.model).or_default().entry((r.i, r.j)).or_insert_with(|| vec![None; n]);
        if r.compound >= n {
            return Err(CliError::Data(format!("prediction for unknown compound {}", r.compound)));
        }
        slot[r.compound] = Some(r.prediction);
    }
    Ok(out)
}

/// Scores stored predictions; results are ordered by model, then `(i, j)`.
pub fn eval(ws: &Workspace, settings: &Settings) -> Result<Results> {
    let compounds = io::read_curated(&ws.input(CURATED, "curate")?)?;
    let mmps = io::read_mmps(&ws.input(MMPS, "pairs")?)?;
    let splits: Splits = io::read_json(&ws.input(SPLITS, "split")?)?;
    let labels: Vec<f64> = compounds.iter().map(|c| c.a).collect();
    let n = compounds.len();

    let mut sources = vec![("standard", io::read_predictions(&ws.input(PREDICTIONS, "train")?)?)];
    let twin_path = ws.path(TWIN_PREDICTIONS);
    if twin_path.is_file() {
        sources.push(("twin", io::read_predictions(&twin_path)?));
    }

    let mut models = Vec::new();
    let mut decision_rows = Vec::new();
    for (training, rows) in sources {
        let grouped = group_predictions(rows, n)?;
        // keep the configured model order rather than alphabetical
        let mut names: Vec<&String> = grouped.keys().collect();
        names.sort_by_key(|name| {
            let base = name.trim_end_matches(" (twin)");
            settings.models.iter().position(|m| m == base).unwrap_or(usize::MAX)
        });
        for name in names {
            let by_trial = &grouped[name];
            let mut trials: Vec<TrialMetrics> = Vec::new();
            for plan in &splits.plans {
                let preds = by_trial.get(&(plan.i, plan.j)).ok_or_else(|| {
                    CliError::Data(format!("no predictions for {name} trial (i={}, j={})", plan.i, plan.j))
                })?;
                let (metrics, decisions) = evaluate_trial(plan, &labels, preds, &mmps, settings.d_crit)
                    .map_err(|e| CliError::Data(format!("{name} trial (i={}, j={}): {e}", plan.i, plan.j)))?;
                trials.push(metrics);
                decision_rows.extend(decisions.into_iter().map(|d| decision_row(name, plan, &d)));
            }
            models.push(ModelResult {
                training: training.to_string(),
                report: EvalReport::aggregate(name.clone(), trials),
            });
        }
    }
    let digest = settings.digest();
    for row in &mut decision_rows {
        row.push(digest.clone());
    }
    io::write_table(
        &ws.path(DECISIONS),
        &["model", "i", "j", "mmp_id", "set", "predicted", "truth", "config_digest"],
        &decision_rows,
    )?;
    let results = Results {
        schema_version: SCHEMA_VERSION,
        config_digest: digest,
        settings: settings.clone(),
        dataset: MmpCounts::of(n, &mmps),
        n_trials: splits.plans.len(),
        models,
    };
    io::write_json(&ws.path(RESULTS), &results)?;
    Ok(results)
}

fn decision_row(model: &str, plan: &SplitPlan, d: &AcDecision) -> Vec<String> {
    vec![
        model.to_string(),
        plan.i.to_string(),
        plan.j.to_string(),
        d.mmp_id.to_string(),
        d.set_kind.as_str().to_string(),
        d.predicted.as_str().to_string(),
        d.truth.as_str().to_string(),
    ]
}

/// Every stage in order; the twin stage only when enabled in the config.
pub fn run_all(input: &Path, ws: &Workspace, config: &RunConfig) -> Result<Results> {
    let settings = ws.settings(Some(config))?;
    curate(input, ws, &settings)?;
    pairs(ws, &settings, config.threads)?;
    split(ws, &settings)?;
    train(ws, &settings, config.threads)?;
    if config.twin.enabled {
        twin(ws, &settings, config.threads)?;
    } else if ws.path(TWIN_PREDICTIONS).is_file() {
        std::fs::remove_file(ws.path(TWIN_PREDICTIONS)).map_err(|e| CliError::io(&ws.path(TWIN_PREDICTIONS), e))?;
    }
    let results = eval(ws, &settings)?;
    crate::report::render(ws)?;
    Ok(results)
}
