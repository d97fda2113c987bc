//! Run configuration: a TOML file mirroring [`RunConfig`], resolved into
//! [`Settings`], whose SHA-256 digest tags every output artifact.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use cliffbench_core::eval::DEFAULT_D_CRIT;
use cliffbench_core::models::{default_grid, Grid, Hyperparams, ModelSpec, RegressorKind};
use cliffbench_core::twin::{PairWeighting, TwinConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Grid values may be written as integers or floats.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(untagged)]
enum Number {
    Int(i64),
    Float(f64),
}

impl Number {
    fn get(self) -> f64 {
        match self {
            Number::Int(v) => v as f64,
            Number::Float(v) => v,
        }
    }
}

type RawGrid = BTreeMap<String, Vec<Number>>;

fn to_grid(raw: &RawGrid) -> Grid {
    raw.iter().map(|(k, v)| (k.clone(), v.iter().map(|n| n.get()).collect())).collect()
}

fn default_models() -> Vec<String> {
    vec!["all".into()]
}

fn default_k() -> usize {
    2
}

fn default_m() -> usize {
    3
}

fn default_d_crit() -> f64 {
    DEFAULT_D_CRIT
}

fn default_budget() -> usize {
    10
}

/// Twin-training block of the config file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwinSection {
    /// Whether `run` includes the twin stage.
    #[serde(default)]
    pub enabled: bool,
    /// MLP-based models to twin-train; empty means every selected MLP model.
    #[serde(default)]
    pub models: Vec<String>,
    #[serde(default = "TwinSection::default_epochs")]
    pub phase1_epochs: usize,
    #[serde(default = "TwinSection::default_epochs")]
    pub phase2_epochs: usize,
    #[serde(default = "TwinSection::default_w_diff")]
    pub w_diff: f64,
    #[serde(default = "TwinSection::default_weighting")]
    pub weighting: PairWeighting,
}

impl TwinSection {
    fn default_epochs() -> usize {
        TwinConfig::default().phase1_epochs
    }

    fn default_w_diff() -> f64 {
        TwinConfig::default().w_diff
    }

    fn default_weighting() -> PairWeighting {
        TwinConfig::default().weighting
    }
}

impl Default for TwinSection {
    fn default() -> Self {
        TwinSection {
            enabled: false,
            models: Vec::new(),
            phase1_epochs: Self::default_epochs(),
            phase2_epochs: Self::default_epochs(),
            w_diff: Self::default_w_diff(),
            weighting: Self::default_weighting(),
        }
    }
}

/// The config file as written by the user.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// TOML file of `[<model name>]` tables mapping hyperparameters to
    /// candidate lists.
    pub grid_file: Option<PathBuf>,
    /// Model names such as `ECFP+RF`, or `all`.
    #[serde(default = "default_models")]
    pub models: Vec<String>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_d_crit")]
    pub d_crit: f64,
    /// Random grid samples per model and trial.
    #[serde(default = "default_budget")]
    pub tuning_budget: usize,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub threads: usize,
    /// Inline grid overrides, applied after `grid_file`.
    #[serde(default)]
    grids: BTreeMap<String, RawGrid>,
    #[serde(default)]
    pub twin: TwinSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config is valid")
    }
}

/// Everything that influences results; IO paths and thread count excluded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub models: Vec<String>,
    pub k: usize,
    pub m: usize,
    pub master_seed: u64,
    pub d_crit: f64,
    pub tuning_budget: usize,
    pub grids: BTreeMap<String, Grid>,
    pub twin_models: Vec<String>,
    pub twin: TwinConfig,
}

impl RunConfig {
    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.dataset, &mut cfg.output_dir, &mut cfg.grid_file].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn selected_models(&self) -> Result<Vec<ModelSpec>> {
        parse_models(&self.models)
    }

    /// Checks ranges and referenced files, then resolves grids.
    pub fn resolve(&self) -> Result<Settings> {
        if self.k < 2 {
            return Err(CliError::Usage(format!("k must be at least 2, got {}", self.k)));
        }
        if self.m < 1 {
            return Err(CliError::Usage("m must be at least 1".into()));
        }
        if !(self.d_crit > 0.0) || !self.d_crit.is_finite() {
            return Err(CliError::Usage(format!("d_crit must be positive, got {}", self.d_crit)));
        }
        if self.tuning_budget < 1 {
            return Err(CliError::Usage("tuning_budget must be at least 1".into()));
        }
        if !(self.twin.w_diff >= 0.0) || !self.twin.w_diff.is_finite() {
            return Err(CliError::Usage("twin.w_diff must be finite and non-negative".into()));
        }
        if let Some(d) = &self.dataset {
            if !d.is_file() {
                return Err(CliError::Usage(format!("dataset {} does not exist", d.display())));
            }
        }
        let models = self.selected_models()?;
        let mut overrides: BTreeMap<String, RawGrid> = BTreeMap::new();
        if let Some(path) = &self.grid_file {
            let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            overrides = toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        }
        for (name, g) in &self.grids {
            overrides.entry(name.clone()).or_default().extend(g.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
        for name in overrides.keys() {
            if ModelSpec::parse(name).is_none() {
                return Err(CliError::Usage(format!("grid given for unknown model {name:?}")));
            }
        }
        let mut grids = BTreeMap::new();
        for spec in &models {
            let mut grid = default_grid(*spec);
            for (name, g) in &overrides {
                if ModelSpec::parse(name) == Some(*spec) {
                    grid.extend(to_grid(g));
                }
            }
            if let Some((key, _)) = grid.iter().find(|(_, v)| v.is_empty()) {
                return Err(CliError::Usage(format!("{spec}: grid for {key} is empty")));
            }
            grids.insert(spec.name(), grid);
        }
        let twin_models = if self.twin.models.is_empty() {
            models.iter().filter(|s| s.regressor == RegressorKind::Mlp).copied().collect()
        } else {
            parse_models(&self.twin.models)?
        };
        for spec in &twin_models {
            if spec.regressor != RegressorKind::Mlp {
                return Err(CliError::Usage(format!("twin training needs an MLP model, got {spec}")));
            }
            if !models.contains(spec) {
                return Err(CliError::Usage(format!("twin model {spec} is not among the selected models")));
            }
        }
        Ok(Settings {
            models: models.iter().map(ModelSpec::name).collect(),
            k: self.k,
            m: self.m,
            master_seed: self.master_seed,
            d_crit: self.d_crit,
            tuning_budget: self.tuning_budget,
            grids,
            twin_models: twin_models.iter().map(ModelSpec::name).collect(),
            twin: TwinConfig {
                phase1_epochs: self.twin.phase1_epochs,
                phase2_epochs: self.twin.phase2_epochs,
                w_diff: self.twin.w_diff,
                weighting: self.twin.weighting,
            },
        })
    }
}

fn parse_models(names: &[String]) -> Result<Vec<ModelSpec>> {
    if names.iter().any(|n| n.eq_ignore_ascii_case("all")) {
        return Ok(ModelSpec::ALL.to_vec());
    }
    let mut out = Vec::new();
    for n in names {
        let spec = ModelSpec::parse(n).ok_or_else(|| CliError::Usage(format!("unknown model {n:?}")))?;
        if !out.contains(&spec) {
            out.push(spec);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no models selected".into()));
    }
    // keep the canonical order regardless of how the list was written
    out.sort_by_key(|s| ModelSpec::ALL.iter().position(|a| a == s));
    Ok(out)
}

impl Settings {
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("settings serialize");
        hex(&Sha256::digest(json))
    }

    pub fn model_specs(&self) -> Vec<ModelSpec> {
        self.models.iter().filter_map(|n| ModelSpec::parse(n)).collect()
    }

    pub fn twin_specs(&self) -> Vec<ModelSpec> {
        self.twin_models.iter().filter_map(|n| ModelSpec::parse(n)).collect()
    }

    pub fn grid(&self, spec: ModelSpec) -> Grid {
        self.grids.get(&spec.name()).cloned().unwrap_or_else(|| default_grid(spec))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hyperparameters as written into artifacts.
pub fn hyperparams_json(hp: &Hyperparams) -> serde_json::Value {
    serde_json::to_value(hp).expect("hyperparameters serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let s = RunConfig::default().resolve().unwrap();
        assert_eq!(s.models.len(), 9);
        assert_eq!((s.k, s.m, s.d_crit), (2, 3, 1.5));
        assert_eq!(s.twin_models, ["ECFP+MLP", "PDV+MLP", "GIN+MLP"]);
    }

    #[test]
    fn overrides_and_digest() {
        let cfg = RunConfig::parse(
            r#"
            models = ["pdv+knn", "ECFP+RF"]
            k = 3
            [grids."ECFP+RF"]
            n_trees = [10, 20]
            "#,
        )
        .unwrap();
        let s = cfg.resolve().unwrap();
        assert_eq!(s.models, ["ECFP+RF", "PDV+kNN"]);
        assert_eq!(s.grids["ECFP+RF"]["n_trees"], [10.0, 20.0]);
        let mut other = s.clone();
        assert_eq!(s.digest(), other.digest());
        other.d_crit = 2.0;
        assert_ne!(s.digest(), other.digest());
    }

    #[test]
    fn rejects_bad_values() {
        for text in ["k = 1", "m = 0", "d_crit = 0.0", "models = [\"ECFP+SVM\"]", "bogus = 1"] {
            let r = RunConfig::parse(text).and_then(|c| c.resolve());
            assert!(matches!(r, Err(CliError::Usage(_))), "{text}");
        }
        let twin = RunConfig::parse("models = [\"ECFP+RF\"]\n[twin]\nmodels = [\"ECFP+RF\"]").unwrap();
        assert!(twin.resolve().is_err());
    }
}
