//! QSAR regressors over three molecular representations.

pub mod deep;
pub mod forest;
pub mod knn;
pub mod tune;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::chem::Molecule;
use crate::curation::CompoundRecord;
use crate::featurize::{descriptor_vector, ecfp, Fingerprint, DEFAULT_NBITS, DEFAULT_RADIUS};
use crate::nn::NnError;

pub use deep::{DeepParams, GinHead, GinModel, MlpModel};
pub use forest::{Forest, ForestParams};
pub use knn::{Knn, KnnMetric};
pub use tune::{default_grid, tune, tune_and_fit, Grid, TuneResult, TuneTrial};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("no training data")]
    EmptyTraining,
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("invalid hyperparameter: {0}")]
    Hyperparameter(&'static str),
    #[error("model was fitted on a different representation")]
    Representation,
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("training diverged")]
    Diverged,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Representation {
    Ecfp,
    Pdv,
    Gin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RegressorKind {
    Rf,
    Knn,
    Mlp,
}

/// A representation paired with a regression technique.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelSpec {
    pub representation: Representation,
    pub regressor: RegressorKind,
}

const fn s(representation: Representation, regressor: RegressorKind) -> ModelSpec {
    ModelSpec {
        representation,
        regressor,
    }
}

impl ModelSpec {
    pub const ALL: [ModelSpec; 9] = {
        use RegressorKind::*;
        use Representation::*;
        [
            s(Ecfp, Rf),
            s(Ecfp, Knn),
            s(Ecfp, Mlp),
            s(Pdv, Rf),
            s(Pdv, Knn),
            s(Pdv, Mlp),
            s(Gin, Rf),
            s(Gin, Knn),
            s(Gin, Mlp),
        ]
    };

    pub fn name(&self) -> String {
        let r = match self.representation {
            Representation::Ecfp => "ECFP",
            Representation::Pdv => "PDV",
            Representation::Gin => "GIN",
        };
        let m = match self.regressor {
            RegressorKind::Rf => "RF",
            RegressorKind::Knn => "kNN",
            RegressorKind::Mlp => "MLP",
        };
        alloc::format!("{r}+{m}")
    }

    /// Parses `ECFP+RF`-style names, case-insensitively.
    pub fn parse(s: &str) -> Option<ModelSpec> {
        ModelSpec::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Hyperparameters by name; integers are stored as whole floats.
pub type Hyperparams = BTreeMap<String, f64>;

fn hp_get(hp: &Hyperparams, key: &str, default: f64) -> f64 {
    hp.get(key).copied().unwrap_or(default)
}

fn hp_usize(hp: &Hyperparams, key: &'static str, default: usize) -> Result<usize, ModelError> {
    let v = hp_get(hp, key, default as f64);
    if !(v >= 0.0) || libm::trunc(v) != v {
        return Err(ModelError::Hyperparameter(key));
    }
    Ok(v as usize)
}

pub fn forest_params(hp: &Hyperparams, seed: u64) -> Result<ForestParams, ModelError> {
    let d = ForestParams::default();
    Ok(ForestParams {
        n_trees: hp_usize(hp, "n_trees", d.n_trees)?,
        max_depth: hp_usize(hp, "max_depth", d.max_depth)?,
        min_samples_leaf: hp_usize(hp, "min_leaf", d.min_samples_leaf)?,
        max_features: hp_get(hp, "max_features", d.max_features),
        bootstrap: true,
        seed,
    })
}

pub fn deep_params(hp: &Hyperparams, seed: u64) -> Result<DeepParams, ModelError> {
    let d = DeepParams::default();
    Ok(DeepParams {
        width: hp_usize(hp, "width", d.width)?,
        layers: hp_usize(hp, "layers", d.layers)?,
        dropout: hp_get(hp, "dropout", d.dropout),
        weight_decay: hp_get(hp, "weight_decay", d.weight_decay),
        lr: hp_get(hp, "lr", d.lr),
        lr_decay_factor: hp_get(hp, "lr_decay_factor", d.lr_decay_factor),
        lr_decay_interval: hp_usize(hp, "lr_decay_interval", d.lr_decay_interval)?,
        batch_size: hp_usize(hp, "batch_size", d.batch_size)?,
        epochs: hp_usize(hp, "epochs", d.epochs)?,
        seed,
    })
}

/// Precomputed features for every compound of a data set.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStore {
    pub mols: Vec<Molecule>,
    pub fps: Vec<Fingerprint>,
    pub pdv: Vec<Vec<f64>>,
}

impl FeatureStore {
    pub fn from_molecules(mols: Vec<Molecule>) -> FeatureStore {
        let fps = mols.iter().map(|m| ecfp(m, DEFAULT_RADIUS, DEFAULT_NBITS, false)).collect();
        let pdv = mols.iter().map(|m| descriptor_vector(m).values).collect();
        FeatureStore { mols, fps, pdv }
    }

    pub fn from_compounds(compounds: &[CompoundRecord]) -> FeatureStore {
        FeatureStore::from_molecules(compounds.iter().map(|c| c.mol.clone()).collect())
    }

    pub fn len(&self) -> usize {
        self.mols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mols.is_empty()
    }

    fn dense_ecfp(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter().map(|&i| self.fps[i].to_dense()).collect()
    }

    fn dense_pdv(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter().map(|&i| self.pdv[i].clone()).collect()
    }

    fn mols_at(&self, idx: &[usize]) -> Vec<&Molecule> {
        idx.iter().map(|&i| &self.mols[i]).collect()
    }
}

/// A fitted model of any of the nine kinds.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainedRegressor {
    EcfpRf(Forest),
    EcfpKnn(Knn),
    EcfpMlp(MlpModel),
    PdvRf(Forest),
    PdvKnn(Knn),
    PdvMlp(MlpModel),
    /// Random forest on frozen embeddings of a GIN trained with a linear head.
    GinRf(GinModel, Forest),
    /// Euclidean kNN on frozen GIN embeddings.
    GinKnn(GinModel, Knn),
    GinMlp(GinModel),
}

impl TrainedRegressor {
    /// Fits `spec` on compounds `train` with per-compound `labels`.
    pub fn fit(
        spec: ModelSpec,
        hp: &Hyperparams,
        store: &FeatureStore,
        train: &[usize],
        labels: &[f64],
        seed: u64,
    ) -> Result<TrainedRegressor, ModelError> {
        if train.is_empty() {
            return Err(ModelError::EmptyTraining);
        }
        if labels.len() != store.len() {
            return Err(ModelError::Length(labels.len(), store.len()));
        }
        let y: Vec<f64> = train.iter().map(|&i| labels[i]).collect();
        let k = || hp_usize(hp, "k", 5).map(|k| k.clamp(1, train.len()));
        use RegressorKind as K;
        use Representation as R;
        Ok(match (spec.representation, spec.regressor) {
            (R::Ecfp, K::Rf) => TrainedRegressor::EcfpRf(Forest::fit(&store.dense_ecfp(train), &y, forest_params(hp, seed)?)?),
            (R::Ecfp, K::Knn) => {
                let fps = train.iter().map(|&i| store.fps[i].clone()).collect();
                TrainedRegressor::EcfpKnn(Knn::fit_fingerprints(fps, y, k()?)?)
            }
            (R::Ecfp, K::Mlp) => TrainedRegressor::EcfpMlp(MlpModel::fit(&store.dense_ecfp(train), &y, &deep_params(hp, seed)?)?),
            (R::Pdv, K::Rf) => TrainedRegressor::PdvRf(Forest::fit(&store.dense_pdv(train), &y, forest_params(hp, seed)?)?),
            (R::Pdv, K::Knn) => TrainedRegressor::PdvKnn(Knn::fit_dense(store.dense_pdv(train), y, k()?, true)?),
            (R::Pdv, K::Mlp) => TrainedRegressor::PdvMlp(MlpModel::fit(&store.dense_pdv(train), &y, &deep_params(hp, seed)?)?),
            (R::Gin, K::Mlp) => {
                TrainedRegressor::GinMlp(GinModel::fit(&store.mols_at(train), &y, &deep_params(hp, seed)?, GinHead::Mlp)?)
            }
            (R::Gin, kind) => {
                let mols = store.mols_at(train);
                let gin = GinModel::fit(&mols, &y, &deep_params(hp, seed)?, GinHead::Linear)?;
                let emb = gin.embed(&mols)?;
                if kind == K::Rf {
                    let forest = Forest::fit(&emb, &y, forest_params(hp, seed)?)?;
                    TrainedRegressor::GinRf(gin, forest)
                } else {
                    let knn = Knn::fit_dense(emb, y, k()?, false)?;
                    TrainedRegressor::GinKnn(gin, knn)
                }
            }
        })
    }

    pub fn predict(&self, store: &FeatureStore, idx: &[usize]) -> Result<Vec<f64>, ModelError> {
        use TrainedRegressor as T;
        match self {
            T::EcfpRf(f) => Ok(idx.iter().map(|&i| f.predict(&store.fps[i].to_dense())).collect()),
            T::EcfpKnn(k) => idx.iter().map(|&i| k.predict_fingerprint(&store.fps[i])).collect(),
            T::EcfpMlp(m) => m.predict(&store.dense_ecfp(idx)),
            T::PdvRf(f) => Ok(idx.iter().map(|&i| f.predict(&store.pdv[i])).collect()),
            T::PdvKnn(k) => idx.iter().map(|&i| k.predict_dense(&store.pdv[i])).collect(),
            T::PdvMlp(m) => m.predict(&store.dense_pdv(idx)),
            T::GinMlp(g) => g.predict(&store.mols_at(idx)),
            T::GinRf(g, f) => Ok(g.embed(&store.mols_at(idx))?.iter().map(|e| f.predict(e)).collect()),
            T::GinKnn(g, k) => g.embed(&store.mols_at(idx))?.iter().map(|e| k.predict_dense(e)).collect(),
        }
    }

    /// Per-epoch training loss of the gradient-trained part, if any.
    pub fn loss_curve(&self) -> Option<&[f64]> {
        use TrainedRegressor as T;
        match self {
            T::EcfpMlp(m) | T::PdvMlp(m) => Some(&m.loss_curve),
            T::GinMlp(g) | T::GinRf(g, _) | T::GinKnn(g, _) => Some(&g.loss_curve),
            _ => None,
        }
    }
}
