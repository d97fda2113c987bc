//! Pair-based training of deep QSAR models with one shared-weight network.
//!
//! Both members of every pair go through the same forward pass (rows
//! `s_1..s_P, t_1..t_P`), so the two branches cannot drift apart.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::models::deep::{AtomEncoder, Body, GinBody, GraphInput, MlpBody, Standardizer, TargetScale};
use crate::models::{
    deep_params, DeepParams, FeatureStore, GinHead, GinModel, Hyperparams, MlpModel, ModelError, ModelSpec,
    RegressorKind, Representation, TrainedRegressor,
};
use crate::nn::{AdamW, Graph, NnError, Params, Tensor, Var};
use crate::split::stream_rng;

/// `w_pair * [(a_s - f_s)^2 + (a_t - f_t)^2 + w_diff * ((a_s - a_t) - (f_s - f_t))^2]`.
pub fn twin_loss(a_s: f64, a_t: f64, f_s: f64, f_t: f64, w_pair: f64, w_diff: f64) -> f64 {
    let (es, et) = (a_s - f_s, a_t - f_t);
    let ed = (a_s - a_t) - (f_s - f_t);
    w_pair * (es * es + et * et + w_diff * (ed * ed))
}

/// How phase-2 MMPs are weighted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PairWeighting {
    Uniform,
    /// Proportional to the absolute activity difference, scaled to mean 1.
    Proportional,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TwinConfig {
    /// Epochs over random pairs of training compounds.
    pub phase1_epochs: usize,
    /// Epochs over training MMPs; 0 disables the phase.
    pub phase2_epochs: usize,
    pub w_diff: f64,
    pub weighting: PairWeighting,
}

impl Default for TwinConfig {
    fn default() -> Self {
        TwinConfig {
            phase1_epochs: 250,
            phase2_epochs: 250,
            w_diff: 1.0,
            weighting: PairWeighting::Proportional,
        }
    }
}

/// Pair weights `w_i = d_i / mean(d)`; uniform when every difference is 0.
pub fn proportional_weights(deltas: &[f64]) -> Vec<f64> {
    let n = deltas.len().max(1) as f64;
    let mean = deltas.iter().sum::<f64>() / n;
    if mean > 0.0 {
        deltas.iter().map(|d| d / mean).collect()
    } else {
        alloc::vec![1.0; deltas.len()]
    }
}

/// A perfect matching of `0..n` from a shuffled order; with odd `n` the
/// leftover item is paired with a random other item.
pub fn random_matching<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pairs: Vec<(usize, usize)> = order.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    if n % 2 == 1 && n > 1 {
        let last = order[n - 1];
        let other = order[rng.random_range(0..n - 1)];
        pairs.push((last, other));
    }
    pairs
}

/// Mean twin loss of a batch, divided by two so that it is the per-compound
/// mean squared error when `w_diff = 0` and all weights are 1:
/// `sum_p twin_loss_p / (2P)`.
#[allow(clippy::too_many_arguments)]
pub fn twin_batch_loss<B: Body>(
    g: &mut Graph<'_>,
    body: &mut B,
    data: &B::Data,
    targets: &[f64],
    pairs: &[(usize, usize)],
    weights: &[f64],
    w_diff: f64,
    training: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Var, NnError> {
    let p = pairs.len();
    let rows: Vec<usize> = pairs.iter().map(|x| x.0).chain(pairs.iter().map(|x| x.1)).collect();
    let pred = body.forward(g, data, &rows, training, rng)?;
    let target = g.input(Tensor::column(rows.iter().map(|&r| targets[r]).collect()));
    let both: Vec<f64> = weights.iter().chain(weights).copied().collect();
    let single = g.weighted_mse(pred, target, both)?;
    let first: Vec<usize> = (0..p).collect();
    let second: Vec<usize> = (p..2 * p).collect();
    let (fs, ft) = (g.select_rows(pred, &first), g.select_rows(pred, &second));
    let f_diff = g.sub(fs, ft)?;
    let a_diff = g.input(Tensor::column(pairs.iter().map(|&(s, t)| targets[s] - targets[t]).collect()));
    let diff = g.weighted_mse(f_diff, a_diff, weights.iter().map(|w| w * w_diff).collect())?;
    let diff = g.scale(diff, 0.5);
    g.add(single, diff)
}

/// Handed to the observer after every optimiser step.
pub struct TwinStep<'a> {
    pub phase: u8,
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    /// The single parameter set both branches read from.
    pub params: &'a Params,
}

pub type Observer<'o> = &'o mut dyn FnMut(&TwinStep<'_>);

#[derive(Clone, Debug, PartialEq)]
struct Phase {
    id: u8,
    epochs: usize,
    pairs: Vec<(usize, usize)>,
    weights: Vec<f64>,
}

/// Runs both phases; returns the per-epoch mean batch loss.
#[allow(clippy::too_many_arguments)]
fn train_twin<B: Body>(
    params: &mut Params,
    body: &mut B,
    data: &B::Data,
    targets: &[f64],
    phase2: Option<WeightedPairs>,
    cfg: &TwinConfig,
    hp: &DeepParams,
    rng: &mut ChaCha8Rng,
    mut observer: Option<Observer<'_>>,
) -> Result<Vec<f64>, ModelError> {
    let n = targets.len();
    let mut opt = AdamW::new(params, hp.lr, hp.weight_decay, hp.schedule());
    let pairs_per_batch = (hp.batch_size / 2).max(1);
    let mut phases = alloc::vec![Phase {
        id: 1,
        epochs: cfg.phase1_epochs,
        pairs: Vec::new(),
        weights: Vec::new(),
    }];
    if let Some((pairs, weights)) = phase2 {
        if cfg.phase2_epochs > 0 && !pairs.is_empty() {
            phases.push(Phase {
                id: 2,
                epochs: cfg.phase2_epochs,
                pairs,
                weights,
            });
        }
    }
    let mut curve = Vec::new();
    let (mut epoch, mut step) = (0usize, 0usize);
    for phase in &phases {
        for _ in 0..phase.epochs {
            opt.set_epoch(epoch);
            let (pairs, weights) = if phase.id == 1 {
                let m = random_matching(n, rng);
                let w = alloc::vec![1.0; m.len()];
                (m, w)
            } else {
                let mut order: Vec<usize> = (0..phase.pairs.len()).collect();
                order.shuffle(rng);
                (
                    order.iter().map(|&i| phase.pairs[i]).collect(),
                    order.iter().map(|&i| phase.weights[i]).collect(),
                )
            };
            let (mut total, mut batches) = (0.0, 0usize);
            for (bp, bw) in pairs.chunks(pairs_per_batch).zip(weights.chunks(pairs_per_batch)) {
                let (value, grads) = {
                    let mut g = Graph::new(params);
                    let loss = twin_batch_loss(&mut g, body, data, targets, bp, bw, cfg.w_diff, true, rng)?;
                    let value = g.value(loss).item();
                    if !value.is_finite() {
                        return Err(ModelError::Diverged);
                    }
                    (value, g.backward(loss)?)
                };
                opt.step(params, &grads);
                total += value;
                batches += 1;
                step += 1;
                if let Some(obs) = observer.as_mut() {
                    obs(&TwinStep {
                        phase: phase.id,
                        epoch,
                        step,
                        loss: value,
                        params,
                    });
                }
            }
            curve.push(total / batches.max(1) as f64);
            epoch += 1;
        }
    }
    Ok(curve)
}

/// Phase-2 pairs in local training coordinates plus their weights.
/// Pairs in local training indices with their weights.
type WeightedPairs = (Vec<(usize, usize)>, Vec<f64>);

fn local_mmps(
    train: &[usize],
    mmps: &[(usize, usize)],
    labels: &[f64],
    weighting: PairWeighting,
) -> Result<WeightedPairs, ModelError> {
    let local: BTreeMap<usize, usize> = train.iter().enumerate().map(|(l, &g)| (g, l)).collect();
    let mut pairs = Vec::with_capacity(mmps.len());
    let mut deltas = Vec::with_capacity(mmps.len());
    for &(s, t) in mmps {
        match (local.get(&s), local.get(&t)) {
            (Some(&ls), Some(&lt)) => {
                pairs.push((ls, lt));
                deltas.push((labels[s] - labels[t]).abs());
            }
            // only pairs with both compounds in training may be used
            _ => return Err(ModelError::Hyperparameter("phase-2 pair outside the training compounds")),
        }
    }
    let weights = match weighting {
        PairWeighting::Uniform => alloc::vec![1.0; pairs.len()],
        PairWeighting::Proportional => proportional_weights(&deltas),
    };
    Ok((pairs, weights))
}

/// Twin-trains an MLP (on ECFP or PDV) or GIN+MLP model on compounds
/// `train`, then on the compound pairs `mmps` (global indices, both in
/// `train`). The result predicts single compounds like any other model.
#[allow(clippy::too_many_arguments)]
pub fn twin_fit(
    spec: ModelSpec,
    hp: &Hyperparams,
    store: &FeatureStore,
    train: &[usize],
    mmps: &[(usize, usize)],
    labels: &[f64],
    cfg: &TwinConfig,
    seed: u64,
    observer: Option<Observer<'_>>,
) -> Result<TrainedRegressor, ModelError> {
    if spec.regressor != RegressorKind::Mlp {
        return Err(ModelError::Representation);
    }
    if train.len() < 2 {
        return Err(ModelError::EmptyTraining);
    }
    if labels.len() != store.len() {
        return Err(ModelError::Length(labels.len(), store.len()));
    }
    if !(cfg.w_diff >= 0.0) || !cfg.w_diff.is_finite() {
        return Err(ModelError::Hyperparameter("w_diff must be finite and non-negative"));
    }
    let dp = deep_params(hp, seed)?;
    let y: Vec<f64> = train.iter().map(|&i| labels[i]).collect();
    let target = TargetScale::fit(&y);
    let z: Vec<f64> = y.iter().map(|&v| target.forward(v)).collect();
    let phase2 = Some(local_mmps(train, mmps, labels, cfg.weighting)?);
    let mut rng = stream_rng(seed, 0);
    let mut params = Params::new();
    match spec.representation {
        Representation::Ecfp | Representation::Pdv => {
            let x: Vec<Vec<f64>> = if spec.representation == Representation::Ecfp {
                train.iter().map(|&i| store.fps[i].to_dense()).collect()
            } else {
                train.iter().map(|&i| store.pdv[i].clone()).collect()
            };
            let inputs = Standardizer::fit(&x);
            let data = inputs.apply(&x);
            let mut body = MlpBody::new(&mut params, data.cols, &dp, &mut rng);
            let loss_curve = train_twin(&mut params, &mut body, &data, &z, phase2, cfg, &dp, &mut rng, observer)?;
            let model = MlpModel {
                hp: dp,
                params,
                body,
                inputs,
                target,
                loss_curve,
            };
            Ok(if spec.representation == Representation::Ecfp {
                TrainedRegressor::EcfpMlp(model)
            } else {
                TrainedRegressor::PdvMlp(model)
            })
        }
        Representation::Gin => {
            let encoder = AtomEncoder::fit(train.iter().map(|&i| &store.mols[i]));
            let graphs: Vec<GraphInput> = train.iter().map(|&i| encoder.encode(&store.mols[i])).collect();
            let mut body = GinBody::new(&mut params, encoder.dim(), &dp, GinHead::Mlp, &mut rng);
            let loss_curve = train_twin(&mut params, &mut body, &graphs, &z, phase2, cfg, &dp, &mut rng, observer)?;
            Ok(TrainedRegressor::GinMlp(GinModel {
                hp: dp,
                head: GinHead::Mlp,
                params,
                body,
                encoder,
                target,
                loss_curve,
            }))
        }
    }
}
