//! Checks shared by the core test suite and the acceptance target. Each
//! returns a one-line summary or a description of the first violation.

use std::collections::BTreeSet;

use cliffbench_core::chem::GraphKey;
use cliffbench_core::curation::curate;
use cliffbench_core::eval::{accuracy, mae, Confusion};
use cliffbench_core::models::deep::{Body, DeepParams, MlpBody};
use cliffbench_core::models::{FeatureStore, Hyperparams, ModelSpec, RegressorKind, Representation, TrainedRegressor};
use cliffbench_core::mmp::build_mmps;
use cliffbench_core::nn::{AdamW, Graph, Params, StepDecay, Tensor};
use cliffbench_core::split::{derive_mmp_sets, split_molecules, stream_rng, PairRef};
use cliffbench_core::twin::{random_matching, twin_batch_loss, twin_fit, twin_loss, PairWeighting, TwinConfig, TwinStep};
use rand::Rng;

/// Random MMP graph with `n_pairs` distinct compound pairs over `n` compounds.
pub fn synthetic_pairs(n: usize, n_pairs: usize, n_cores: usize, seed: u64) -> Vec<PairRef> {
    let mut rng = stream_rng(seed, 1000);
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::with_capacity(n_pairs);
    while pairs.len() < n_pairs {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a == b || !seen.insert((a.min(b), a.max(b))) {
            continue;
        }
        let core = rng.random_range(0..n_cores) as u64;
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&core.to_le_bytes());
        pairs.push(PairRef {
            mmp_id: pairs.len(),
            compound_1: a,
            compound_2: b,
            core: GraphKey(key),
        });
    }
    pairs
}

/// `trials` plans at k = 2 on a graph of at least 10,000 MMPs: invariants
/// hold and every trial's train/inter/test fractions are within 3 points of
/// 25/50/25.
pub fn split_invariants(trials: usize) -> Result<String, String> {
    const N: usize = 3000;
    const PAIRS: usize = 12_000;
    let pairs = synthetic_pairs(N, PAIRS, 4000, 11);
    let m = trials.div_ceil(2);
    let splits = split_molecules(N, 2, m, 2024);
    let mut worst: f64 = 0.0;
    let mut sums = [0.0; 3];
    for s in splits.iter().take(trials) {
        let plan = derive_mmp_sets(s, N, &pairs);
        plan.check(N, &pairs).map_err(|e| format!("trial ({}, {}): {e}", s.i, s.j))?;
        let fr = [plan.m_train.len(), plan.m_inter.len(), plan.m_test.len()].map(|c| c as f64 / PAIRS as f64);
        for (k, (f, target)) in fr.iter().zip([0.25, 0.5, 0.25]).enumerate() {
            worst = worst.max((f - target).abs());
            sums[k] += f;
        }
        if worst > 0.03 {
            return Err(format!("trial ({}, {}) fractions {fr:?}", s.i, s.j));
        }
    }
    let mean = sums.map(|x| x / trials as f64);
    Ok(format!(
        "{trials} trials, {PAIRS} MMPs: invariants hold; mean fractions {:.3}/{:.3}/{:.3}, worst deviation {:.2} pp",
        mean[0],
        mean[1],
        mean[2],
        worst * 100.0
    ))
}

struct Expected {
    cm: (usize, usize, usize, usize),
    mcc: f64,
    sensitivity: Option<f64>,
    precision: Option<f64>,
    accuracy: f64,
}

/// Hand-computed values for fixed confusion matrices (TP, FP, FN, TN).
fn confusion_table() -> Vec<Expected> {
    let e = |cm, mcc, sensitivity, precision, accuracy| Expected {
        cm,
        mcc,
        sensitivity,
        precision,
        accuracy,
    };
    vec![
        e((2, 1, 1, 6), 11.0 / 21.0, Some(2.0 / 3.0), Some(2.0 / 3.0), 0.8),
        // no positive predictions: MCC 0, precision undefined
        e((0, 0, 3, 7), 0.0, Some(0.0), None, 0.7),
        e((5, 0, 0, 5), 1.0, Some(1.0), Some(1.0), 1.0),
        e((0, 5, 5, 0), -1.0, Some(0.0), Some(0.0), 0.0),
        e((1, 1, 1, 1), 0.0, Some(0.5), Some(0.5), 0.5),
        e((3, 1, 1, 3), 0.5, Some(0.75), Some(0.75), 0.75),
        e((4, 2, 2, 4), 1.0 / 3.0, Some(2.0 / 3.0), Some(2.0 / 3.0), 8.0 / 12.0),
        e((8, 1, 1, 0), -1.0 / 9.0, Some(8.0 / 9.0), Some(8.0 / 9.0), 0.8),
        e((0, 0, 0, 10), 0.0, None, None, 1.0),
        e((10, 0, 0, 0), 0.0, Some(1.0), Some(1.0), 1.0),
        e((1, 0, 0, 9), 1.0, Some(1.0), Some(1.0), 1.0),
        e((1, 3, 0, 0), 0.0, Some(1.0), Some(0.25), 0.25),
        e((6, 2, 2, 6), 0.5, Some(0.75), Some(0.75), 0.75),
    ]
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

fn close_opt(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => close(x, y),
        (None, None) => true,
        _ => false,
    }
}

pub fn metric_suite() -> Result<String, String> {
    let table = confusion_table();
    for x in &table {
        let (tp, fp, fn_, tn) = x.cm;
        let c = Confusion::new(tp, fp, fn_, tn);
        let acc = c.accuracy().ok_or("accuracy undefined")?;
        if !close(c.mcc(), x.mcc)
            || !close_opt(c.sensitivity(), x.sensitivity)
            || !close_opt(c.precision(), x.precision)
            || !close(acc, x.accuracy)
        {
            return Err(format!(
                "{:?}: got mcc {} sens {:?} prec {:?} acc {acc}",
                x.cm,
                c.mcc(),
                c.sensitivity(),
                c.precision()
            ));
        }
    }
    let m = mae(&[1.0, 2.0, 3.0], &[2.0, 2.0, 5.0]).map_err(|e| e.to_string())?;
    if m != 1.0 {
        return Err(format!("mae {m}"));
    }
    let m = mae(&[-0.5, 4.25], &[0.5, 4.0]).map_err(|e| e.to_string())?;
    if m != 0.625 {
        return Err(format!("mae {m}"));
    }
    if mae(&[], &[]).is_ok() {
        return Err("mae of nothing should be an error".into());
    }
    let a = accuracy(3, 4).map_err(|e| e.to_string())?;
    if a != 0.75 {
        return Err(format!("accuracy {a}"));
    }
    Ok(format!("{} confusion matrices + MAE/accuracy cases match", table.len()))
}

fn small_body(params: &mut Params, inputs: usize, seed: u64) -> MlpBody {
    let hp = DeepParams {
        width: 8,
        layers: 2,
        ..DeepParams::default()
    };
    MlpBody::new(params, inputs, &hp, &mut stream_rng(seed, 0))
}

fn random_tensor(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = stream_rng(seed, 3);
    Tensor {
        rows,
        cols,
        data: (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}

/// With `w_diff = 0` and unit weights, a twin epoch over a perfect matching
/// produces the same losses, gradients and parameters as a plain MSE epoch
/// over the same rows in the same order, bit for bit.
pub fn twin_reduction() -> Result<String, String> {
    let n = 10;
    let data = random_tensor(n, 5, 1);
    let targets: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() * 2.0).collect();
    let mut params_twin = Params::new();
    let mut body_twin = small_body(&mut params_twin, 5, 7);
    let (mut params_std, mut body_std) = (params_twin.clone(), body_twin.clone());
    let mut opt_twin = AdamW::new(&params_twin, 1e-2, 1e-3, StepDecay::NONE);
    let mut opt_std = AdamW::new(&params_std, 1e-2, 1e-3, StepDecay::NONE);
    let matching = random_matching(n, &mut stream_rng(3, 3));
    let mut batches = 0;
    for batch in matching.chunks(2) {
        let weights = vec![1.0; batch.len()];
        let mut rng = stream_rng(0, 0);
        let (lt, gt) = {
            let mut g = Graph::new(&params_twin);
            let l = twin_batch_loss(&mut g, &mut body_twin, &data, &targets, batch, &weights, 0.0, true, &mut rng)
                .map_err(|e| e.to_string())?;
            (g.value(l).item(), g.backward(l).map_err(|e| e.to_string())?)
        };
        let rows: Vec<usize> = batch.iter().map(|p| p.0).chain(batch.iter().map(|p| p.1)).collect();
        let (ls, gs) = {
            let mut g = Graph::new(&params_std);
            let pred = body_std.forward(&mut g, &data, &rows, true, &mut rng).map_err(|e| e.to_string())?;
            let t = g.input(Tensor::column(rows.iter().map(|&r| targets[r]).collect()));
            let l = g.mse(pred, t).map_err(|e| e.to_string())?;
            (g.value(l).item(), g.backward(l).map_err(|e| e.to_string())?)
        };
        if lt.to_bits() != ls.to_bits() {
            return Err(format!("batch {batches}: twin loss {lt} vs mse {ls}"));
        }
        if gt != gs {
            return Err(format!("batch {batches}: gradients differ"));
        }
        opt_twin.step(&mut params_twin, &gt);
        opt_std.step(&mut params_std, &gs);
        batches += 1;
    }
    if params_twin != params_std || body_twin != body_std {
        return Err("parameters differ after the epoch".into());
    }
    Ok(format!("{batches} batches: losses, gradients and parameters bit-identical"))
}

/// Runs a short two-phase twin training on the bundled corpus and checks at
/// every optimiser step that a compound fed to both branches gets
/// bit-identical outputs from the parameters of that step.
pub fn twin_shared_weights() -> Result<String, String> {
    let raw = super::read_raw(super::corpus_path());
    let compounds = curate(&raw[..60]).compounds;
    let labels: Vec<f64> = compounds.iter().map(|c| c.a).collect();
    let store = FeatureStore::from_compounds(&compounds);
    let train: Vec<usize> = (0..40).collect();
    let mmps: Vec<(usize, usize)> = build_mmps(&compounds)
        .iter()
        .filter(|m| m.index_1 < 40 && m.index_2 < 40)
        .map(|m| (m.index_1, m.index_2))
        .collect();
    let hp: Hyperparams = [("width", 8.0), ("layers", 2.0), ("batch_size", 8.0), ("lr", 1e-2)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let cfg = TwinConfig {
        phase1_epochs: 3,
        phase2_epochs: 3,
        w_diff: 1.0,
        weighting: PairWeighting::Proportional,
    };
    let mut snapshots: Vec<(u8, Params)> = Vec::new();
    let mut record = |s: &TwinStep<'_>| snapshots.push((s.phase, s.params.clone()));
    let spec = ModelSpec {
        representation: Representation::Pdv,
        regressor: RegressorKind::Mlp,
    };
    let model = twin_fit(spec, &hp, &store, &train, &mmps, &labels, &cfg, 5, Some(&mut record)).map_err(|e| e.to_string())?;
    let TrainedRegressor::PdvMlp(mlp) = &model else {
        return Err("unexpected model kind".into());
    };
    let rows: Vec<usize> = (0..6).chain(0..6).collect();
    let x: Vec<Vec<f64>> = train.iter().map(|&i| store.pdv[i].clone()).collect();
    let data = mlp.inputs.apply(&x);
    for (step, (_, params)) in snapshots.iter().enumerate() {
        let mut g = Graph::new(params);
        let out = mlp
            .body
            .clone()
            .forward(&mut g, &data, &rows, true, &mut stream_rng(0, 0))
            .map_err(|e| e.to_string())?;
        let v = &g.value(out).data;
        if v[..6].iter().zip(&v[6..]).any(|(a, b)| a.to_bits() != b.to_bits()) {
            return Err(format!("step {step}: branch outputs differ"));
        }
    }
    let last = snapshots.last().ok_or("no optimiser steps")?;
    if last.1 != mlp.params {
        return Err("final step parameters differ from the fitted model".into());
    }
    let phases: BTreeSet<u8> = snapshots.iter().map(|s| s.0).collect();
    if phases.len() != 2 {
        return Err(format!("phases seen: {phases:?}"));
    }
    Ok(format!("{} steps over both phases: branches bit-identical", snapshots.len()))
}

pub fn twin_identities() -> Result<String, String> {
    let v = twin_loss(1.0, 3.0, 2.0, 3.0, 1.0, 2.0);
    if v != 3.0 {
        return Err(format!("worked example gave {v}"));
    }
    let r = twin_reduction()?;
    let s = twin_shared_weights()?;
    Ok(format!("worked example = 3; {r}; {s}"))
}
