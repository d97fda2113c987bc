//! Reverse-mode gradients against central differences, 200 probes per case.

use cliffbench_core::models::deep::{Body, DeepParams, GinLayer, MlpBody};
use cliffbench_core::nn::{BatchNorm, Csr, Graph, Linear, NnError, Params, Tensor, Var};
use cliffbench_core::split::stream_rng;
use cliffbench_core::twin::twin_batch_loss;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const PROBES: usize = 200;
const STEP: f64 = 1e-6;
const TOLERANCE: f64 = 1e-3;

fn random_tensor(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor {
        rows,
        cols,
        data: (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}

/// `build` maps (graph, input vars) to a scalar loss.
type Build<'a> = dyn Fn(&mut Graph<'_>, &[Var]) -> Result<Var, NnError> + 'a;

fn evaluate(params: &Params, inputs: &[Tensor], build: &Build<'_>) -> (f64, Vec<Tensor>, Vec<Tensor>) {
    let mut g = Graph::new(params);
    let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
    let loss = build(&mut g, &vars).unwrap();
    let (pg, ig) = g.backward_with_inputs(loss, &vars).unwrap();
    (g.value(loss).item(), pg, ig)
}

fn loss_only(params: &Params, inputs: &[Tensor], build: &Build<'_>) -> f64 {
    let mut g = Graph::new(params);
    let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
    let loss = build(&mut g, &vars).unwrap();
    g.value(loss).item()
}

/// Biases feeding batch norm have an exact zero gradient, where the finite
/// difference is pure roundoff; the floor keeps that from reading as 100%.
const DENOMINATOR_FLOOR: f64 = 1e-5;

fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(DENOMINATOR_FLOOR)
}

/// Probes random entries of parameters and inputs; returns the worst
/// relative error.
fn check(name: &str, mut params: Params, mut inputs: Vec<Tensor>, build: &Build<'_>, seed: u64) -> Result<String, String> {
    let (_, pg, ig) = evaluate(&params, &inputs, build);
    let mut slots: Vec<(bool, usize, usize)> = Vec::new();
    for (p, t) in params.values().iter().enumerate() {
        slots.extend((0..t.len()).map(|k| (true, p, k)));
    }
    for (p, t) in inputs.iter().enumerate() {
        slots.extend((0..t.len()).map(|k| (false, p, k)));
    }
    let mut rng = stream_rng(seed, 99);
    let mut worst: f64 = 0.0;
    for _ in 0..PROBES {
        let (is_param, p, k) = slots[rng.random_range(0..slots.len())];
        let analytic = if is_param { pg[p].data[k] } else { ig[p].data[k] };
        let nudge = |params: &mut Params, inputs: &mut Vec<Tensor>, d: f64| {
            if is_param {
                params.values_mut()[p].data[k] += d;
            } else {
                inputs[p].data[k] += d;
            }
        };
        nudge(&mut params, &mut inputs, STEP);
        let up = loss_only(&params, &inputs, build);
        nudge(&mut params, &mut inputs, -2.0 * STEP);
        let down = loss_only(&params, &inputs, build);
        nudge(&mut params, &mut inputs, STEP);
        let numeric = (up - down) / (2.0 * STEP);
        let err = relative_error(analytic, numeric);
        if !(err < TOLERANCE) {
            return Err(format!(
                "{name}: probe {:?} analytic {analytic} numeric {numeric}",
                (is_param, p, k)
            ));
        }
        worst = worst.max(err);
    }
    Ok(format!("{name}: worst relative error {worst:.2e} over {PROBES} probes"))
}

/// Random linear read-out so every output entry gets a distinct upstream gradient.
fn readout(g: &mut Graph<'_>, x: Var, seed: u64) -> Result<Var, NnError> {
    let n = g.value(x).len();
    let mut rng = stream_rng(seed, 7);
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    g.weighted_sum(x, w)
}

pub fn mlp() -> Result<String, String> {
    let mut rng = stream_rng(1, 0);
    let mut params = Params::new();
    let hp = DeepParams {
        width: 6,
        layers: 2,
        ..DeepParams::default()
    };
    let body = MlpBody::new(&mut params, 4, &hp, &mut rng);
    let x = random_tensor(8, 4, &mut rng);
    let y = random_tensor(8, 1, &mut rng);
    // blocks applied to an input var so input gradients are probed too
    let build = |g: &mut Graph<'_>, v: &[Var]| {
        let mut b = body.clone();
        let mut h = v[0];
        for block in &mut b.blocks {
            h = block.forward(g, h, true, &mut stream_rng(5, 5))?;
        }
        let out = b.out.forward(g, h)?;
        g.mse(out, v[1])
    };
    check("mlp", params, vec![x, y], &build, 1)
}

pub fn mlp_body_forward() -> Result<String, String> {
    let mut rng = stream_rng(2, 0);
    let mut params = Params::new();
    let hp = DeepParams {
        width: 5,
        layers: 1,
        ..DeepParams::default()
    };
    let body = MlpBody::new(&mut params, 3, &hp, &mut rng);
    let data = random_tensor(10, 3, &mut rng);
    let build = |g: &mut Graph<'_>, _: &[Var]| {
        let out = body.clone().forward(g, &data, &[0, 2, 4, 6, 8, 9], true, &mut stream_rng(0, 0))?;
        readout(g, out, 2)
    };
    check("mlp body", params, vec![], &build, 2)
}

pub fn batchnorm() -> Result<String, String> {
    let mut rng = stream_rng(3, 0);
    let mut params = Params::new();
    let bn = BatchNorm::new(&mut params, "bn", 4);
    // non-trivial affine parameters
    for t in params.values_mut() {
        for v in &mut t.data {
            *v += rng.random_range(-0.5..0.5);
        }
    }
    let x = random_tensor(7, 4, &mut rng);
    let build = |g: &mut Graph<'_>, v: &[Var]| {
        let y = bn.clone().forward(g, v[0], true)?;
        readout(g, y, 3)
    };
    let train = check("batchnorm (train)", params.clone(), vec![x.clone()], &build, 3)?;
    let mut eval_bn = bn.clone();
    eval_bn.running_mean = vec![0.3, -0.2, 0.1, 0.0];
    eval_bn.running_var = vec![0.5, 1.5, 2.0, 0.9];
    let build = |g: &mut Graph<'_>, v: &[Var]| {
        let y = eval_bn.clone().forward(g, v[0], false)?;
        readout(g, y, 4)
    };
    let eval = check("batchnorm (eval)", params, vec![x], &build, 4)?;
    Ok(format!("{train}; {eval}"))
}

pub fn dropout_off_and_fixed_mask() -> Result<String, String> {
    let mut rng = stream_rng(4, 0);
    let mut params = Params::new();
    let lin = Linear::new(&mut params, "lin", 5, 3, &mut rng);
    let x = random_tensor(6, 5, &mut rng);
    let off = |g: &mut Graph<'_>, v: &[Var]| {
        let h = lin.forward(g, v[0])?;
        let h = g.dropout(h, 0.5, false, &mut stream_rng(9, 9));
        readout(g, h, 5)
    };
    let a = check("dropout off", params.clone(), vec![x.clone()], &off, 5)?;
    let fixed = |g: &mut Graph<'_>, v: &[Var]| {
        let h = lin.forward(g, v[0])?;
        let h = g.dropout(h, 0.3, true, &mut stream_rng(9, 9));
        readout(g, h, 6)
    };
    let b = check("dropout fixed mask", params, vec![x], &fixed, 6)?;
    Ok(format!("{a}; {b}"))
}

pub fn segment_max() -> Result<String, String> {
    let mut rng = stream_rng(5, 0);
    let x = random_tensor(9, 4, &mut rng);
    let build = |g: &mut Graph<'_>, v: &[Var]| {
        let y = g.segment_max(v[0], &[0, 2, 5, 9])?;
        readout(g, y, 7)
    };
    check("segment_max", Params::new(), vec![x], &build, 7)
}

pub fn gin_layer() -> Result<String, String> {
    let mut rng = stream_rng(6, 0);
    let mut params = Params::new();
    let layer = GinLayer::new(&mut params, "gin", 3, 5, 0.0, &mut rng);
    // two graphs: a path 0-1-2 and a triangle 3-4-5
    let adjacency = Csr {
        offsets: vec![0, 1, 3, 4, 6, 8, 10],
        targets: vec![1, 0, 2, 1, 4, 5, 3, 5, 3, 4],
    };
    let x = random_tensor(6, 3, &mut rng);
    let build = |g: &mut Graph<'_>, v: &[Var]| {
        let h = layer.clone().forward(g, v[0], &adjacency, true, &mut stream_rng(0, 0))?;
        let pooled = g.segment_max(h, &[0, 3, 6])?;
        readout(g, pooled, 8)
    };
    check("gin layer", params, vec![x], &build, 8)
}

pub fn twin_loss_through_two_layer_network() -> Result<String, String> {
    let mut rng = stream_rng(7, 0);
    let mut params = Params::new();
    let hp = DeepParams {
        width: 6,
        layers: 2,
        ..DeepParams::default()
    };
    let body = MlpBody::new(&mut params, 4, &hp, &mut rng);
    let data = random_tensor(8, 4, &mut rng);
    let targets: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
    let pairs = [(0, 1), (2, 3), (4, 5), (6, 7), (1, 6)];
    let weights = [1.0, 0.5, 2.0, 1.5, 0.25];
    let build = |g: &mut Graph<'_>, _: &[Var]| {
        twin_batch_loss(g, &mut body.clone(), &data, &targets, &pairs, &weights, 0.7, true, &mut stream_rng(0, 0))
    };
    check("twin loss", params, vec![], &build, 9)
}

/// Every case, in a fixed order.
pub type Case = fn() -> Result<String, String>;

pub const CASES: [(&str, Case); 7] = [
    ("mlp", mlp),
    ("mlp body", mlp_body_forward),
    ("batchnorm", batchnorm),
    ("dropout", dropout_off_and_fixed_mask),
    ("segment_max", segment_max),
    ("gin layer", gin_layer),
    ("twin loss", twin_loss_through_two_layer_network),
];
