//! Gradient-trained regressors: a batch-normalised MLP on dense features and
//! a graph isomorphism network on molecular graphs.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::ModelError;
use crate::chem::Molecule;
use crate::nn::{AdamW, BatchNorm, Csr, Graph, Linear, NnError, Params, StepDecay, Tensor, Var};
use crate::split::stream_rng;

/// Rows per forward pass at prediction time.
const PREDICT_CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeepParams {
    /// Hidden width of every layer.
    pub width: usize,
    /// Hidden layers (MLP) or message-passing layers (GIN).
    pub layers: usize,
    pub dropout: f64,
    pub weight_decay: f64,
    pub lr: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_interval: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for DeepParams {
    fn default() -> Self {
        DeepParams {
            width: 128,
            layers: 2,
            dropout: 0.0,
            weight_decay: 0.0,
            lr: 1e-3,
            lr_decay_factor: 1.0,
            lr_decay_interval: 100,
            batch_size: 64,
            epochs: 500,
            seed: 0,
        }
    }
}

impl DeepParams {
    fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 {
            return Err(ModelError::Hyperparameter("epochs must be at least 1"));
        }
        if self.batch_size < 2 {
            return Err(ModelError::Hyperparameter("batch_size must be at least 2"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Hyperparameter("dropout must be in [0, 1)"));
        }
        if self.width == 0 {
            return Err(ModelError::Hyperparameter("width must be positive"));
        }
        if !(self.lr > 0.0) {
            return Err(ModelError::Hyperparameter("lr must be positive"));
        }
        Ok(())
    }

    pub fn schedule(&self) -> StepDecay {
        StepDecay {
            factor: self.lr_decay_factor,
            interval: self.lr_decay_interval.max(1),
        }
    }
}

/// Network body producing one prediction per selected row of `Data`.
pub trait Body {
    type Data;

    fn forward(
        &mut self,
        g: &mut Graph<'_>,
        data: &Self::Data,
        rows: &[usize],
        training: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Var, NnError>;
}

/// Linear -> BatchNorm -> ReLU -> Dropout.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DenseBlock {
    pub linear: Linear,
    pub bn: BatchNorm,
    pub dropout: f64,
}

impl DenseBlock {
    pub fn new<R: Rng + ?Sized>(params: &mut Params, name: &str, fan_in: usize, fan_out: usize, dropout: f64, rng: &mut R) -> Self {
        DenseBlock {
            linear: Linear::new(params, &format!("{name}.linear"), fan_in, fan_out, rng),
            bn: BatchNorm::new(params, &format!("{name}.bn"), fan_out),
            dropout,
        }
    }

    pub fn forward(&mut self, g: &mut Graph<'_>, x: Var, training: bool, rng: &mut ChaCha8Rng) -> Result<Var, NnError> {
        let h = self.linear.forward(g, x)?;
        let h = self.bn.forward(g, h, training)?;
        let h = g.relu(h);
        Ok(g.dropout(h, self.dropout, training, rng))
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MlpBody {
    pub blocks: Vec<DenseBlock>,
    pub out: Linear,
}

impl MlpBody {
    pub fn new<R: Rng + ?Sized>(params: &mut Params, inputs: usize, hp: &DeepParams, rng: &mut R) -> MlpBody {
        let mut blocks = Vec::with_capacity(hp.layers);
        let mut fan_in = inputs;
        for l in 0..hp.layers {
            blocks.push(DenseBlock::new(params, &format!("hidden{l}"), fan_in, hp.width, hp.dropout, rng));
            fan_in = hp.width;
        }
        let out = Linear::new(params, "out", fan_in, 1, rng);
        MlpBody { blocks, out }
    }
}

impl Body for MlpBody {
    type Data = Tensor;

    fn forward(
        &mut self,
        g: &mut Graph<'_>,
        data: &Tensor,
        rows: &[usize],
        training: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Var, NnError> {
        let mut h = g.input(data.select_rows(rows));
        for block in &mut self.blocks {
            h = block.forward(g, h, training, rng)?;
        }
        self.out.forward(g, h)
    }
}

/// Column means and inverse standard deviations (1 for constant columns).
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Standardizer {
        let d = rows.first().map_or(0, |r| r.len());
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        let mut inv_std = vec![1.0; d];
        for j in 0..d {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - m) * (r[j] - m)).sum::<f64>() / n;
            mean[j] = m;
            if var > 0.0 {
                inv_std[j] = 1.0 / libm::sqrt(var);
            }
        }
        Standardizer { mean, inv_std }
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Tensor {
        let d = self.mean.len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for r in rows {
            data.extend(r.iter().enumerate().map(|(j, v)| (v - self.mean[j]) * self.inv_std[j]));
        }
        Tensor { rows: rows.len(), cols: d, data }
    }
}

/// Affine target scaling; the network regresses `(y - mean) / scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TargetScale {
    pub mean: f64,
    pub scale: f64,
}

impl TargetScale {
    pub fn fit(y: &[f64]) -> TargetScale {
        let n = y.len().max(1) as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = libm::sqrt(var);
        TargetScale {
            mean,
            scale: if sd > 0.0 { sd } else { 1.0 },
        }
    }

    pub fn forward(&self, y: f64) -> f64 {
        (y - self.mean) / self.scale
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.scale + self.mean
    }
}

/// Mini-batch MSE training. Returns the mean training loss of every epoch.
/// Batches of a single row are skipped (batch norm needs two).
pub fn train_mse<B: Body>(
    params: &mut Params,
    body: &mut B,
    data: &B::Data,
    targets: &[f64],
    hp: &DeepParams,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, ModelError> {
    let n = targets.len();
    if n < 2 {
        return Err(ModelError::EmptyTraining);
    }
    let mut opt = AdamW::new(params, hp.lr, hp.weight_decay, hp.schedule());
    let mut order: Vec<usize> = (0..n).collect();
    let mut curve = Vec::with_capacity(hp.epochs);
    for epoch in 0..hp.epochs {
        opt.set_epoch(epoch);
        order.shuffle(rng);
        let (mut total, mut seen) = (0.0, 0usize);
        for batch in order.chunks(hp.batch_size) {
            if batch.len() < 2 {
                continue;
            }
            let grads = {
                let mut g = Graph::new(params);
                let pred = body.forward(&mut g, data, batch, true, rng)?;
                let target = g.input(Tensor::column(batch.iter().map(|&i| targets[i]).collect()));
                let loss = g.mse(pred, target)?;
                let value = g.value(loss).item();
                if !value.is_finite() {
                    return Err(ModelError::Diverged);
                }
                total += value * batch.len() as f64;
                seen += batch.len();
                g.backward(loss)?
            };
            opt.step(params, &grads);
        }
        curve.push(total / seen.max(1) as f64);
    }
    Ok(curve)
}

/// Eval-mode predictions for `rows`, in chunks.
pub fn predict_rows<B: Body + Clone>(params: &Params, body: &B, data: &B::Data, rows: &[usize]) -> Result<Vec<f64>, ModelError> {
    let mut body = body.clone();
    // eval mode draws nothing from the generator
    let mut rng = stream_rng(0, 0);
    let mut out = Vec::with_capacity(rows.len());
    for chunk in rows.chunks(PREDICT_CHUNK) {
        let mut g = Graph::new(params);
        let pred = body.forward(&mut g, data, chunk, false, &mut rng)?;
        out.extend_from_slice(&g.value(pred).data);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::Diverged);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MlpModel {
    pub hp: DeepParams,
    pub params: Params,
    pub body: MlpBody,
    pub inputs: Standardizer,
    pub target: TargetScale,
    pub loss_curve: Vec<f64>,
}

impl MlpModel {
    pub fn fit(x: &[Vec<f64>], y: &[f64], hp: &DeepParams) -> Result<MlpModel, ModelError> {
        hp.validate()?;
        if x.len() != y.len() {
            return Err(ModelError::Length(x.len(), y.len()));
        }
        let mut rng = stream_rng(hp.seed, 0);
        let inputs = Standardizer::fit(x);
        let data = inputs.apply(x);
        let target = TargetScale::fit(y);
        let z: Vec<f64> = y.iter().map(|&v| target.forward(v)).collect();
        let mut params = Params::new();
        let mut body = MlpBody::new(&mut params, data.cols, hp, &mut rng);
        let loss_curve = train_mse(&mut params, &mut body, &data, &z, hp, &mut rng)?;
        Ok(MlpModel {
            hp: *hp,
            params,
            body,
            inputs,
            target,
            loss_curve,
        })
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
        let data = self.inputs.apply(x);
        let rows: Vec<usize> = (0..x.len()).collect();
        let z = predict_rows(&self.params, &self.body, &data, &rows)?;
        Ok(z.into_iter().map(|v| self.target.inverse(v)).collect())
    }
}

/// Node encoding: element one-hot over a fixed vocabulary plus "other",
/// degree one-hot (0..=5 and 6+), formal charge, aromatic flag, implicit H.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AtomEncoder {
    pub elements: Vec<u8>,
}

const DEGREE_SLOTS: usize = 7;

impl AtomEncoder {
    pub fn fit<'a>(mols: impl IntoIterator<Item = &'a Molecule>) -> AtomEncoder {
        let mut elements: Vec<u8> = mols
            .into_iter()
            .flat_map(|m| m.atoms().iter().map(|a| a.element.atomic_number()))
            .collect();
        elements.sort_unstable();
        elements.dedup();
        AtomEncoder { elements }
    }

    pub fn dim(&self) -> usize {
        self.elements.len() + 1 + DEGREE_SLOTS + 3
    }

    pub fn encode(&self, mol: &Molecule) -> GraphInput {
        let d = self.dim();
        let n = mol.atom_count();
        let mut x = vec![0.0; n * d];
        let e = self.elements.len();
        for (i, atom) in mol.atoms().iter().enumerate() {
            let row = &mut x[i * d..(i + 1) * d];
            let z = atom.element.atomic_number();
            let slot = self.elements.binary_search(&z).unwrap_or(e);
            row[slot] = 1.0;
            row[e + 1 + mol.degree(i).min(DEGREE_SLOTS - 1)] = 1.0;
            row[e + 1 + DEGREE_SLOTS] = atom.formal_charge as f64;
            row[e + 2 + DEGREE_SLOTS] = atom.aromatic as u8 as f64;
            row[e + 3 + DEGREE_SLOTS] = atom.implicit_h as f64;
        }
        let neighbors = (0..n).map(|i| mol.neighbors(i).iter().map(|&(j, _)| j).collect()).collect();
        GraphInput { nodes: n, x, neighbors }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphInput {
    pub nodes: usize,
    /// `nodes x dim`, row-major.
    pub x: Vec<f64>,
    pub neighbors: Vec<Vec<usize>>,
}

/// Concatenates graphs into one node matrix with block adjacency.
pub fn batch_graphs(graphs: &[GraphInput], rows: &[usize], dim: usize) -> (Tensor, Csr, Vec<usize>) {
    let total: usize = rows.iter().map(|&r| graphs[r].nodes).sum();
    let mut x = Vec::with_capacity(total * dim);
    let mut csr = Csr {
        offsets: Vec::with_capacity(total + 1),
        targets: Vec::new(),
    };
    csr.offsets.push(0);
    let mut segments = Vec::with_capacity(rows.len() + 1);
    segments.push(0);
    let mut base = 0;
    for &r in rows {
        let g = &graphs[r];
        x.extend_from_slice(&g.x);
        for nb in &g.neighbors {
            csr.targets.extend(nb.iter().map(|&j| j + base));
            csr.offsets.push(csr.targets.len());
        }
        base += g.nodes;
        segments.push(base);
    }
    (
        Tensor {
            rows: total,
            cols: dim,
            data: x,
        },
        csr,
        segments,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum GinHead {
    /// One hidden dense block, then a linear output.
    Mlp,
    /// Linear map from the pooled embedding to the activity.
    Linear,
}

/// `h' = MLP(h + sum of neighbour h)` with a two-layer internal MLP.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GinLayer {
    pub lin1: Linear,
    pub bn1: BatchNorm,
    pub lin2: Linear,
    pub bn2: BatchNorm,
    pub dropout: f64,
}

impl GinLayer {
    pub fn new<R: Rng + ?Sized>(params: &mut Params, name: &str, fan_in: usize, width: usize, dropout: f64, rng: &mut R) -> Self {
        GinLayer {
            lin1: Linear::new(params, &format!("{name}.lin1"), fan_in, width, rng),
            bn1: BatchNorm::new(params, &format!("{name}.bn1"), width),
            lin2: Linear::new(params, &format!("{name}.lin2"), width, width, rng),
            bn2: BatchNorm::new(params, &format!("{name}.bn2"), width),
            dropout,
        }
    }

    pub fn forward(
        &mut self,
        g: &mut Graph<'_>,
        h: Var,
        adjacency: &Csr,
        training: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Var, NnError> {
        let agg = g.gin_aggregate(h, adjacency)?;
        let z = self.lin1.forward(g, agg)?;
        let z = self.bn1.forward(g, z, training)?;
        let z = g.relu(z);
        let z = self.lin2.forward(g, z)?;
        let z = self.bn2.forward(g, z, training)?;
        let z = g.relu(z);
        Ok(g.dropout(z, self.dropout, training, rng))
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GinBody {
    pub dim: usize,
    pub layers: Vec<GinLayer>,
    pub head_block: Option<DenseBlock>,
    pub out: Linear,
}

impl GinBody {
    pub fn new<R: Rng + ?Sized>(params: &mut Params, dim: usize, hp: &DeepParams, head: GinHead, rng: &mut R) -> GinBody {
        let layers_n = hp.layers.max(1);
        let mut layers = Vec::with_capacity(layers_n);
        let mut fan_in = dim;
        for l in 0..layers_n {
            layers.push(GinLayer::new(params, &format!("gin{l}"), fan_in, hp.width, hp.dropout, rng));
            fan_in = hp.width;
        }
        let head_block = match head {
            GinHead::Mlp => Some(DenseBlock::new(params, "head", hp.width, hp.width, hp.dropout, rng)),
            GinHead::Linear => None,
        };
        let out = Linear::new(params, "out", hp.width, 1, rng);
        GinBody {
            dim,
            layers,
            head_block,
            out,
        }
    }

    pub fn embed(
        &mut self,
        g: &mut Graph<'_>,
        graphs: &[GraphInput],
        rows: &[usize],
        training: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Var, NnError> {
        let (x, adjacency, segments) = batch_graphs(graphs, rows, self.dim);
        let mut h = g.input(x);
        for layer in &mut self.layers {
            h = layer.forward(g, h, &adjacency, training, rng)?;
        }
        g.segment_max(h, &segments)
    }
}

impl Body for GinBody {
    type Data = Vec<GraphInput>;

    fn forward(
        &mut self,
        g: &mut Graph<'_>,
        data: &Vec<GraphInput>,
        rows: &[usize],
        training: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Var, NnError> {
        let mut h = self.embed(g, data, rows, training, rng)?;
        if let Some(block) = &mut self.head_block {
            h = block.forward(g, h, training, rng)?;
        }
        self.out.forward(g, h)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GinModel {
    pub hp: DeepParams,
    pub head: GinHead,
    pub params: Params,
    pub body: GinBody,
    pub encoder: AtomEncoder,
    pub target: TargetScale,
    pub loss_curve: Vec<f64>,
}

impl GinModel {
    pub fn fit(mols: &[&Molecule], y: &[f64], hp: &DeepParams, head: GinHead) -> Result<GinModel, ModelError> {
        hp.validate()?;
        if mols.len() != y.len() {
            return Err(ModelError::Length(mols.len(), y.len()));
        }
        let mut rng = stream_rng(hp.seed, 0);
        let encoder = AtomEncoder::fit(mols.iter().copied());
        let graphs: Vec<GraphInput> = mols.iter().map(|m| encoder.encode(m)).collect();
        let target = TargetScale::fit(y);
        let z: Vec<f64> = y.iter().map(|&v| target.forward(v)).collect();
        let mut params = Params::new();
        let mut body = GinBody::new(&mut params, encoder.dim(), hp, head, &mut rng);
        let loss_curve = train_mse(&mut params, &mut body, &graphs, &z, hp, &mut rng)?;
        Ok(GinModel {
            hp: *hp,
            head,
            params,
            body,
            encoder,
            target,
            loss_curve,
        })
    }

    pub fn encode(&self, mols: &[&Molecule]) -> Vec<GraphInput> {
        mols.iter().map(|m| self.encoder.encode(m)).collect()
    }

    pub fn predict(&self, mols: &[&Molecule]) -> Result<Vec<f64>, ModelError> {
        let graphs = self.encode(mols);
        let rows: Vec<usize> = (0..mols.len()).collect();
        let z = predict_rows(&self.params, &self.body, &graphs, &rows)?;
        Ok(z.into_iter().map(|v| self.target.inverse(v)).collect())
    }

    /// Pooled graph embeddings with every layer in eval mode.
    pub fn embed(&self, mols: &[&Molecule]) -> Result<Vec<Vec<f64>>, ModelError> {
        let graphs = self.encode(mols);
        let mut body = self.body.clone();
        let mut rng = stream_rng(0, 0);
        let mut out = Vec::with_capacity(mols.len());
        let rows: Vec<usize> = (0..mols.len()).collect();
        for chunk in rows.chunks(PREDICT_CHUNK) {
            let mut g = Graph::new(&self.params);
            let e = body.embed(&mut g, &graphs, chunk, false, &mut rng)?;
            let t = g.value(e);
            out.extend((0..t.rows).map(|r| t.row(r).to_vec()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn small(epochs: usize) -> DeepParams {
        DeepParams {
            width: 16,
            layers: 2,
            lr: 1e-2,
            batch_size: 16,
            epochs,
            ..DeepParams::default()
        }
    }

    #[test]
    fn mlp_fits_a_linear_target() {
        let x: Vec<Vec<f64>> = (0..64).map(|i| vec![(i % 8) as f64, (i / 8) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0] - r[1] + 1.0).collect();
        let m = MlpModel::fit(&x, &y, &small(200)).unwrap();
        assert!(m.loss_curve.last().unwrap() < &m.loss_curve[0]);
        let pred = m.predict(&x).unwrap();
        let mae = pred.iter().zip(&y).map(|(p, t)| (p - t).abs()).sum::<f64>() / y.len() as f64;
        assert!(mae < 0.5, "mae {mae}");
        assert_eq!(m, MlpModel::fit(&x, &y, &small(200)).unwrap());
    }

    #[test]
    fn gin_trains_and_embeds() {
        let smiles = ["CCO", "CCCO", "c1ccccc1", "c1ccccc1O", "CC(=O)O", "CCN", "CCCCN", "OCCO"];
        let mols: Vec<Molecule> = smiles.iter().map(|s| parse_smiles(s).unwrap()).collect();
        let refs: Vec<&Molecule> = mols.iter().collect();
        let y: Vec<f64> = (0..smiles.len()).map(|i| i as f64 * 0.5).collect();
        for head in [GinHead::Mlp, GinHead::Linear] {
            let g = GinModel::fit(&refs, &y, &small(50), head).unwrap();
            assert_eq!(g.predict(&refs).unwrap().len(), 8);
            let e = g.embed(&refs).unwrap();
            assert_eq!(e.len(), 8);
            assert!(e.iter().all(|r| r.len() == 16));
        }
    }

    #[test]
    fn batching_offsets_nodes() {
        let enc = AtomEncoder { elements: vec![6, 8] };
        let graphs = [enc.encode(&parse_smiles("CO").unwrap()), enc.encode(&parse_smiles("CCC").unwrap())];
        let (x, csr, seg) = batch_graphs(&graphs, &[1, 0], enc.dim());
        assert_eq!(x.rows, 5);
        assert_eq!(seg, [0, 3, 5]);
        assert_eq!(csr.neighbors(3), [4]);
        assert_eq!(csr.neighbors(1), [0, 2]);
    }
}
