use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::graph::{Graph, ParamId, Params, Var};
use super::tensor::Tensor;
use super::NnError;

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

/// `y = x W + b`, `W` stored as `in x out`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    /// Weights and bias drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(params: &mut Params, name: &str, fan_in: usize, fan_out: usize, rng: &mut R) -> Linear {
        let bound = 1.0 / libm::sqrt(fan_in.max(1) as f64);
        let mut uniform = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..bound)).collect() };
        let w = Tensor {
            rows: fan_in,
            cols: fan_out,
            data: uniform(fan_in * fan_out),
        };
        let b = Tensor {
            rows: 1,
            cols: fan_out,
            data: uniform(fan_out),
        };
        let weight = params.add(format!("{name}.weight"), w);
        let bias = params.add(format!("{name}.bias"), b);
        Linear {
            weight,
            bias,
            fan_in,
            fan_out,
        }
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: Var) -> Result<Var, NnError> {
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        let h = g.matmul(x, w)?;
        g.add_bias(h, b)
    }
}

/// Batch normalisation over rows with running statistics.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    pub fn new(params: &mut Params, name: &str, features: usize) -> BatchNorm {
        let gamma = params.add(format!("{name}.gamma"), Tensor::filled(1, features, 1.0));
        let beta = params.add(format!("{name}.beta"), Tensor::zeros(1, features));
        BatchNorm {
            gamma,
            beta,
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
        }
    }

    /// Training mode normalises with batch statistics and folds them into
    /// the running averages (unbiased variance, as PyTorch does).
    pub fn forward(&mut self, g: &mut Graph<'_>, x: Var, training: bool) -> Result<Var, NnError> {
        let gamma = g.param(self.gamma);
        let beta = g.param(self.beta);
        if !training {
            return g.batch_norm_eval(x, gamma, beta, &self.running_mean, &self.running_var, self.eps);
        }
        let (y, stats) = g.batch_norm_train(x, gamma, beta, self.eps)?;
        let n = stats.count as f64;
        let m = self.momentum;
        for j in 0..self.running_mean.len() {
            self.running_mean[j] = (1.0 - m) * self.running_mean[j] + m * stats.mean[j];
            let unbiased = stats.var[j] * n / (n - 1.0);
            self.running_var[j] = (1.0 - m) * self.running_var[j] + m * unbiased;
        }
        Ok(y)
    }
}
