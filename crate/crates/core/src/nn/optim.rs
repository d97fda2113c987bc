use alloc::vec::Vec;

use super::graph::Params;
use super::tensor::Tensor;

/// Multiplicative step decay: `lr0 * factor^(epoch / interval)`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepDecay {
    pub factor: f64,
    pub interval: usize,
}

impl StepDecay {
    pub const NONE: StepDecay = StepDecay {
        factor: 1.0,
        interval: 1,
    };

    pub fn rate(&self, lr0: f64, epoch: usize) -> f64 {
        lr0 * libm::pow(self.factor, (epoch / self.interval.max(1)) as f64)
    }
}

/// Adam with decoupled weight decay (PyTorch `AdamW` update order).
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamW {
    pub lr0: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub schedule: StepDecay,
    pub step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamW {
    pub fn new(params: &Params, lr: f64, weight_decay: f64, schedule: StepDecay) -> AdamW {
        AdamW {
            lr0: lr,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            schedule,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn set_epoch(&mut self, epoch: usize) {
        self.lr = self.schedule.rate(self.lr0, epoch);
    }

    pub fn step(&mut self, params: &mut Params, grads: &[Tensor]) {
        assert_eq!(grads.len(), params.len());
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - libm::pow(self.beta1, t);
        let bc2 = 1.0 - libm::pow(self.beta2, t);
        let decay = 1.0 - self.lr * self.weight_decay;
        for ((p, g), (m, v)) in params
            .values_mut()
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            assert_eq!(p.shape(), g.shape());
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = self.beta1 * m.data[i] + (1.0 - self.beta1) * gi;
                v.data[i] = self.beta2 * v.data[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m.data[i] / bc1;
                let v_hat = v.data[i] / bc2;
                p.data[i] = p.data[i] * decay - self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
            }
        }
    }
}
