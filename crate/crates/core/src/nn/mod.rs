//! Dense tensors, reverse-mode differentiation, layers and the AdamW
//! optimiser, all in `f64`.

mod graph;
mod layers;
mod optim;
mod tensor;

use thiserror::Error;

pub use graph::{BatchStats, Csr, Graph, ParamId, Params, Var};
pub use layers::{BatchNorm, Linear, BN_EPS, BN_MOMENTUM};
pub use optim::{AdamW, StepDecay};
pub use tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("batch norm needs at least 2 rows in training mode, got {0}")]
    BatchTooSmall(usize),
    #[error("loss must be a 1x1 tensor, got {0:?}")]
    NotScalar((usize, usize)),
    #[error("backward called on a value that is not on the tape")]
    NoTape,
    #[error("segment offsets do not cover the input rows")]
    Segments,
    #[error("training diverged: non-finite loss")]
    Diverged,
}
