//! Double-precision autodiff kernel: matrix tape with higher-order gradients,
//! dense / conv1d / maxpool / batchnorm layers, and the Adam optimizer.

mod adam;
mod graph;
mod network;
mod tensor;

use thiserror::Error;

pub use adam::Adam;
pub use graph::{Graph, Var};
pub use network::{
    input_gradient_norm, Activation, BatchStats, Forward, InputShape, Layer, Mode, Network, NetworkSpec, Param,
    ParamSet, CHECKPOINT_FORMAT,
};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("loss must be a 1x1 value")]
    NotScalar,
    #[error("variable is not on this tape")]
    NotOnTape,
    #[error("batch of {got} rows; at least {need} required")]
    BatchTooSmall { got: usize, need: usize },
    #[error("invalid network: {0}")]
    Spec(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
