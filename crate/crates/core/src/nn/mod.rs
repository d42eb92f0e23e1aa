//! Small `f64` network toolkit for classifier heads.
//!
//! Layers cache what they need during `forward` and accumulate parameter
//! gradients during `backward`. Tensors put channels on the last axis, so
//! a batch of feature maps is `[N, H, W, C]` and a batch of vectors `[N, C]`.

use alloc::vec::Vec;

use thiserror::Error;

mod activation;
mod gradcheck;
mod layers;
mod loss;
mod optim;
mod tensor;

pub use activation::{
    acon_c_backward, acon_c_forward, relu_backward, relu_forward, sigmoid, silu_backward,
    silu_forward, AconCGrads, AconCParams,
};
pub use gradcheck::{numeric_grad_check, GradCheck};
pub use layers::{
    global_average_pool, AconC, BatchNorm, Dropout, GlobalAvgPool, GlobalMaxPool, Layer, Linear,
    Mode, Param, Sequential,
};
pub use loss::{softmax, softmax_cross_entropy, softmax_cross_entropy_batch};
pub use optim::{adam_step, Adam, AdamConfig, AdamState};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("invalid shape {0:?}")]
    BadShape(Vec<usize>),
    #[error("shape needs {expected} values, got {found}")]
    DataLength { expected: usize, found: usize },
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("batch norm needs at least 2 rows in training mode, got {0}")]
    BatchTooSmall(usize),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("backward called before forward")]
    NoForwardCache,
    #[error("empty batch")]
    EmptyBatch,
    #[error("finite-difference step must be positive")]
    BadStep,
    #[error("dropout rate must be in [0, 1)")]
    BadDropout,
}
