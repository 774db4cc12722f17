//! Dense ReLU regressor trained from scratch: forward pass, mean absolute
//! error, reverse-mode gradients, Adam and a seeded mini-batch loop.
//!
//! Weights are `in_dim x out_dim` row-major matrices; every hidden layer is
//! followed by a ReLU and the single-unit head is linear.

mod loss;
mod model;
mod optim;
mod train;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use loss::mae_loss;
pub use model::{Activation, DenseLayer, Gradients, LayerGradients, MlpModel};
pub use optim::{adam_step, AdamState};
pub use train::{evaluate, fit, train, TrainConfig, TrainHistory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("shape mismatch in {what}: expected {expected}, got {actual}")]
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error("training diverged at epoch {epoch} (learning rate {learning_rate})")]
    Diverged { epoch: usize, learning_rate: f64 },
    #[error("invalid training config: {0}")]
    Config(String),
}

pub(crate) fn check_dim(
    what: &'static str,
    expected: usize,
    actual: usize,
) -> Result<(), NetError> {
    if expected == actual {
        Ok(())
    } else {
        Err(NetError::Shape {
            what,
            expected,
            actual,
        })
    }
}

/// Input width plus hidden widths; the head is always one linear unit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArchSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
}

impl ArchSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>) -> Result<Self, NetError> {
        if input_dim == 0 {
            return Err(NetError::InvalidArch(String::from(
                "input_dim must be >= 1",
            )));
        }
        if let Some(pos) = hidden.iter().position(|&w| w == 0) {
            return Err(NetError::InvalidArch(format!(
                "hidden layer {pos} has width 0"
            )));
        }
        Ok(Self { input_dim, hidden })
    }

    /// The discovered reference architecture: 4 -> 256 -> 512 -> 128 -> 1.
    pub fn reference() -> Self {
        Self {
            input_dim: 4,
            hidden: alloc::vec![256, 512, 128],
        }
    }

    /// `(in, out)` of each dense layer including the head.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input_dim;
        for &w in self.hidden.iter().chain(core::iter::once(&1)) {
            dims.push((prev, w));
            prev = w;
        }
        dims
    }

    /// e.g. `4-256-512-128-1`.
    pub fn summary(&self) -> String {
        let mut s = format!("{}", self.input_dim);
        for w in &self.hidden {
            s.push_str(&format!("-{w}"));
        }
        s.push_str("-1");
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub total: usize,
    pub trainable: usize,
    pub non_trainable: usize,
    /// Trainable parameters of each dense layer, head last.
    pub per_layer: Vec<usize>,
}

/// Dense layers contribute `in*out + out`; the frozen normalization in
/// front of the network stores `2n + 1` scalars for `n` features.
pub fn param_count(arch: &ArchSpec, n_features: usize) -> ParamCount {
    let per_layer: Vec<usize> = arch.layer_dims().iter().map(|&(i, o)| i * o + o).collect();
    let trainable = per_layer.iter().sum();
    let non_trainable = if n_features == 0 {
        0
    } else {
        2 * n_features + 1
    };
    ParamCount {
        total: trainable + non_trainable,
        trainable,
        non_trainable,
        per_layer,
    }
}
