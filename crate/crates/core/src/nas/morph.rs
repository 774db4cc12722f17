//! Function-preserving network morphisms.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::neuralnet::{Activation, ArchSpec, DenseLayer, MlpModel};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MorphError {
    #[error("layer {layer} is not a hidden layer (model has {hidden} hidden layers)")]
    NotHidden { layer: usize, hidden: usize },
    #[error("cannot shrink layer from width {current} to {requested}")]
    Shrink { current: usize, requested: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Morphism {
    /// Grow hidden layer `layer` to `new_width` units.
    Widen { layer: usize, new_width: usize },
    /// Insert an identity ReLU layer after hidden layer `after`.
    Deepen { after: usize },
}

impl Morphism {
    /// Architecture produced by applying this morphism to `arch`.
    pub fn apply_to(&self, arch: &ArchSpec) -> ArchSpec {
        let mut hidden = arch.hidden.clone();
        match *self {
            Morphism::Widen { layer, new_width } => hidden[layer] = new_width,
            Morphism::Deepen { after } => hidden.insert(after + 1, hidden[after]),
        }
        ArchSpec {
            input_dim: arch.input_dim,
            hidden,
        }
    }

    pub fn apply<R: Rng + ?Sized>(
        &self,
        model: &MlpModel,
        rng: &mut R,
    ) -> Result<MlpModel, MorphError> {
        match *self {
            Morphism::Widen { layer, new_width } => widen(model, layer, new_width, rng),
            Morphism::Deepen { after } => deepen(model, after),
        }
    }
}

fn check_hidden(model: &MlpModel, layer: usize) -> Result<(), MorphError> {
    let hidden = model.arch.hidden.len();
    if layer < hidden {
        Ok(())
    } else {
        Err(MorphError::NotHidden { layer, hidden })
    }
}

/// Net2Wider: the first `width` units map to themselves, each extra unit
/// copies the incoming weights and bias of a uniformly drawn existing unit,
/// and every replicated unit's outgoing weights are divided by its final
/// replication count.
pub fn widen<R: Rng + ?Sized>(
    model: &MlpModel,
    layer: usize,
    new_width: usize,
    rng: &mut R,
) -> Result<MlpModel, MorphError> {
    check_hidden(model, layer)?;
    let width = model.arch.hidden[layer];
    if new_width < width {
        return Err(MorphError::Shrink {
            current: width,
            requested: new_width,
        });
    }
    let mapping: Vec<usize> = (0..new_width)
        .map(|j| {
            if j < width {
                j
            } else {
                rng.random_range(0..width)
            }
        })
        .collect();
    let mut counts = vec![0usize; width];
    for &src in &mapping {
        counts[src] += 1;
    }

    let cur = &model.layers[layer];
    let mut w_in = Matrix::zeros(cur.in_dim(), new_width);
    for i in 0..cur.in_dim() {
        let src_row = cur.weights.row(i);
        for (dst, &src) in w_in.row_mut(i).iter_mut().zip(&mapping) {
            *dst = src_row[src];
        }
    }
    let bias = mapping.iter().map(|&src| cur.bias[src]).collect();

    let next = &model.layers[layer + 1];
    let mut w_out = Matrix::zeros(new_width, next.out_dim());
    for (j, &src) in mapping.iter().enumerate() {
        let c = counts[src] as f64;
        for (dst, &w) in w_out.row_mut(j).iter_mut().zip(next.weights.row(src)) {
            *dst = w / c;
        }
    }

    let mut out = model.clone();
    out.layers[layer] = DenseLayer {
        weights: w_in,
        bias,
        activation: cur.activation,
    };
    out.layers[layer + 1] = DenseLayer {
        weights: w_out,
        bias: next.bias.clone(),
        activation: next.activation,
    };
    out.arch.hidden[layer] = new_width;
    Ok(out)
}

/// Inserts an identity-initialized ReLU layer after hidden layer `after`.
/// Its inputs are ReLU outputs, hence non-negative, so `relu(I x) = x`.
pub fn deepen(model: &MlpModel, after: usize) -> Result<MlpModel, MorphError> {
    check_hidden(model, after)?;
    let width = model.arch.hidden[after];
    let mut eye = Matrix::zeros(width, width);
    for i in 0..width {
        eye.set(i, i, 1.0);
    }
    let mut out = model.clone();
    out.layers.insert(
        after + 1,
        DenseLayer {
            weights: eye,
            bias: vec![0.0; width],
            activation: Activation::Relu,
        },
    );
    out.arch.hidden.insert(after + 1, width);
    Ok(out)
}
