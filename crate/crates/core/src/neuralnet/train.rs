use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{adam_step, check_dim, mae_loss, AdamState, ArchSpec, MlpModel, NetError};
use crate::dataset::CleanDataset;
use crate::encoding::{encode_matrix, FeatureEncoder};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Standardize targets with the training mean and std while fitting.
    pub target_scaling: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            seed: 42,
            target_scaling: true,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), NetError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(NetError::Config(format!(
                "epochs ({}) and batch_size ({}) must be >= 1",
                self.epochs, self.batch_size
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NetError::Config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Per-epoch MAE in IDR.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_mae: Vec<f64>,
    /// Empty when no validation set was given.
    pub val_mae: Vec<f64>,
}

impl TrainHistory {
    pub fn final_train_mae(&self) -> Option<f64> {
        self.train_mae.last().copied()
    }

    pub fn final_val_mae(&self) -> Option<f64> {
        self.val_mae.last().copied()
    }
}

/// Fresh model from `init(arch, cfg.seed)`, then [`fit`].
pub fn train(
    arch: &ArchSpec,
    x: &Matrix,
    y: &[f64],
    val: Option<(&Matrix, &[f64])>,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainHistory), NetError> {
    fit(MlpModel::init(arch, cfg.seed), x, y, val, cfg)
}

/// Mini-batch Adam on MAE, starting from `model` with fresh optimizer state.
///
/// With target scaling, the network is trained on standardized targets and
/// the inverse transform is folded into the linear head at the end, so the
/// returned model predicts IDR directly. An incoming model is assumed to
/// predict IDR and is unfolded first.
pub fn fit(
    mut model: MlpModel,
    x: &Matrix,
    y: &[f64],
    val: Option<(&Matrix, &[f64])>,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainHistory), NetError> {
    cfg.validate()?;
    check_dim("input columns", model.input_dim(), x.cols())?;
    check_dim("target length", x.rows(), y.len())?;
    if x.rows() == 0 {
        return Err(NetError::EmptyBatch);
    }
    if let Some((xv, yv)) = val {
        check_dim("validation columns", model.input_dim(), xv.cols())?;
        check_dim("validation target length", xv.rows(), yv.len())?;
    }

    let (mean, std) = if cfg.target_scaling {
        target_stats(y)
    } else {
        (0.0, 1.0)
    };
    let ys: Vec<f64> = y.iter().map(|v| (v - mean) / std).collect();
    rescale_head(&mut model, 1.0 / std, -mean / std);

    let mut state = AdamState::new(&model);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut shuffle_rng = rng::seeded(rng::mix(cfg.seed, 1));
    let mut history = TrainHistory::default();
    let diverged = |epoch| NetError::Diverged {
        epoch,
        learning_rate: cfg.learning_rate,
    };

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = x.select_rows(batch);
            let yb: Vec<f64> = batch.iter().map(|&i| ys[i]).collect();
            let (loss, grads) = model.backward(&xb, &yb)?;
            if !loss.is_finite() {
                return Err(diverged(epoch));
            }
            adam_step(&mut model, &grads, &mut state, cfg)?;
            loss_sum += loss * batch.len() as f64;
        }
        history.train_mae.push(loss_sum / x.rows() as f64 * std);
        if let Some((xv, yv)) = val.filter(|(xv, _)| xv.rows() > 0) {
            let pred: Vec<f64> = model.forward(xv)?.iter().map(|p| p * std + mean).collect();
            let (mae, _) = mae_loss(&pred, yv)?;
            if !mae.is_finite() {
                return Err(diverged(epoch));
            }
            history.val_mae.push(mae);
        }
    }
    rescale_head(&mut model, std, mean);
    Ok((model, history))
}

fn target_stats(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = libm::sqrt(var);
    if std > 0.0 && std.is_finite() {
        (mean, std)
    } else {
        (mean, 1.0)
    }
}

/// Replaces the head's output `o` with `scale * o + shift`.
fn rescale_head(model: &mut MlpModel, scale: f64, shift: f64) {
    if scale == 1.0 && shift == 0.0 {
        return;
    }
    let head = model.layers.last_mut().expect("model has a head");
    head.weights
        .as_mut_slice()
        .iter_mut()
        .for_each(|w| *w *= scale);
    head.bias.iter_mut().for_each(|b| *b = *b * scale + shift);
}

/// MAE in IDR of `model` on the encoded `test` set.
pub fn evaluate(
    model: &MlpModel,
    encoder: &FeatureEncoder,
    test: &CleanDataset,
) -> Result<f64, NetError> {
    if test.is_empty() {
        return Err(NetError::EmptyBatch);
    }
    let (x, y) = encode_matrix(encoder, test);
    let pred = model.forward(&x)?;
    Ok(mae_loss(&pred, &y)?.0)
}
