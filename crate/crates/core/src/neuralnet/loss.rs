use alloc::vec::Vec;

use super::{check_dim, NetError};

/// Mean absolute error and its gradient `sign(pred - target) / n`, with
/// `sign(0) = 0`.
pub fn mae_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>), NetError> {
    check_dim("target length", pred.len(), target.len())?;
    if pred.is_empty() {
        return Err(NetError::EmptyBatch);
    }
    let n = pred.len() as f64;
    let mut sum = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let r = p - t;
            sum += libm::fabs(r);
            if r > 0.0 {
                1.0 / n
            } else if r < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    Ok((sum / n, grad))
}
