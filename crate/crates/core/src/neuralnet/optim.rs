use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Gradients, MlpModel, NetError, TrainConfig};

/// First and second moment accumulators shaped like the model's parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Gradients,
    pub v: Gradients,
    pub t: u64,
}

impl AdamState {
    pub fn new(model: &MlpModel) -> Self {
        Self {
            m: Gradients::zeros_like(model),
            v: Gradients::zeros_like(model),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    model: &mut MlpModel,
    grads: &Gradients,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<(), NetError> {
    grads.check_shape(model)?;
    state.m.check_shape(model)?;
    state.v.check_shape(model)?;
    state.t += 1;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - libm::pow(b1, state.t as f64);
    let c2 = 1.0 - libm::pow(b2, state.t as f64);
    let update = |p: &mut [f64], g: &[f64], m: &mut Vec<f64>, v: &mut Vec<f64>| {
        for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= cfg.learning_rate * m_hat / (libm::sqrt(v_hat) + cfg.epsilon);
        }
    };
    for (l, layer) in model.layers.iter_mut().enumerate() {
        let g = &grads.layers[l];
        let m = &mut state.m.layers[l];
        let v = &mut state.v.layers[l];
        update(
            layer.weights.as_mut_slice(),
            &g.weights,
            &mut m.weights,
            &mut v.weights,
        );
        update(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias);
    }
    Ok(())
}
