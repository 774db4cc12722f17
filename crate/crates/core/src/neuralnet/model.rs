use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_dim, mae_loss, ArchSpec, NetError};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `in_dim x out_dim`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self, NetError> {
        check_dim("bias length", weights.cols(), bias.len())?;
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }

    /// `act(x W + b)` for every row of `x`.
    fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), self.out_dim());
        for b in 0..x.rows() {
            let orow = out.row_mut(b);
            orow.copy_from_slice(&self.bias);
            for (i, &xi) in x.row(b).iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                for (o, &w) in orow.iter_mut().zip(self.weights.row(i)) {
                    *o += xi * w;
                }
            }
            if self.activation == Activation::Relu {
                for o in orow.iter_mut() {
                    if *o < 0.0 {
                        *o = 0.0;
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerGradients {
    /// Row-major, same shape as the layer's weights.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: vec![0.0; l.in_dim() * l.out_dim()],
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub(crate) fn check_shape(&self, model: &MlpModel) -> Result<(), NetError> {
        check_dim(
            "gradient layer count",
            model.layers.len(),
            self.layers.len(),
        )?;
        for (g, l) in self.layers.iter().zip(&model.layers) {
            check_dim(
                "gradient weights",
                l.in_dim() * l.out_dim(),
                g.weights.len(),
            )?;
            check_dim("gradient bias", l.out_dim(), g.bias.len())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub arch: ArchSpec,
    pub layers: Vec<DenseLayer>,
}

impl MlpModel {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(arch: &ArchSpec, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let dims = arch.layer_dims();
        let last = dims.len() - 1;
        let layers = dims
            .iter()
            .enumerate()
            .map(|(l, &(fan_in, fan_out))| {
                let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-limit..limit))
                    .collect();
                DenseLayer {
                    weights: Matrix::from_vec(fan_in, fan_out, data).expect("sized buffer"),
                    bias: vec![0.0; fan_out],
                    activation: if l == last {
                        Activation::Linear
                    } else {
                        Activation::Relu
                    },
                }
            })
            .collect();
        Self {
            arch: arch.clone(),
            layers,
        }
    }

    /// Assembles a model from explicit layers, checking that dimensions
    /// chain, hidden layers are ReLU and the head is one linear unit.
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self, NetError> {
        let Some(head) = layers.last() else {
            return Err(NetError::InvalidArch("no layers".into()));
        };
        if head.out_dim() != 1 || head.activation != Activation::Linear {
            return Err(NetError::InvalidArch(
                "head must be a single linear unit".into(),
            ));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(NetError::InvalidArch(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
            if pair[0].activation != Activation::Relu {
                return Err(NetError::InvalidArch(format!(
                    "hidden layer {i} must be ReLU"
                )));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(NetError::InvalidArch(format!(
                    "layer {i} bias length mismatch"
                )));
            }
        }
        let hidden = layers[..layers.len() - 1]
            .iter()
            .map(DenseLayer::out_dim)
            .collect();
        let arch = ArchSpec::new(layers[0].in_dim(), hidden)?;
        Ok(Self { arch, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.in_dim() * l.out_dim() + l.out_dim())
            .sum()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Vec<f64>, NetError> {
        check_dim("input columns", self.input_dim(), x.cols())?;
        let mut a = None;
        for layer in &self.layers {
            a = Some(layer.apply(a.as_ref().unwrap_or(x)));
        }
        Ok(a.map(Matrix::into_vec).unwrap_or_default())
    }

    /// Post-activation outputs of every layer, head last.
    fn trace(&self, x: &Matrix) -> Vec<Matrix> {
        let mut acts: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let next = layer.apply(acts.last().unwrap_or(x));
            acts.push(next);
        }
        acts
    }

    /// MAE of the batch and exact reverse-mode gradients of it. The ReLU
    /// subgradient at 0 is 0.
    pub fn backward(&self, x: &Matrix, target: &[f64]) -> Result<(f64, Gradients), NetError> {
        check_dim("input columns", self.input_dim(), x.cols())?;
        check_dim("target length", x.rows(), target.len())?;
        let acts = self.trace(x);
        let pred = acts.last().expect("at least one layer").as_slice();
        let (loss, dpred) = mae_loss(pred, target)?;
        let n = x.rows();
        let mut grads = Gradients::zeros_like(self);
        let mut delta = Matrix::from_vec(n, 1, dpred).expect("n x 1");
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = if l == 0 { x } else { &acts[l - 1] };
            let out = layer.out_dim();
            let g = &mut grads.layers[l];
            for b in 0..n {
                let d = delta.row(b);
                for (gb, &dv) in g.bias.iter_mut().zip(d) {
                    *gb += dv;
                }
                for (i, &ai) in input.row(b).iter().enumerate() {
                    if ai == 0.0 {
                        continue;
                    }
                    let gw = &mut g.weights[i * out..(i + 1) * out];
                    for (w, &dv) in gw.iter_mut().zip(d) {
                        *w += ai * dv;
                    }
                }
            }
            if l > 0 {
                // Every layer below the head is ReLU: pass gradient where the
                // activation was strictly positive.
                let mut prev = Matrix::zeros(n, layer.in_dim());
                for b in 0..n {
                    let d = delta.row(b);
                    let a = input.row(b);
                    let p = prev.row_mut(b);
                    for (i, pv) in p.iter_mut().enumerate() {
                        if a[i] > 0.0 {
                            *pv = layer
                                .weights
                                .row(i)
                                .iter()
                                .zip(d)
                                .map(|(w, dv)| w * dv)
                                .sum();
                        }
                    }
                }
                delta = prev;
            }
        }
        Ok((loss, grads))
    }

    /// Mutable access to one parameter by flat index, as used by gradient
    /// checks. Index order matches `Gradients::iter`.
    pub fn param_mut(&mut self, mut index: usize) -> Option<&mut f64> {
        for layer in &mut self.layers {
            let nw = layer.weights.as_slice().len();
            if index < nw {
                return layer.weights.as_mut_slice().get_mut(index);
            }
            index -= nw;
            if index < layer.bias.len() {
                return layer.bias.get_mut(index);
            }
            index -= layer.bias.len();
        }
        None
    }
}
