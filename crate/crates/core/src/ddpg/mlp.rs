use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{adam_step, matmul, matmul_nt, matmul_tn, AdamParams, AdamState, Matrix, OptimizerKind, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Tanh,
}

/// Fully connected net with ReLU hidden layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNet {
    /// `weights[k]` is `dims[k] × dims[k+1]`.
    pub weights: Vec<Matrix>,
    /// `biases[k]` is `1 × dims[k+1]`.
    pub biases: Vec<Matrix>,
    pub output: Activation,
}

/// Activations kept for [`MlpNet::backward`].
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
    out: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Matrix>,
}

impl MlpNet {
    /// Fan-in uniform initialisation for hidden layers; the output layer is
    /// drawn from `±final_init` (zeros when `final_init = 0`).
    pub fn new(dims: &[usize], output: Activation, final_init: f64, rng: &mut RngStream) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Model(format!("invalid MLP dims {dims:?}")));
        }
        let last = dims.len() - 2;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (k, d) in dims.windows(2).enumerate() {
            let limit = if k == last { final_init } else { 1.0 / (d[0] as f64).sqrt() };
            weights.push(Matrix::from_fn(d[0], d[1], |_, _| rng.uniform_range(-limit, limit)));
            biases.push(Matrix::from_fn(1, d[1], |_, _| rng.uniform_range(-limit, limit)));
        }
        Ok(MlpNet {
            weights,
            biases,
            output,
        })
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.weights[0].rows()];
        d.extend(self.weights.iter().map(Matrix::cols));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().expect("non-empty").cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<(Matrix, MlpCache)> {
        let n = self.weights.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut h = x.clone();
        for k in 0..n {
            let mut z = matmul(&h, &self.weights[k])?;
            let b = self.biases[k].row(0);
            for r in 0..z.rows() {
                for (v, &bv) in z.row_mut(r).iter_mut().zip(b) {
                    *v += bv;
                }
            }
            let act = if k + 1 < n {
                crate::numkit::relu(&z)
            } else {
                match self.output {
                    Activation::Linear => z.clone(),
                    Activation::Tanh => Matrix::from_fn(z.rows(), z.cols(), |i, j| z.get(i, j).tanh()),
                }
            };
            inputs.push(h);
            pre.push(z);
            h = act;
        }
        Ok((h.clone(), MlpCache { inputs, pre, out: h }))
    }

    /// Parameter gradients and the gradient with respect to the input.
    pub fn backward(&self, cache: &MlpCache, d_out: &Matrix) -> Result<(MlpGrads, Matrix)> {
        if !d_out.same_shape(&cache.out) {
            return Err(Error::shape("mlp backward", format!("{:?} vs {:?}", d_out.shape(), cache.out.shape())));
        }
        let n = self.weights.len();
        let mut g = d_out.clone();
        if self.output == Activation::Tanh {
            for (gv, &y) in g.data_mut().iter_mut().zip(cache.out.data()) {
                *gv *= 1.0 - y * y;
            }
        }
        let mut gw = vec![Matrix::zeros(0, 0); n];
        let mut gb = vec![Matrix::zeros(0, 0); n];
        for k in (0..n).rev() {
            gw[k] = matmul_tn(&cache.inputs[k], &g)?;
            let mut bsum = Matrix::zeros(1, g.cols());
            for r in 0..g.rows() {
                for (b, &v) in bsum.row_mut(0).iter_mut().zip(g.row(r)) {
                    *b += v;
                }
            }
            gb[k] = bsum;
            let mut dx = matmul_nt(&g, &self.weights[k])?;
            if k > 0 {
                crate::numkit::relu_backward(&mut dx, &cache.pre[k - 1]);
            }
            g = dx;
        }
        Ok((MlpGrads { weights: gw, biases: gb }, g))
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Matrix::len).sum()
    }

    /// Weights then biases, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.extend_from_slice(w.data());
            v.extend_from_slice(b.data());
        }
        v
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::shape("set_params", format!("{} values for {} params", flat.len(), self.num_params())));
        }
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            for m in [w, b] {
                let n = m.len();
                m.data_mut().copy_from_slice(&flat[at..at + n]);
                at += n;
            }
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &MlpNet) -> bool {
        self.weights.len() == other.weights.len()
            && self.weights.iter().zip(&other.weights).all(|(a, b)| a.same_shape(b))
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).all(Matrix::is_finite)
    }
}

/// Adam moments for every parameter of one net.
#[derive(Debug, Clone)]
pub struct MlpOptimizer {
    weights: Vec<AdamState>,
    biases: Vec<AdamState>,
}

impl MlpOptimizer {
    pub fn new(net: &MlpNet, lr: f64) -> Self {
        let mk = |m: &Matrix| AdamState::for_param(OptimizerKind::Adam, AdamParams::with_lr(lr), m);
        MlpOptimizer {
            weights: net.weights.iter().map(mk).collect(),
            biases: net.biases.iter().map(mk).collect(),
        }
    }

    pub fn step(&mut self, net: &mut MlpNet, grads: &MlpGrads) -> Result<()> {
        for ((w, g), s) in net.weights.iter_mut().zip(&grads.weights).zip(&mut self.weights) {
            adam_step(w, g, s)?;
        }
        for ((b, g), s) in net.biases.iter_mut().zip(&grads.biases).zip(&mut self.biases) {
            adam_step(b, g, s)?;
        }
        Ok(())
    }
}

/// `θ̃ ← φ·θ + (1 − φ)·θ̃`.
pub fn soft_update(target: &mut MlpNet, online: &MlpNet, phi: f64) -> Result<()> {
    if !target.same_shape(online) {
        return Err(Error::shape("soft_update", "target and online nets differ"));
    }
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::Precondition(format!("soft-update rate {phi} outside [0, 1]")));
    }
    let pairs = target
        .weights
        .iter_mut()
        .zip(&online.weights)
        .chain(target.biases.iter_mut().zip(&online.biases));
    for (t, o) in pairs {
        for (tv, &ov) in t.data_mut().iter_mut().zip(o.data()) {
            *tv = phi * ov + (1.0 - phi) * *tv;
        }
    }
    Ok(())
}
