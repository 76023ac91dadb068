use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphstore::{ClientGraph, CsrMatrix};
use crate::numkit::{
    dropout, matmul, matmul_nt, matmul_tn, relu, relu_backward, AdamParams, Matrix, OptimizerKind, RngStream,
};
use crate::sampler::{Col, LayerPlan, RemoteRef};

/// Trainable feature weights `W^(1) … W^(L-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnWeights {
    pub layers: Vec<Matrix>,
}

impl GcnWeights {
    pub fn new(layers: Vec<Matrix>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Model("a GCN needs at least one weight matrix".into()));
        }
        for w in layers.windows(2) {
            if w[0].cols() != w[1].rows() {
                return Err(Error::Model(format!(
                    "weight chain breaks: {:?} then {:?}",
                    w[0].shape(),
                    w[1].shape()
                )));
            }
        }
        Ok(GcnWeights { layers })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        GcnWeights {
            layers: dims.windows(2).map(|d| Matrix::zeros(d[0], d[1])).collect(),
        }
    }

    /// Glorot-uniform initialisation.
    pub fn glorot(dims: &[usize], rng: &mut RngStream) -> Self {
        GcnWeights {
            layers: dims
                .windows(2)
                .map(|d| {
                    let limit = (6.0 / (d[0] + d[1]) as f64).sqrt();
                    Matrix::from_fn(d[0], d[1], |_, _| rng.uniform_range(-limit, limit))
                })
                .collect(),
        }
    }

    /// Layer widths `d_1 … d_L`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].rows()];
        d.extend(self.layers.iter().map(Matrix::cols));
        d
    }

    /// Number of node layers `L`.
    pub fn num_layers(&self) -> usize {
        self.layers.len() + 1
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Matrix::len).sum()
    }

    /// Row-major concatenation of all layers.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|w| w.data().iter().copied()).collect()
    }

    pub fn from_flat(dims: &[usize], flat: &[f64]) -> Result<Self> {
        let mut out = Vec::with_capacity(dims.len() - 1);
        let mut at = 0;
        for d in dims.windows(2) {
            let n = d[0] * d[1];
            let chunk = flat
                .get(at..at + n)
                .ok_or_else(|| Error::shape("from_flat", format!("{} values for dims {dims:?}", flat.len())))?;
            out.push(Matrix::from_vec(d[0], d[1], chunk.to_vec())?);
            at += n;
        }
        if at != flat.len() {
            return Err(Error::shape("from_flat", format!("{} values for dims {dims:?}", flat.len())));
        }
        Ok(GcnWeights { layers: out })
    }

    pub fn same_shape(&self, other: &GcnWeights) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| a.same_shape(b))
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Matrix::is_finite)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Node layers `L` (weight matrices = `L - 1`).
    pub layers: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub local_iterations: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            layers: 3,
            hidden: 16,
            dropout: 0.5,
            lr: 0.01,
            optimizer: OptimizerKind::Adam,
            local_iterations: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers < 2 {
            return Err(Error::Config(format!("GCN needs L ≥ 2 layers, got {}", self.layers)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        Ok(())
    }

    pub fn dims(&self, feature_dim: usize, classes: usize) -> Vec<usize> {
        let mut d = vec![feature_dim];
        d.extend(std::iter::repeat_n(self.hidden, self.layers - 2));
        d.push(classes);
        d
    }

    pub fn adam_params(&self) -> AdamParams {
        AdamParams::with_lr(self.lr)
    }
}

/// Rows received from other clients, keyed by layer and remote node. Each
/// row is `h_j^(l)(u) · W_j^(l)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExternalRows {
    rows: HashMap<(usize, RemoteRef), Vec<f64>>,
}

impl ExternalRows {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, layer: usize, node: RemoteRef, row: Vec<f64>) {
        self.rows.insert((layer, node), row);
    }

    pub fn get(&self, layer: usize, node: RemoteRef) -> Option<&[f64]> {
        self.rows.get(&(layer, node)).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Total number of reals held.
    pub fn values(&self) -> usize {
        self.rows.values().map(Vec::len).sum()
    }
}

/// Activations cached by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Layer inputs after dropout, `inputs[l-1]` over `V^(l).local`.
    inputs: Vec<Matrix>,
    /// Pre-activations `z^(l+1)`, `pre[l-1]` over `V^(l+1).local`.
    pre: Vec<Matrix>,
    /// Dropout masks (already carrying the `1/(1-rate)` scale).
    masks: Vec<Option<Matrix>>,
    /// Local-column part of each block.
    local_blocks: Vec<CsrMatrix>,
    weights: GcnWeights,
}

impl ForwardTrace {
    pub fn pre_activation(&self, l: usize) -> &Matrix {
        &self.pre[l - 1]
    }
}

fn split_block(plan: &LayerPlan, l: usize) -> Result<(CsrMatrix, CsrMatrix)> {
    let block = plan.block(l);
    let below = plan.layer(l);
    let mut local_rows = Vec::with_capacity(block.rows());
    let mut remote_rows = Vec::with_capacity(block.rows());
    for i in 0..block.rows() {
        let mut lr = Vec::new();
        let mut rr = Vec::new();
        for (c, v) in block.row(i) {
            match c {
                Col::Local(j) => lr.push((j, v)),
                Col::Remote(j) => rr.push((j, v)),
            }
        }
        local_rows.push(lr);
        remote_rows.push(rr);
    }
    Ok((
        CsrMatrix::from_rows(below.local.len(), local_rows)?,
        CsrMatrix::from_rows(below.remote.len(), remote_rows)?,
    ))
}

/// Forward pass over a sampled plan.
///
/// `z^(l+1) = Q̃_local^(l) · drop(h^(l)) · W^(l) + Q̃_remote^(l) · R^(l)` where
/// `R^(l)` stacks the external rows for `V^(l).remote`. Hidden layers use
/// ReLU; the output layer returns raw logits over the mini-batch. With
/// `dropout_rng = None` (or rate 0) no dropout is applied.
pub fn forward(
    plan: &LayerPlan,
    cg: &ClientGraph,
    w: &GcnWeights,
    ext: &ExternalRows,
    dropout_rate: f64,
    mut dropout_rng: Option<&mut RngStream>,
) -> Result<(Matrix, ForwardTrace)> {
    let layers = plan.num_layers();
    if w.num_layers() != layers {
        return Err(Error::Model(format!(
            "{}-layer weights for a {layers}-layer plan",
            w.num_layers()
        )));
    }
    if w.layers[0].rows() != cg.feature_dim() {
        return Err(Error::Model(format!(
            "first weight has {} rows but features have {} columns",
            w.layers[0].rows(),
            cg.feature_dim()
        )));
    }
    let mut h = cg.features.select_rows(&plan.layer(1).local);
    let mut inputs = Vec::with_capacity(layers - 1);
    let mut pre = Vec::with_capacity(layers - 1);
    let mut masks = Vec::with_capacity(layers - 1);
    let mut local_blocks = Vec::with_capacity(layers - 1);
    for l in 1..layers {
        let wl = &w.layers[l - 1];
        let (input, mask) = match dropout_rng.as_deref_mut() {
            Some(rng) if dropout_rate > 0.0 => {
                let (out, mask) = dropout(&h, dropout_rate, rng);
                (out, Some(mask))
            }
            _ => (h, None),
        };
        let hw = matmul(&input, wl)?;
        let (local, remote) = split_block(plan, l)?;
        let mut z = local.spmm(&hw)?;
        let remotes = &plan.layer(l).remote;
        if !remotes.is_empty() {
            let mut r = Matrix::zeros(remotes.len(), wl.cols());
            for (k, node) in remotes.iter().enumerate() {
                let row = ext.get(l, *node).ok_or(Error::MissingExternal {
                    client: node.client,
                    layer: l,
                    node: node.global,
                })?;
                if row.len() != wl.cols() {
                    return Err(Error::Model(format!(
                        "external row for node {} at layer {l} has width {}, expected {}",
                        node.global,
                        row.len(),
                        wl.cols()
                    )));
                }
                r.row_mut(k).copy_from_slice(row);
            }
            z.add_scaled(&remote.spmm(&r)?, 1.0)?;
        }
        h = if l + 1 < layers { relu(&z) } else { z.clone() };
        inputs.push(input);
        masks.push(mask);
        pre.push(z);
        local_blocks.push(local);
    }
    Ok((
        h,
        ForwardTrace {
            inputs,
            pre,
            masks,
            local_blocks,
            weights: w.clone(),
        },
    ))
}

/// Gradients of the loss with respect to every `W^(l)`, given
/// `∂ℒ/∂logits`. External rows are constants, so nothing flows to other
/// clients.
pub fn backward(trace: &ForwardTrace, logits_grad: &Matrix) -> Result<GcnWeights> {
    let n = trace.weights.layers.len();
    let mut grads = vec![Matrix::zeros(0, 0); n];
    let mut g = logits_grad.clone();
    for l in (1..=n).rev() {
        let p = trace.local_blocks[l - 1].spmm_t(&g)?;
        grads[l - 1] = matmul_tn(&trace.inputs[l - 1], &p)?;
        if l > 1 {
            let mut dh = matmul_nt(&p, &trace.weights.layers[l - 1])?;
            if let Some(mask) = &trace.masks[l - 1] {
                for (d, &m) in dh.data_mut().iter_mut().zip(mask.data()) {
                    *d *= m;
                }
            }
            relu_backward(&mut dh, &trace.pre[l - 2]);
            g = dh;
        }
    }
    GcnWeights::new(grads)
}

/// Full-neighbourhood forward over an explicit adjacency. Returns the
/// products `h^(l) · W^(l)` for `l = 1 … L-1` (before aggregation); the
/// logits are `adj · products[L-2]`.
pub fn full_products(adj: &CsrMatrix, features: &Matrix, w: &GcnWeights) -> Result<Vec<Matrix>> {
    let mut products = Vec::with_capacity(w.layers.len());
    let mut h = features.clone();
    for (k, wl) in w.layers.iter().enumerate() {
        let hw = matmul(&h, wl)?;
        if k + 1 < w.layers.len() {
            h = relu(&adj.spmm(&hw)?);
        }
        products.push(hw);
    }
    Ok(products)
}

pub fn full_logits(adj: &CsrMatrix, features: &Matrix, w: &GcnWeights) -> Result<Matrix> {
    let products = full_products(adj, features, w)?;
    adj.spmm(products.last().expect("at least one layer"))
}

/// Accuracy of argmax predictions (ties → lowest class) on `nodes`.
pub fn accuracy(logits: &Matrix, labels: &[usize], nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::Precondition("accuracy over an empty node set".into()));
    }
    let pred = logits.argmax_rows();
    let hits = nodes.iter().filter(|&&v| pred[v] == labels[v]).count();
    Ok(hits as f64 / nodes.len() as f64)
}

/// Unsampled evaluation on a graph given by its normalised adjacency.
pub fn evaluate(adj: &CsrMatrix, features: &Matrix, labels: &[usize], w: &GcnWeights, nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::Precondition("evaluation over an empty node set".into()));
    }
    let logits = full_logits(adj, features, w)?;
    accuracy(&logits, labels, nodes)
}
