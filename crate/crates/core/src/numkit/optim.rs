use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamParams {
    pub fn with_lr(lr: f64) -> Self {
        AdamParams {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state for one parameter matrix.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub kind: OptimizerKind,
    pub params: AdamParams,
    m: Matrix,
    v: Matrix,
    t: u64,
}

impl AdamState {
    pub fn new(kind: OptimizerKind, params: AdamParams, rows: usize, cols: usize) -> Self {
        AdamState {
            kind,
            params,
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            t: 0,
        }
    }

    pub fn for_param(kind: OptimizerKind, params: AdamParams, param: &Matrix) -> Self {
        AdamState::new(kind, params, param.rows(), param.cols())
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn reset(&mut self) {
        self.m.scale(0.0);
        self.v.scale(0.0);
        self.t = 0;
    }
}

/// One optimizer step in place. In SGD mode this is exactly
/// `param -= lr * grad`.
pub fn adam_step(param: &mut Matrix, grad: &Matrix, state: &mut AdamState) -> Result<()> {
    if !param.same_shape(grad) || !param.same_shape(&state.m) {
        return Err(Error::shape(
            "adam_step",
            format!(
                "param {:?}, grad {:?}, state {:?}",
                param.shape(),
                grad.shape(),
                state.m.shape()
            ),
        ));
    }
    let AdamParams {
        lr,
        beta1,
        beta2,
        eps,
    } = state.params;
    state.t += 1;
    match state.kind {
        OptimizerKind::Sgd => {
            for (p, g) in param.data_mut().iter_mut().zip(grad.data()) {
                *p -= lr * g;
            }
        }
        OptimizerKind::Adam => {
            let bc1 = 1.0 - beta1.powi(state.t as i32);
            let bc2 = 1.0 - beta2.powi(state.t as i32);
            let m = state.m.data_mut();
            let v = state.v.data_mut();
            for (((p, &g), mi), vi) in param
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mi = beta1 * *mi + (1.0 - beta1) * g;
                *vi = beta2 * *vi + (1.0 - beta2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
    Ok(())
}
