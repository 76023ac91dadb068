//! Numeric kernel: dense matrices, activations, loss, optimizers, PCA,
//! a finite-difference oracle and seeded random streams.

mod matrix;
mod ops;
mod optim;
mod pca;
mod rng;

pub use matrix::{dot, matmul, matmul_nt, matmul_tn, Matrix};
pub use ops::{dropout, finite_diff_grad, relu, relu_backward, softmax_cross_entropy};
pub use optim::{adam_step, AdamParams, AdamState, OptimizerKind};
pub use pca::{pca_fit, pca_project, PcaModel, POWER_MAX_ITERS, POWER_TOL};
pub use rng::{Purpose, RngStream};
