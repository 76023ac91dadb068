//! Activations, loss, dropout and the finite-difference oracle.

use crate::error::{Error, Result};
use crate::numkit::{Matrix, RngStream};

pub fn relu(z: &Matrix) -> Matrix {
    let mut out = z.clone();
    out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

/// Zeroes `grad` wherever the pre-activation was not positive.
pub fn relu_backward(grad: &mut Matrix, pre: &Matrix) {
    for (g, &z) in grad.data_mut().iter_mut().zip(pre.data()) {
        if z <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Mean softmax cross-entropy over the rows of `logits` and its gradient
/// with respect to the logits.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let (b, c) = logits.shape();
    if b == 0 {
        return Err(Error::Precondition("cross-entropy over an empty batch".into()));
    }
    if labels.len() != b {
        return Err(Error::shape(
            "softmax_cross_entropy",
            format!("{b} rows but {} labels", labels.len()),
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::Precondition(format!("label {bad} out of range for {c} classes")));
    }
    let inv_b = 1.0 / b as f64;
    let mut grad = Matrix::zeros(b, c);
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let log_sum = sum.ln() + max;
        loss += log_sum - row[y];
        let g = grad.row_mut(i);
        for (gj, &v) in g.iter_mut().zip(row) {
            *gj = (v - log_sum).exp() * inv_b;
        }
        g[y] -= inv_b;
    }
    Ok((loss * inv_b, grad))
}

/// Inverted dropout: kept entries are scaled by `1/(1-rate)`. Returns the
/// output and the multiplicative mask (0 or `1/(1-rate)`).
pub fn dropout(x: &Matrix, rate: f64, rng: &mut RngStream) -> (Matrix, Matrix) {
    if rate <= 0.0 {
        return (x.clone(), Matrix::filled(x.rows(), x.cols(), 1.0));
    }
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    let mut mask = Matrix::zeros(x.rows(), x.cols());
    let mut out = x.clone();
    for (o, m) in out.data_mut().iter_mut().zip(mask.data_mut()) {
        if rng.bernoulli(keep) {
            *m = scale;
            *o *= scale;
        } else {
            *o = 0.0;
        }
    }
    (out, mask)
}

/// Central-difference gradient of `f` at `x`.
pub fn finite_diff_grad(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}
