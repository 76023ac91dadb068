//! PCA by power iteration with deflation.
//!
//! The eigenproblem is solved in whichever space is smaller: the `d × d`
//! covariance when there are more samples than dimensions, otherwise the
//! `n × n` Gram matrix, whose eigenvectors are mapped back through the
//! centred data. Flattened GCN weights have tens of thousands of entries
//! but only a few dozen samples, so the Gram route is the usual one.

use crate::error::{Error, Result};
use crate::numkit::matrix::dot;
use crate::numkit::Matrix;

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k × d`, orthonormal rows (all zero for a degenerate fit).
    pub components: Matrix,
    /// Variance captured by each component.
    pub variances: Vec<f64>,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.rows()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.variances.iter().all(|&v| v == 0.0) && self.components.data().iter().all(|&c| c == 0.0)
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        pca_project(self, x)
    }

    pub fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, &zc) in z.iter().enumerate() {
            for (o, &w) in out.iter_mut().zip(self.components.row(c)) {
                *o += zc * w;
            }
        }
        out
    }
}

pub fn pca_fit(samples: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Precondition(format!("PCA needs at least 2 samples, got {n}")));
    }
    let d = samples[0].len();
    if let Some(bad) = samples.iter().find(|s| s.len() != d) {
        return Err(Error::shape("pca_fit", format!("sample of length {} vs {d}", bad.len())));
    }
    if k == 0 || k > d.min(n) {
        return Err(Error::Precondition(format!(
            "k = {k} must be in 1..={} for {n} samples of dimension {d}",
            d.min(n)
        )));
    }

    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, &v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut centred = Matrix::zeros(n, d);
    for (i, s) in samples.iter().enumerate() {
        for ((c, &v), &m) in centred.row_mut(i).iter_mut().zip(s).zip(&mean) {
            *c = v - m;
        }
    }

    let scale = centred.data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return Ok(PcaModel {
            mean,
            components: Matrix::zeros(k, d),
            variances: vec![0.0; k],
        });
    }

    let denom = (n - 1) as f64;
    let use_gram = n <= d;
    let mut gram = if use_gram {
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot(centred.row(i), centred.row(j)) / denom;
                g.set(i, j, v);
                g.set(j, i, v);
            }
        }
        g
    } else {
        let mut c = crate::numkit::matmul_tn(&centred, &centred)?;
        c.scale(1.0 / denom);
        c
    };

    let floor = 1e-12 * trace(&gram).max(f64::MIN_POSITIVE);
    let mut eigvecs: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut eigvals = Vec::with_capacity(k);
    for _ in 0..k {
        let (lambda, v) = dominant_eigenpair(&gram, &eigvecs);
        if lambda <= floor {
            break;
        }
        deflate(&mut gram, lambda, &v);
        eigvals.push(lambda);
        eigvecs.push(v);
    }

    let mut components: Vec<Vec<f64>> = if use_gram {
        eigvecs
            .iter()
            .map(|u| {
                let mut c = vec![0.0; d];
                for (i, &ui) in u.iter().enumerate() {
                    for (cj, &xij) in c.iter_mut().zip(centred.row(i)) {
                        *cj += ui * xij;
                    }
                }
                c
            })
            .collect()
    } else {
        eigvecs
    };
    // Re-orthonormalise; rank-deficient tails are completed from the
    // standard basis and carry zero variance.
    let mut basis = 0;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for (idx, c) in components.drain(..).enumerate() {
        if let Some(v) = orthonormalise(c, &out) {
            out.push(v);
            variances.push(eigvals[idx]);
        }
    }
    while out.len() < k {
        let mut e = vec![0.0; d];
        e[basis] = 1.0;
        basis += 1;
        if let Some(v) = orthonormalise(e, &out) {
            out.push(v);
            variances.push(0.0);
        }
    }
    for c in out.iter_mut() {
        canonical_sign(c);
    }
    let data = out.into_iter().flatten().collect();
    Ok(PcaModel {
        mean,
        components: Matrix::from_vec(k, d, data)?,
        variances,
    })
}

pub fn pca_project(model: &PcaModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.dim() {
        return Err(Error::shape(
            "pca_project",
            format!("vector of length {} vs model dimension {}", x.len(), model.dim()),
        ));
    }
    let centred: Vec<f64> = x.iter().zip(&model.mean).map(|(a, m)| a - m).collect();
    Ok((0..model.k())
        .map(|c| dot(model.components.row(c), &centred))
        .collect())
}

fn trace(m: &Matrix) -> f64 {
    (0..m.rows()).map(|i| m.get(i, i)).sum()
}

fn mat_vec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..m.rows()).map(|i| dot(m.row(i), v)).collect()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn remove_components(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let p = dot(v, b);
        for (vi, bi) in v.iter_mut().zip(b) {
            *vi -= p * bi;
        }
    }
}

fn dominant_eigenpair(m: &Matrix, found: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let n = m.rows();
    // Start from the row with the largest norm; it lies in the range of `m`.
    let start = (0..n)
        .max_by(|&a, &b| norm(m.row(a)).total_cmp(&norm(m.row(b))))
        .unwrap_or(0);
    let mut v = m.row(start).to_vec();
    remove_components(&mut v, found);
    let nv = norm(&v);
    if nv == 0.0 {
        return (0.0, v);
    }
    v.iter_mut().for_each(|x| *x /= nv);

    for _ in 0..POWER_MAX_ITERS {
        let mut next = mat_vec(m, &v);
        remove_components(&mut next, found);
        let nn = norm(&next);
        if nn == 0.0 {
            return (0.0, v);
        }
        next.iter_mut().for_each(|x| *x /= nn);
        let delta: f64 = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        v = next;
        if delta < POWER_TOL {
            break;
        }
    }
    let lambda = dot(&v, &mat_vec(m, &v));
    (lambda, v)
}

fn deflate(m: &mut Matrix, lambda: f64, v: &[f64]) {
    let n = m.rows();
    for i in 0..n {
        for j in 0..n {
            let cur = m.get(i, j);
            m.set(i, j, cur - lambda * v[i] * v[j]);
        }
    }
}

fn orthonormalise(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let before = norm(&v);
    if before == 0.0 {
        return None;
    }
    // Two passes of classical Gram-Schmidt.
    remove_components(&mut v, basis);
    remove_components(&mut v, basis);
    let after = norm(&v);
    if after <= 1e-9 * before {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= after);
    Some(v)
}

fn canonical_sign(v: &mut [f64]) {
    let pivot = v
        .iter()
        .cloned()
        .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
