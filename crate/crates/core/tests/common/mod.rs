//! Fixtures and independent dense oracles shared by the integration tests.
#![allow(dead_code)]

use fedgraph_core::graphstore::{partition_with_assignment, synth_sbm, Graph, Partition, SbmSpec, Split};
use fedgraph_core::numkit::{Matrix, RngStream};
use nalgebra::DMatrix;

pub mod checks;

/// Erdős–Rényi graph with Gaussian features and uniform labels; every node
/// is a training node.
pub fn random_graph(n: usize, p: f64, fdim: usize, classes: usize, rng: &mut RngStream) -> Graph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.bernoulli(p) {
                edges.push((a, b));
            }
        }
    }
    let features = Matrix::from_fn(n, fdim, |_, _| rng.normal());
    let labels = (0..n).map(|_| rng.below(classes)).collect();
    let mut g = Graph::from_edges(n, &edges, features, labels, classes).unwrap();
    g.split = vec![Split::Train; n];
    g
}

pub fn sbm(blocks: usize, per_block: usize, p_in: f64, p_out: f64, fdim: usize, seed: u64) -> Graph {
    synth_sbm(&SbmSpec::new(blocks, per_block, p_in, p_out, fdim, seed)).unwrap()
}

pub fn all_train(mut g: Graph) -> Graph {
    g.split = vec![Split::Train; g.num_nodes()];
    g
}

pub fn single_client(g: &Graph) -> Partition {
    partition_with_assignment(g, vec![(0..g.num_nodes()).collect()]).unwrap()
}

/// Disjoint random assignment of every node to one of `k` clients, each
/// client getting at least one node.
pub fn random_disjoint(g: &Graph, k: usize, rng: &mut RngStream) -> Partition {
    let n = g.num_nodes();
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut sets = vec![Vec::new(); k];
    for (i, &v) in order.iter().enumerate() {
        let c = if i < k { i } else { rng.below(k) };
        sets[c].push(v);
    }
    for s in &mut sets {
        s.sort_unstable();
    }
    partition_with_assignment(g, sets).unwrap()
}

pub fn to_dm(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j))
}

pub fn adjacency(g: &Graph) -> DMatrix<f64> {
    let n = g.num_nodes();
    let mut a = DMatrix::zeros(n, n);
    for v in 0..n {
        for &u in g.neighbors(v) {
            a[(v, u)] = 1.0;
        }
    }
    a
}

/// `D̃^{-1/2}(A+I)D̃^{-1/2}` built densely from the adjacency.
pub fn dense_q(g: &Graph) -> DMatrix<f64> {
    let n = g.num_nodes();
    let at = adjacency(g) + DMatrix::identity(n, n);
    let d: Vec<f64> = (0..n).map(|i| at.row(i).sum()).collect();
    DMatrix::from_fn(n, n, |i, j| at[(i, j)] / (d[i] * d[j]).sqrt())
}

pub fn relu(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|x| x.max(0.0))
}

/// Layer-wise `H ← σ(Q H W)`, no activation on the last layer.
pub fn dense_gcn(q: &DMatrix<f64>, x: &DMatrix<f64>, ws: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut h = x.clone();
    for (k, w) in ws.iter().enumerate() {
        let z = q * &h * w;
        h = if k + 1 < ws.len() { relu(&z) } else { z };
    }
    h
}

/// Mean softmax cross-entropy, computed with a log-sum-exp shift.
pub fn mean_ce(logits: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let m = row.max();
        let lse = m + row.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
        total += lse - row[y];
    }
    total / labels.len() as f64
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
