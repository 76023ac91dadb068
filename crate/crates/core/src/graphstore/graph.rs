use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphstore::CsrMatrix;
use crate::numkit::{Matrix, Purpose, RngStream};

/// Role of a node in the train/validation/test split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Split {
    Unlabeled = 0,
    Train = 1,
    Val = 2,
    Test = 3,
}

impl Split {
    pub fn from_u8(v: u8) -> Option<Split> {
        match v {
            0 => Some(Split::Unlabeled),
            1 => Some(Split::Train),
            2 => Some(Split::Val),
            3 => Some(Split::Test),
            _ => None,
        }
    }
}

/// Fractions of labelled nodes assigned to train and validation; the
/// remainder is test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.6, val: 0.2 }
    }
}

/// Undirected attributed graph. Adjacency is stored symmetric, sorted and
/// without self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub labeled: Vec<bool>,
    pub split: Vec<Split>,
    pub num_classes: usize,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Duplicates and
    /// self-loops are discarded.
    pub fn from_edges(
        n: usize,
        edges: &[(usize, usize)],
        features: Matrix,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Graph> {
        if features.rows() != n || labels.len() != n {
            return Err(Error::shape(
                "graph",
                format!("{n} nodes, {} feature rows, {} labels", features.rows(), labels.len()),
            ));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::Precondition(format!("label {y} ≥ {num_classes} classes")));
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Precondition(format!("edge ({a}, {b}) out of range for {n} nodes")));
            }
            if a != b {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut neighbors = Vec::new();
        for list in adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
            neighbors.extend_from_slice(list);
            offsets.push(neighbors.len());
        }
        Ok(Graph {
            offsets,
            neighbors,
            features,
            labels,
            labeled: vec![true; n],
            split: vec![Split::Unlabeled; n],
            num_classes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Number of stored directed adjacency entries (twice the edge count).
    pub fn num_directed_entries(&self) -> usize {
        self.neighbors.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    pub fn csr(&self) -> (&[usize], &[usize]) {
        (&self.offsets, &self.neighbors)
    }

    pub fn nodes_with_split(&self, split: Split) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&v| self.split[v] == split).collect()
    }

    /// Draws a seeded train/val/test split over the labelled nodes.
    pub fn assign_splits(&mut self, ratios: SplitRatios, seed: u64) {
        let mut rng = RngStream::derive(seed, Purpose::Split, 0);
        let mut labeled: Vec<usize> = (0..self.num_nodes()).filter(|&v| self.labeled[v]).collect();
        rng.shuffle(&mut labeled);
        let n = labeled.len();
        let n_train = (ratios.train * n as f64).round() as usize;
        let n_val = ((ratios.val * n as f64).round() as usize).min(n - n_train.min(n));
        self.split.iter_mut().for_each(|s| *s = Split::Unlabeled);
        for (k, &v) in labeled.iter().enumerate() {
            self.split[v] = if k < n_train {
                Split::Train
            } else if k < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }

    /// Subgraph induced by `nodes` (in the given order). Attributes and
    /// splits are carried over.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Graph {
        let mut position = vec![usize::MAX; self.num_nodes()];
        for (k, &v) in nodes.iter().enumerate() {
            position[v] = k;
        }
        let mut offsets = Vec::with_capacity(nodes.len() + 1);
        offsets.push(0);
        let mut neighbors = Vec::new();
        for &v in nodes {
            let mut row: Vec<usize> = self
                .neighbors(v)
                .iter()
                .filter_map(|&u| (position[u] != usize::MAX).then_some(position[u]))
                .collect();
            row.sort_unstable();
            neighbors.extend(row);
            offsets.push(neighbors.len());
        }
        Graph {
            offsets,
            neighbors,
            features: self.features.select_rows(nodes),
            labels: nodes.iter().map(|&v| self.labels[v]).collect(),
            labeled: nodes.iter().map(|&v| self.labeled[v]).collect(),
            split: nodes.iter().map(|&v| self.split[v]).collect(),
            num_classes: self.num_classes,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.num_nodes()).all(|v| self.neighbors(v).iter().all(|&u| u != v && self.has_edge(u, v)))
    }
}

/// Symmetric normalised adjacency with self-loops,
/// `Q(v,u) = 1/√(d̃(v)·d̃(u))` over `Ã = A + I`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency(pub CsrMatrix);

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.0
    }
}

pub fn normalized_adjacency(g: &Graph) -> NormalizedAdjacency {
    let n = g.num_nodes();
    let dt: Vec<f64> = (0..n).map(|v| (g.degree(v) + 1) as f64).collect();
    let rows = (0..n)
        .map(|v| {
            let mut row: Vec<(usize, f64)> = g
                .neighbors(v)
                .iter()
                .map(|&u| (u, 1.0 / (dt[v] * dt[u]).sqrt()))
                .collect();
            let at = row.partition_point(|&(u, _)| u < v);
            row.insert(at, (v, 1.0 / dt[v]));
            row
        })
        .collect();
    NormalizedAdjacency(CsrMatrix::from_rows(n, rows).expect("valid by construction"))
}
