//! Splitting a global graph into client subgraphs.
//!
//! Each client samples a fraction of the nodes; overlap between clients is
//! allowed and overlapping copies are distinct nodes. Edges with both ends
//! inside a client are internal; edges leaving the client become boundary
//! edges pointing at one remote copy of the neighbour. All normalisation
//! weights use degrees in the retained graph (nodes owned by any client).

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphstore::{CsrMatrix, Graph, Split};
use crate::numkit::{Matrix, Purpose, RngStream};

pub const MIN_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PartitionMode {
    #[default]
    Iid,
    NonIid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSpec {
    pub num_clients: usize,
    /// Mean of the per-client node fraction ξ.
    pub mean_fraction: f64,
    /// Variance of ξ (heterogeneity level).
    pub fraction_variance: f64,
    pub mode: PartitionMode,
    pub noniid_classes_per_client: usize,
    pub seed: u64,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        PartitionSpec {
            num_clients: 4,
            mean_fraction: 0.8,
            fraction_variance: 0.1,
            mode: PartitionMode::Iid,
            noniid_classes_per_client: 2,
            seed: 0,
        }
    }
}

/// Edge from a local node to a node held by another client.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub local: usize,
    pub remote_client: usize,
    pub remote_global: usize,
    pub q: f64,
}

/// A client's view of its partition.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientGraph {
    pub id: usize,
    /// Local id → global id, ascending.
    pub global_ids: Vec<usize>,
    /// Internal normalised adjacency over local ids, self-loops included.
    pub internal: CsrMatrix,
    boundary_ptr: Vec<usize>,
    boundary: Vec<BoundaryEdge>,
    /// d̃ of every referenced remote node.
    pub remote_degree: BTreeMap<usize, usize>,
    /// Global d̃ of every local node.
    pub degree_tilde: Vec<usize>,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub split: Vec<Split>,
    pub num_classes: usize,
}

impl ClientGraph {
    pub fn num_nodes(&self) -> usize {
        self.global_ids.len()
    }

    pub fn local_of(&self, global: usize) -> Option<usize> {
        self.global_ids.binary_search(&global).ok()
    }

    /// Internal neighbours of `v` with their Q weights, including `v` itself.
    pub fn internal_row(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.internal.row(v)
    }

    pub fn internal_degree(&self, v: usize) -> usize {
        self.internal.row_len(v) - 1
    }

    pub fn boundary_of(&self, v: usize) -> &[BoundaryEdge] {
        &self.boundary[self.boundary_ptr[v]..self.boundary_ptr[v + 1]]
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    /// |V_i(v)|: internal plus boundary neighbours (self excluded).
    pub fn neighbor_count(&self, v: usize) -> usize {
        self.internal_degree(v) + self.boundary_of(v).len()
    }

    pub fn self_q(&self, v: usize) -> f64 {
        1.0 / self.degree_tilde[v] as f64
    }

    pub fn nodes_with_split(&self, split: Split) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&v| self.split[v] == split).collect()
    }

    pub fn train_nodes(&self) -> Vec<usize> {
        self.nodes_with_split(Split::Train)
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Copy of this client with every boundary edge removed.
    pub fn without_boundary(&self) -> ClientGraph {
        let mut c = self.clone();
        c.boundary.clear();
        c.boundary_ptr = vec![0; self.num_nodes() + 1];
        c.remote_degree.clear();
        c
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        id: usize,
        global_ids: Vec<usize>,
        internal: CsrMatrix,
        boundary_ptr: Vec<usize>,
        boundary: Vec<BoundaryEdge>,
        remote_degree: BTreeMap<usize, usize>,
        degree_tilde: Vec<usize>,
        features: Matrix,
        labels: Vec<usize>,
        split: Vec<Split>,
        num_classes: usize,
    ) -> Result<ClientGraph> {
        let n = global_ids.len();
        if internal.rows() != n
            || boundary_ptr.len() != n + 1
            || boundary_ptr.last() != Some(&boundary.len())
            || degree_tilde.len() != n
            || features.rows() != n
            || labels.len() != n
            || split.len() != n
        {
            return Err(Error::Format(format!("inconsistent client {id} sections")));
        }
        Ok(ClientGraph {
            id,
            global_ids,
            internal,
            boundary_ptr,
            boundary,
            remote_degree,
            degree_tilde,
            features,
            labels,
            split,
            num_classes,
        })
    }

    pub(crate) fn boundary_ptr(&self) -> &[usize] {
        &self.boundary_ptr
    }
}

/// The full set of clients plus the retained global node set.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub num_global_nodes: usize,
    /// Global ids owned by at least one client, ascending.
    pub retained: Vec<usize>,
    pub clients: Vec<ClientGraph>,
}

impl Partition {
    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    /// Graph over the retained nodes; this is where the server evaluates.
    pub fn evaluation_graph(&self, g: &Graph) -> Graph {
        g.induced_subgraph(&self.retained)
    }

    pub fn feature_dim(&self) -> usize {
        self.clients.first().map_or(0, |c| c.feature_dim())
    }

    pub fn num_classes(&self) -> usize {
        self.clients.first().map_or(0, |c| c.num_classes)
    }
}

/// Draws per-client node sets from `spec` and builds the clients.
pub fn partition(g: &Graph, spec: &PartitionSpec) -> Result<Partition> {
    if spec.num_clients == 0 {
        return Err(Error::Partition("num_clients must be at least 1".into()));
    }
    if spec.mode == PartitionMode::NonIid
        && (spec.noniid_classes_per_client == 0 || spec.noniid_classes_per_client > g.num_classes)
    {
        return Err(Error::Partition(format!(
            "noniid_classes_per_client = {} with {} classes",
            spec.noniid_classes_per_client, g.num_classes
        )));
    }
    let n = g.num_nodes();
    let std = spec.fraction_variance.max(0.0).sqrt();
    let mut sets = Vec::with_capacity(spec.num_clients);
    for i in 0..spec.num_clients {
        let mut rng = RngStream::derive(spec.seed, Purpose::Partition, i as u64);
        let xi = (spec.mean_fraction + std * rng.normal()).clamp(MIN_FRACTION, 1.0);
        let eligible: Vec<usize> = match spec.mode {
            PartitionMode::Iid => (0..n).collect(),
            PartitionMode::NonIid => {
                let classes = rng.sample_indices(g.num_classes, spec.noniid_classes_per_client);
                (0..n)
                    .filter(|&v| !g.labeled[v] || classes.contains(&g.labels[v]))
                    .collect()
            }
        };
        let take = ((xi * eligible.len() as f64).ceil() as usize).min(eligible.len());
        let mut picked: Vec<usize> = rng
            .sample_indices(eligible.len(), take)
            .into_iter()
            .map(|k| eligible[k])
            .collect();
        picked.sort_unstable();
        sets.push(picked);
    }
    partition_with_assignment(g, sets)
}

/// Builds clients from explicit node sets (one per client).
pub fn partition_with_assignment(g: &Graph, sets: Vec<Vec<usize>>) -> Result<Partition> {
    let n = g.num_nodes();
    let num_clients = sets.len();
    if num_clients == 0 {
        return Err(Error::Partition("num_clients must be at least 1".into()));
    }
    let mut owners: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sets = sets;
    for (i, set) in sets.iter_mut().enumerate() {
        set.sort_unstable();
        set.dedup();
        for &v in set.iter() {
            if v >= n {
                return Err(Error::Partition(format!("client {i} references node {v} ≥ {n}")));
            }
            owners[v].push(i);
        }
    }
    let retained: Vec<usize> = (0..n).filter(|&v| !owners[v].is_empty()).collect();
    // d̃ over the retained graph.
    let dt: Vec<usize> = (0..n)
        .map(|v| {
            if owners[v].is_empty() {
                0
            } else {
                1 + g.neighbors(v).iter().filter(|&&u| !owners[u].is_empty()).count()
            }
        })
        .collect();
    let q = |a: usize, b: usize| 1.0 / ((dt[a] * dt[b]) as f64).sqrt();

    let mut clients = Vec::with_capacity(num_clients);
    for (i, set) in sets.into_iter().enumerate() {
        let local: HashMap<usize, usize> = set.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let mut rows = Vec::with_capacity(set.len());
        let mut boundary_ptr = Vec::with_capacity(set.len() + 1);
        boundary_ptr.push(0);
        let mut boundary = Vec::new();
        let mut remote_degree = BTreeMap::new();
        for (lv, &v) in set.iter().enumerate() {
            let mut row = vec![(lv, q(v, v))];
            for &u in g.neighbors(v) {
                if owners[u].is_empty() {
                    continue;
                }
                if let Some(&lu) = local.get(&u) {
                    row.push((lu, q(v, u)));
                } else {
                    let j = pair_owner(&owners[v], &owners[u], i);
                    boundary.push(BoundaryEdge {
                        local: lv,
                        remote_client: j,
                        remote_global: u,
                        q: q(v, u),
                    });
                    remote_degree.insert(u, dt[u]);
                }
            }
            row.sort_by_key(|&(c, _)| c);
            rows.push(row);
            boundary_ptr.push(boundary.len());
        }
        let internal = CsrMatrix::from_rows(set.len(), rows)?;
        let client = ClientGraph {
            id: i,
            degree_tilde: set.iter().map(|&v| dt[v]).collect(),
            features: g.features.select_rows(&set),
            labels: set.iter().map(|&v| g.labels[v]).collect(),
            split: set.iter().map(|&v| g.split[v]).collect(),
            num_classes: g.num_classes,
            global_ids: set,
            internal,
            boundary_ptr,
            boundary,
            remote_degree,
        };
        if client.train_nodes().is_empty() {
            return Err(Error::Partition(format!(
                "client {i} holds no labelled training nodes; retry with another seed"
            )));
        }
        clients.push(client);
    }
    Ok(Partition {
        num_global_nodes: n,
        retained,
        clients,
    })
}

/// Chooses which remote copy of `u` client `me` (owning `v`, not `u`) links
/// to. Clients that own `v` but not `u` are paired rank-by-rank with
/// clients that own `u` but not `v`, so the choice is mutual whenever both
/// sides have the same number of copies (always true without overlap).
fn pair_owner(owners_v: &[usize], owners_u: &[usize], me: usize) -> usize {
    let side_v: Vec<usize> = owners_v.iter().copied().filter(|c| !owners_u.contains(c)).collect();
    let side_u: Vec<usize> = owners_u.iter().copied().filter(|c| !owners_v.contains(c)).collect();
    let rank = side_v.iter().position(|&c| c == me).expect("caller owns v but not u");
    if side_u.is_empty() {
        owners_u[rank % owners_u.len()]
    } else {
        side_u[rank % side_u.len()]
    }
}
