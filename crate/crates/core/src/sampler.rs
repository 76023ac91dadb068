//! Sampled computation graphs.
//!
//! A [`LayerPlan`] fixes, for one training iteration, which nodes take part
//! at every GCN layer and the (re-weighted) adjacency blocks that connect
//! consecutive layers. [`model_construct`] is the policy-driven sampler;
//! [`full_batch_plan`], [`nodewise_plan`] and [`layerwise_plan`] are the
//! comparison baselines.
//!
//! Layer numbering is 1-based as in the model: `V^(1)` holds the input
//! layer, `V^(L)` the mini-batch. Block `Q̃^(l)` maps layer `l` (columns)
//! to layer `l+1` (rows); rows exist only for local nodes because remote
//! nodes are never expanded, their embeddings arrive from the owning client.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphstore::ClientGraph;
use crate::numkit::RngStream;

/// Per-client sampling policy: mini-batch size and one neighbour selection
/// probability per convolution (`probs[l-1]` is used for block `l`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPolicy {
    pub kappa: usize,
    pub probs: Vec<f64>,
}

impl SamplingPolicy {
    pub fn new(kappa: usize, probs: Vec<f64>) -> Self {
        SamplingPolicy { kappa, probs }
    }

    /// Checks the policy against a model with `layers` node layers.
    pub fn validate(&self, layers: usize) -> Result<()> {
        if self.kappa == 0 {
            return Err(Error::Sampling("mini-batch size κ must be at least 1".into()));
        }
        if self.probs.len() + 1 != layers {
            return Err(Error::Sampling(format!(
                "{} probabilities for a {layers}-layer model",
                self.probs.len()
            )));
        }
        if let Some(p) = self.probs.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::Sampling(format!("selection probability {p} outside (0, 1]")));
        }
        Ok(())
    }
}

/// Which layers may reference nodes held by other clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ExchangeScope {
    /// Remote neighbours from layer 2 on (the privacy-preserving default).
    #[default]
    Share,
    /// Boundary edges are ignored entirely.
    NonShare,
    /// Remote neighbours from layer 1 on. Ships raw-feature products;
    /// only for ablation runs.
    AllShare,
}

impl ExchangeScope {
    pub fn allows_remote_at(self, layer: usize) -> bool {
        match self {
            ExchangeScope::Share => layer >= 2,
            ExchangeScope::NonShare => false,
            ExchangeScope::AllShare => layer >= 1,
        }
    }

    pub fn first_remote_layer(self) -> Option<usize> {
        match self {
            ExchangeScope::Share => Some(2),
            ExchangeScope::NonShare => None,
            ExchangeScope::AllShare => Some(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RemoteRef {
    pub client: usize,
    pub global: usize,
}

/// Column reference inside an adjacency block: a position in the lower
/// layer's local or remote list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Col {
    Local(usize),
    Remote(usize),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeSet {
    pub local: Vec<usize>,
    pub remote: Vec<RemoteRef>,
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.local.len() + self.remote.len()
    }

    pub fn is_empty(&self) -> bool {
        self.local.is_empty() && self.remote.is_empty()
    }
}

/// Sparse block with rows indexed by the upper layer's local nodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdjBlock {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<Col>,
    pub vals: Vec<f64>,
}

impl AdjBlock {
    pub fn rows(&self) -> usize {
        self.row_ptr.len().saturating_sub(1)
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (Col, f64)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[s..e].iter().copied().zip(self.vals[s..e].iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerPlan {
    /// `nodes[l-1]` is `V^(l)`.
    pub nodes: Vec<NodeSet>,
    /// `blocks[l-1]` is `Q̃^(l)`.
    pub blocks: Vec<AdjBlock>,
}

impl LayerPlan {
    pub fn num_layers(&self) -> usize {
        self.nodes.len()
    }

    pub fn layer(&self, l: usize) -> &NodeSet {
        &self.nodes[l - 1]
    }

    pub fn block(&self, l: usize) -> &AdjBlock {
        &self.blocks[l - 1]
    }

    /// Mini-batch (local ids of `V^(L)`).
    pub fn batch(&self) -> &[usize] {
        &self.nodes.last().expect("plan has layers").local
    }

    /// Non-zeros over all blocks.
    pub fn edges(&self) -> usize {
        self.blocks.iter().map(AdjBlock::nnz).sum()
    }

    /// Number of node slots over all layers.
    pub fn node_count(&self) -> usize {
        self.nodes.iter().map(NodeSet::len).sum()
    }

    /// Remote nodes referenced at layer `l`, grouped by owner.
    pub fn remote_by_owner(&self, l: usize) -> Vec<(usize, Vec<usize>)> {
        let mut grouped: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for r in &self.layer(l).remote {
            grouped.entry(r.client).or_default().push(r.global);
        }
        grouped.into_iter().collect()
    }

    /// Dense `|V^(l+1).local| × (|V^(l).local| + |V^(l).remote|)` view of a
    /// block, locals first. For tests and diagnostics.
    pub fn dense_block(&self, l: usize) -> crate::numkit::Matrix {
        let below = self.layer(l);
        let nl = below.local.len();
        let b = self.block(l);
        let mut m = crate::numkit::Matrix::zeros(b.rows(), below.len());
        for i in 0..b.rows() {
            for (c, v) in b.row(i) {
                let j = match c {
                    Col::Local(j) => j,
                    Col::Remote(j) => nl + j,
                };
                m.set(i, j, m.get(i, j) + v);
            }
        }
        m
    }
}

/// A neighbour candidate of some row node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Target {
    Local(usize),
    Remote(RemoteRef),
}

/// The scoped neighbourhood Ṽ(v) (self included) with Q weights.
pub(crate) fn universe(cg: &ClientGraph, v: usize, layer: usize, scope: ExchangeScope) -> Vec<(Target, f64)> {
    let mut out: Vec<(Target, f64)> = cg.internal_row(v).map(|(u, q)| (Target::Local(u), q)).collect();
    if scope.allows_remote_at(layer) {
        out.extend(cg.boundary_of(v).iter().map(|e| {
            (
                Target::Remote(RemoteRef {
                    client: e.remote_client,
                    global: e.remote_global,
                }),
                e.q,
            )
        }));
    }
    out
}

/// Accumulates one layer's node set in first-seen order.
#[derive(Default)]
struct LayerCollector {
    set: NodeSet,
    local_pos: HashMap<usize, usize>,
    remote_pos: HashMap<RemoteRef, usize>,
}

impl LayerCollector {
    fn col(&mut self, t: Target) -> Col {
        match t {
            Target::Local(u) => {
                let next = self.set.local.len();
                let pos = *self.local_pos.entry(u).or_insert(next);
                if pos == next {
                    self.set.local.push(u);
                }
                Col::Local(pos)
            }
            Target::Remote(r) => {
                let next = self.set.remote.len();
                let pos = *self.remote_pos.entry(r).or_insert(next);
                if pos == next {
                    self.set.remote.push(r);
                }
                Col::Remote(pos)
            }
        }
    }
}

fn draw_batch(cg: &ClientGraph, kappa: usize, rng: Option<&mut RngStream>) -> Result<Vec<usize>> {
    let train = cg.train_nodes();
    if train.is_empty() {
        return Err(Error::Sampling(format!("client {} has no labelled training nodes", cg.id)));
    }
    let mut batch = match rng {
        Some(rng) if kappa < train.len() => rng.sample_indices(train.len(), kappa).into_iter().map(|k| train[k]).collect(),
        _ => train,
    };
    batch.sort_unstable();
    Ok(batch)
}

/// Shared backward construction: `select` returns, for row node `v` at
/// layer `l`, the chosen `(target, weight)` entries.
fn build_plan(
    layers: usize,
    batch: Vec<usize>,
    mut select: impl FnMut(usize, usize) -> Vec<(Target, f64)>,
) -> LayerPlan {
    let mut nodes = vec![NodeSet::default(); layers];
    let mut blocks = vec![AdjBlock::default(); layers - 1];
    nodes[layers - 1].local = batch;
    for l in (1..layers).rev() {
        let mut collector = LayerCollector::default();
        let mut block = AdjBlock {
            row_ptr: vec![0],
            ..Default::default()
        };
        for &v in &nodes[l].local {
            for (t, w) in select(v, l) {
                block.cols.push(collector.col(t));
                block.vals.push(w);
            }
            block.row_ptr.push(block.cols.len());
        }
        nodes[l - 1] = collector.set;
        blocks[l - 1] = block;
    }
    LayerPlan { nodes, blocks }
}

/// Policy-driven sampler. The mini-batch is `κ` training nodes drawn
/// uniformly without replacement; then, from the top layer down, every
/// local node `v` keeps each member of its scoped neighbourhood Ṽ(v)
/// (itself included) independently with probability `p^(l)`. An empty draw
/// keeps one member chosen uniformly. Kept entries are scaled by
/// `|Ṽ(v)| / |N(v)|`, which makes `Σ_u Q̃(v,u)h(u)` an unbiased estimate of
/// `Σ_u Q(v,u)h(u)`.
pub fn model_construct(
    cg: &ClientGraph,
    policy: &SamplingPolicy,
    scope: ExchangeScope,
    rng: &mut RngStream,
) -> Result<LayerPlan> {
    let layers = policy.probs.len() + 1;
    policy.validate(layers)?;
    let batch = draw_batch(cg, policy.kappa, Some(rng))?;
    Ok(build_plan(layers, batch, |v, l| {
        let cand = universe(cg, v, l, scope);
        let p = policy.probs[l - 1];
        let mut kept: Vec<(Target, f64)> = cand.iter().copied().filter(|_| rng.bernoulli(p)).collect();
        if kept.is_empty() {
            kept.push(cand[rng.below(cand.len())]);
        }
        let scale = cand.len() as f64 / kept.len() as f64;
        kept.into_iter().map(|(t, q)| (t, scale * q)).collect()
    }))
}

/// Every training node in the batch and every neighbour at every layer.
/// Consumes no randomness.
pub fn full_batch_plan(cg: &ClientGraph, layers: usize, scope: ExchangeScope) -> Result<LayerPlan> {
    if layers < 2 {
        return Err(Error::Sampling("a plan needs at least 2 layers".into()));
    }
    let batch = draw_batch(cg, usize::MAX, None)?;
    Ok(build_plan(layers, batch, |v, l| universe(cg, v, l, scope)))
}

/// Fixed-fanout neighbour sampling. `fanouts[0]` applies to the block
/// feeding the output layer, `fanouts[1]` to the one below, and so on.
/// Each node keeps `min(fanout, |Ṽ(v)|)` members of Ṽ(v) uniformly without
/// replacement, scaled by `|Ṽ(v)| / |N(v)|`.
pub fn nodewise_plan(
    cg: &ClientGraph,
    kappa: usize,
    fanouts: &[usize],
    scope: ExchangeScope,
    rng: &mut RngStream,
) -> Result<LayerPlan> {
    if fanouts.is_empty() || fanouts.contains(&0) {
        return Err(Error::Sampling("fanouts must be non-empty and positive".into()));
    }
    if kappa == 0 {
        return Err(Error::Sampling("mini-batch size κ must be at least 1".into()));
    }
    let layers = fanouts.len() + 1;
    let batch = draw_batch(cg, kappa, Some(rng))?;
    Ok(build_plan(layers, batch, |v, l| {
        let cand = universe(cg, v, l, scope);
        let fanout = fanouts[layers - 1 - l];
        if fanout >= cand.len() {
            return cand;
        }
        let scale = cand.len() as f64 / fanout as f64;
        let mut idx = rng.sample_indices(cand.len(), fanout);
        idx.sort_unstable();
        idx.into_iter().map(|k| (cand[k].0, scale * cand[k].1)).collect()
    }))
}

/// Layer-wise importance sampling. Each layer independently draws
/// `layer_size` nodes with replacement, with probability `q(u) ∝ d̃(u)`,
/// from all local nodes (plus boundary nodes where the scope allows).
/// A drawn node `u` linked to row `v` gets weight
/// `count(u) · Q(v,u) / (layer_size · q(u))`; drawn nodes without links to
/// the layer above still occupy a slot.
pub fn layerwise_plan(
    cg: &ClientGraph,
    kappa: usize,
    layer_size: usize,
    layers: usize,
    scope: ExchangeScope,
    rng: &mut RngStream,
) -> Result<LayerPlan> {
    if layer_size == 0 {
        return Err(Error::Sampling("layer size must be at least 1".into()));
    }
    if layers < 2 {
        return Err(Error::Sampling("a plan needs at least 2 layers".into()));
    }
    if kappa == 0 {
        return Err(Error::Sampling("mini-batch size κ must be at least 1".into()));
    }
    let batch = draw_batch(cg, kappa, Some(rng))?;

    let mut nodes = vec![NodeSet::default(); layers];
    let mut blocks = vec![AdjBlock::default(); layers - 1];
    nodes[layers - 1].local = batch;
    for l in (1..layers).rev() {
        let pool = importance_pool(cg, l, scope);
        let total: f64 = pool.iter().map(|&(_, d)| d).sum();
        let cumulative: Vec<f64> = pool
            .iter()
            .scan(0.0, |acc, &(_, d)| {
                *acc += d;
                Some(*acc)
            })
            .collect();
        let mut counts: HashMap<usize, usize> = HashMap::new();
        let mut order = Vec::new();
        for _ in 0..layer_size {
            let k = rng.weighted_index(&cumulative);
            let c = counts.entry(k).or_insert(0);
            if *c == 0 {
                order.push(k);
            }
            *c += 1;
        }
        let mut collector = LayerCollector::default();
        let mut pool_col: HashMap<usize, Col> = HashMap::new();
        for &k in &order {
            pool_col.insert(k, collector.col(pool[k].0));
        }
        let pool_index: HashMap<TargetKey, usize> =
            pool.iter().enumerate().map(|(k, (t, _))| (TargetKey::from(*t), k)).collect();
        let mut block = AdjBlock {
            row_ptr: vec![0],
            ..Default::default()
        };
        for &v in &nodes[l].local {
            for (t, q) in universe(cg, v, l, scope) {
                let Some(&k) = pool_index.get(&TargetKey::from(t)) else { continue };
                if let Some(&c) = counts.get(&k) {
                    let qu = pool[k].1 / total;
                    block.cols.push(pool_col[&k]);
                    block.vals.push(c as f64 * q / (layer_size as f64 * qu));
                }
            }
            block.row_ptr.push(block.cols.len());
        }
        nodes[l - 1] = collector.set;
        blocks[l - 1] = block;
    }
    Ok(LayerPlan { nodes, blocks })
}

/// How a client builds its per-iteration plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerKind {
    /// Policy-driven Bernoulli sampling ([`model_construct`]).
    #[default]
    ModelConstruct,
    FullBatch,
    NodeWise { fanouts: Vec<usize> },
    LayerWise { layer_size: usize },
}

impl SamplerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::ModelConstruct => "model_construct",
            SamplerKind::FullBatch => "full_batch",
            SamplerKind::NodeWise { .. } => "node_wise",
            SamplerKind::LayerWise { .. } => "layer_wise",
        }
    }
}

/// Dispatches to the sampler named by `kind`. Baselines take κ from the
/// policy and ignore its probabilities.
pub fn make_plan(
    kind: &SamplerKind,
    cg: &ClientGraph,
    policy: &SamplingPolicy,
    scope: ExchangeScope,
    rng: &mut RngStream,
) -> Result<LayerPlan> {
    let layers = policy.probs.len() + 1;
    match kind {
        SamplerKind::ModelConstruct => model_construct(cg, policy, scope, rng),
        SamplerKind::FullBatch => full_batch_plan(cg, layers, scope),
        SamplerKind::NodeWise { fanouts } => {
            if fanouts.len() + 1 != layers {
                return Err(Error::Sampling(format!(
                    "{} fanouts for a {layers}-layer model",
                    fanouts.len()
                )));
            }
            nodewise_plan(cg, policy.kappa, fanouts, scope, rng)
        }
        SamplerKind::LayerWise { layer_size } => layerwise_plan(cg, policy.kappa, *layer_size, layers, scope, rng),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum TargetKey {
    Local(usize),
    Remote(RemoteRef),
}

impl From<Target> for TargetKey {
    fn from(t: Target) -> Self {
        match t {
            Target::Local(u) => TargetKey::Local(u),
            Target::Remote(r) => TargetKey::Remote(r),
        }
    }
}

/// Candidate nodes for layer-wise sampling with their d̃ weights.
fn importance_pool(cg: &ClientGraph, layer: usize, scope: ExchangeScope) -> Vec<(Target, f64)> {
    let mut pool: Vec<(Target, f64)> =
        (0..cg.num_nodes()).map(|v| (Target::Local(v), cg.degree_tilde[v] as f64)).collect();
    if scope.allows_remote_at(layer) {
        let mut seen = std::collections::BTreeSet::new();
        for e in cg.boundary_edges() {
            let r = RemoteRef {
                client: e.remote_client,
                global: e.remote_global,
            };
            if seen.insert(r) {
                pool.push((Target::Remote(r), cg.remote_degree[&e.remote_global] as f64));
            }
        }
    }
    pool
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphstore::{partition_with_assignment, Graph, Split};
    use crate::numkit::Matrix;

    /// Star with hub 0 and `leaves` leaves, all nodes in training.
    fn star_client(leaves: usize) -> ClientGraph {
        let n = leaves + 1;
        let edges: Vec<(usize, usize)> = (1..n).map(|u| (0, u)).collect();
        let mut g = Graph::from_edges(n, &edges, Matrix::zeros(n, 1), vec![0; n], 1).unwrap();
        g.split = vec![Split::Train; n];
        partition_with_assignment(&g, vec![(0..n).collect()]).unwrap().clients.remove(0)
    }

    #[test]
    fn policy_validation() {
        assert!(SamplingPolicy::new(0, vec![0.5, 0.5]).validate(3).is_err());
        assert!(SamplingPolicy::new(4, vec![0.5]).validate(3).is_err());
        assert!(SamplingPolicy::new(4, vec![0.0, 0.5]).validate(3).is_err());
        assert!(SamplingPolicy::new(4, vec![1.0, 0.5]).validate(3).is_ok());
    }

    #[test]
    fn p_one_equals_full_batch() {
        let cg = star_client(5);
        let mut rng = RngStream::new(0);
        let plan = model_construct(&cg, &SamplingPolicy::new(100, vec![1.0, 1.0]), ExchangeScope::Share, &mut rng).unwrap();
        let full = full_batch_plan(&cg, 3, ExchangeScope::Share).unwrap();
        assert_eq!(plan, full);
    }

    #[test]
    fn scale_is_universe_over_kept() {
        // Hub of a 3-leaf star has |Ṽ| = 4. Find a draw that keeps exactly 2.
        let cg = star_client(3);
        let mut hub = cg.clone();
        hub.split = vec![Split::Unlabeled; 4];
        hub.split[0] = Split::Train;
        for seed in 0..200 {
            let mut rng = RngStream::new(seed);
            let plan = model_construct(&hub, &SamplingPolicy::new(1, vec![0.5]), ExchangeScope::Share, &mut rng).unwrap();
            let block = plan.block(1);
            if block.nnz() == 2 {
                for (c, v) in block.row(0) {
                    let Col::Local(pos) = c else { panic!("no remote nodes here") };
                    let u = plan.layer(1).local[pos];
                    let q = hub.internal.get(0, u);
                    assert!((v - 2.0 * q).abs() < 1e-15);
                }
                return;
            }
        }
        panic!("no draw kept exactly two members");
    }

    #[test]
    fn no_training_nodes() {
        let mut cg = star_client(2);
        cg.split = vec![Split::Test; 3];
        let mut rng = RngStream::new(0);
        assert!(model_construct(&cg, &SamplingPolicy::new(1, vec![0.5]), ExchangeScope::Share, &mut rng).is_err());
    }

    #[test]
    fn batch_size_is_min_kappa_available() {
        let cg = star_client(9);
        let mut rng = RngStream::new(1);
        let plan = model_construct(&cg, &SamplingPolicy::new(4, vec![0.5, 0.5]), ExchangeScope::Share, &mut rng).unwrap();
        assert_eq!(plan.batch().len(), 4);
        let plan = model_construct(&cg, &SamplingPolicy::new(40, vec![0.5, 0.5]), ExchangeScope::Share, &mut rng).unwrap();
        assert_eq!(plan.batch().len(), 10);
    }

    #[test]
    fn nodewise_fanout_scale() {
        let cg = star_client(29);
        let mut hub = cg.clone();
        hub.split = vec![Split::Unlabeled; 30];
        hub.split[0] = Split::Train;
        let mut rng = RngStream::new(2);
        let plan = nodewise_plan(&hub, 1, &[25], ExchangeScope::Share, &mut rng).unwrap();
        let block = plan.block(1);
        assert_eq!(block.nnz(), 25);
        for (c, v) in block.row(0) {
            let Col::Local(pos) = c else { unreachable!() };
            let u = plan.layer(1).local[pos];
            assert!((v - 30.0 / 25.0 * hub.internal.get(0, u)).abs() < 1e-15);
        }
    }

    #[test]
    fn nodewise_large_fanout_is_full_batch() {
        let cg = star_client(6);
        let mut rng = RngStream::new(3);
        let plan = nodewise_plan(&cg, 100, &[25, 10], ExchangeScope::Share, &mut rng).unwrap();
        assert_eq!(plan, full_batch_plan(&cg, 3, ExchangeScope::Share).unwrap());
    }

    #[test]
    fn layerwise_prefers_hub() {
        let cg = star_client(20);
        let mut hub_hits = 0;
        let mut leaf_hits = 0;
        for seed in 0..300 {
            let mut rng = RngStream::new(seed);
            let plan = layerwise_plan(&cg, 1, 3, 2, ExchangeScope::Share, &mut rng).unwrap();
            let sampled = &plan.layer(1).local;
            hub_hits += sampled.contains(&0) as usize;
            leaf_hits += sampled.contains(&1) as usize;
        }
        assert!(hub_hits > 3 * leaf_hits, "hub {hub_hits} vs leaf {leaf_hits}");
    }

    #[test]
    fn layerwise_saturates() {
        // A 6-cycle has uniform degrees; 200 draws cover every node.
        let edges: Vec<(usize, usize)> = (0..6).map(|v| (v, (v + 1) % 6)).collect();
        let mut g = Graph::from_edges(6, &edges, Matrix::zeros(6, 1), vec![0; 6], 1).unwrap();
        g.split = vec![Split::Train; 6];
        let cg = partition_with_assignment(&g, vec![(0..6).collect()]).unwrap().clients.remove(0);
        let mut rng = RngStream::new(4);
        let plan = layerwise_plan(&cg, 6, 200, 3, ExchangeScope::Share, &mut rng).unwrap();
        for l in 1..=2 {
            let mut s = plan.layer(l).local.clone();
            s.sort_unstable();
            assert_eq!(s, (0..6).collect::<Vec<_>>());
        }
    }

    #[test]
    fn layer_one_never_remote_in_share_mode() {
        let edges = [(0, 1), (1, 2), (2, 3)];
        let mut g = Graph::from_edges(4, &edges, Matrix::zeros(4, 1), vec![0; 4], 1).unwrap();
        g.split = vec![Split::Train; 4];
        let p = partition_with_assignment(&g, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let full = full_batch_plan(&p.clients[0], 3, ExchangeScope::Share).unwrap();
        assert!(full.layer(1).remote.is_empty());
        assert_eq!(full.layer(2).remote, vec![RemoteRef { client: 1, global: 2 }]);
        let all = full_batch_plan(&p.clients[0], 3, ExchangeScope::AllShare).unwrap();
        assert!(!all.layer(1).remote.is_empty());
        let none = full_batch_plan(&p.clients[0], 3, ExchangeScope::NonShare).unwrap();
        assert!(none.layer(2).remote.is_empty());
    }
}
