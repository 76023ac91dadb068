use crate::error::{Error, Result};
use crate::federation::EmbeddingShare;
use crate::gcn::{backward, forward, ExternalRows, GcnWeights, TrainConfig};
use crate::graphstore::ClientGraph;
use crate::numkit::{adam_step, softmax_cross_entropy, AdamState, Purpose, RngStream};
use crate::sampler::{make_plan, ExchangeScope, LayerPlan, RemoteRef, SamplerKind, SamplingPolicy};

/// Where a client obtains boundary rows `h_j^(l)(u)·W_j^(l)`.
pub trait EmbeddingSource: Sync {
    fn fetch(&self, requester: usize, owner: usize, layer: usize, ids: &[usize]) -> Result<EmbeddingShare>;
}

/// A source with nothing to offer; any fetch fails.
pub struct NoExchange;

impl EmbeddingSource for NoExchange {
    fn fetch(&self, requester: usize, owner: usize, layer: usize, _ids: &[usize]) -> Result<EmbeddingShare> {
        Err(Error::Exchange(format!(
            "client {requester} asked client {owner} for layer {layer} rows but exchange is disabled"
        )))
    }
}

/// Resource use of one local iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IterStats {
    pub loss: f64,
    pub batch: usize,
    pub nodes: usize,
    pub edges: usize,
    /// Reals received from other clients.
    pub values: usize,
    /// Encoded message bytes received from other clients.
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalUpdate {
    pub weights: GcnWeights,
    pub losses: Vec<f64>,
    pub batch: usize,
    pub nodes: usize,
    pub edges: usize,
    pub values: usize,
    pub bytes: usize,
}

impl LocalUpdate {
    pub fn mean_loss(&self) -> f64 {
        if self.losses.is_empty() {
            f64::NAN
        } else {
            self.losses.iter().sum::<f64>() / self.losses.len() as f64
        }
    }
}

/// Fetches every external row the plan references.
pub fn gather_external(
    plan: &LayerPlan,
    requester: usize,
    source: &dyn EmbeddingSource,
) -> Result<(ExternalRows, usize, usize)> {
    let mut ext = ExternalRows::new();
    let (mut values, mut bytes) = (0, 0);
    for l in 1..plan.num_layers() {
        for (owner, ids) in plan.remote_by_owner(l) {
            let share = source.fetch(requester, owner, l, &ids)?;
            if share.layer != l || share.ids != ids {
                return Err(Error::Exchange(format!(
                    "client {owner} answered layer {} for a layer {l} request",
                    share.layer
                )));
            }
            values += share.rows.len();
            bytes += share.wire_bytes;
            for (k, &u) in share.ids.iter().enumerate() {
                ext.insert(l, RemoteRef { client: owner, global: u }, share.rows.row(k).to_vec());
            }
        }
    }
    Ok((ext, values, bytes))
}

/// One client's training state: current weights plus optimizer moments.
/// Moments persist across rounds and are cleared by [`LocalTrainer::reset`].
#[derive(Debug, Clone)]
pub struct LocalTrainer {
    pub client: usize,
    pub cfg: TrainConfig,
    weights: GcnWeights,
    opt: Vec<AdamState>,
    iterations: u64,
}

impl LocalTrainer {
    pub fn new(client: usize, cfg: TrainConfig, init: &GcnWeights) -> Self {
        let opt = init
            .layers
            .iter()
            .map(|w| AdamState::for_param(cfg.optimizer, cfg.adam_params(), w))
            .collect();
        LocalTrainer {
            client,
            cfg,
            weights: init.clone(),
            opt,
            iterations: 0,
        }
    }

    pub fn weights(&self) -> &GcnWeights {
        &self.weights
    }

    pub fn reset(&mut self, init: &GcnWeights) {
        self.weights = init.clone();
        self.opt.iter_mut().for_each(AdamState::reset);
        self.iterations = 0;
    }

    /// Downloads the global weights.
    pub fn begin_round(&mut self, global: &GcnWeights) -> Result<()> {
        if !global.same_shape(&self.weights) {
            return Err(Error::Model("global weights differ in shape from the local model".into()));
        }
        self.weights = global.clone();
        Ok(())
    }

    /// Plan, fetch, forward, loss, backward, optimizer step.
    pub fn step(
        &mut self,
        cg: &ClientGraph,
        policy: &SamplingPolicy,
        kind: &SamplerKind,
        scope: ExchangeScope,
        source: &dyn EmbeddingSource,
        rng: &mut RngStream,
    ) -> Result<IterStats> {
        let plan = make_plan(kind, cg, policy, scope, rng)?;
        let (ext, values, bytes) = gather_external(&plan, self.client, source)?;
        let mut drop_rng = rng.fork(Purpose::Dropout, self.iterations);
        let (logits, trace) = forward(&plan, cg, &self.weights, &ext, self.cfg.dropout, Some(&mut drop_rng))?;
        let labels: Vec<usize> = plan.batch().iter().map(|&v| cg.labels[v]).collect();
        let (loss, grad) = softmax_cross_entropy(&logits, &labels)?;
        let grads = backward(&trace, &grad)?;
        for ((w, g), st) in self.weights.layers.iter_mut().zip(&grads.layers).zip(&mut self.opt) {
            adam_step(w, g, st)?;
        }
        if !self.weights.is_finite() {
            return Err(Error::Model(format!("client {} weights diverged (loss {loss})", self.client)));
        }
        self.iterations += 1;
        Ok(IterStats {
            loss,
            batch: labels.len(),
            nodes: plan.node_count(),
            edges: plan.edges(),
            values,
            bytes,
        })
    }

    /// A full local round: download `global`, then `cfg.local_iterations`
    /// steps against a fixed source.
    #[allow(clippy::too_many_arguments)]
    pub fn run_round(
        &mut self,
        cg: &ClientGraph,
        global: &GcnWeights,
        policy: &SamplingPolicy,
        kind: &SamplerKind,
        scope: ExchangeScope,
        source: &dyn EmbeddingSource,
        rng: &mut RngStream,
    ) -> Result<LocalUpdate> {
        self.begin_round(global)?;
        let mut out = LocalUpdate::empty();
        for _ in 0..self.cfg.local_iterations {
            let s = self.step(cg, policy, kind, scope, source, rng)?;
            out.absorb(&s);
        }
        out.weights = self.weights.clone();
        Ok(out)
    }
}

impl LocalUpdate {
    pub(crate) fn empty() -> Self {
        LocalUpdate {
            weights: GcnWeights::zeros(&[0, 0]),
            losses: Vec::new(),
            batch: 0,
            nodes: 0,
            edges: 0,
            values: 0,
            bytes: 0,
        }
    }

    pub(crate) fn absorb(&mut self, s: &IterStats) {
        self.losses.push(s.loss);
        self.batch = s.batch;
        self.nodes += s.nodes;
        self.edges += s.edges;
        self.values += s.values;
        self.bytes += s.bytes;
    }
}

/// Algorithm-level local round with a fresh optimizer: `W_i ← W̄`, then
/// `cfg.local_iterations` sampled updates.
#[allow(clippy::too_many_arguments)]
pub fn local_train_round(
    cg: &ClientGraph,
    global: &GcnWeights,
    policy: &SamplingPolicy,
    cfg: &TrainConfig,
    kind: &SamplerKind,
    scope: ExchangeScope,
    source: &dyn EmbeddingSource,
    rng: &mut RngStream,
) -> Result<LocalUpdate> {
    cfg.validate()?;
    if cg.train_nodes().is_empty() {
        return Err(Error::Sampling(format!("client {} has no labelled training nodes", cg.id)));
    }
    LocalTrainer::new(cg.id, cfg.clone(), global).run_round(cg, global, policy, kind, scope, source, rng)
}
