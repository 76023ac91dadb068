use std::time::Instant;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::federation::Broker;
use crate::gcn::{evaluate, GcnWeights, IterStats, LocalTrainer, LocalUpdate, TrainConfig};
use crate::graphstore::{normalized_adjacency, CsrMatrix, Graph, Partition, Split};
use crate::numkit::{Matrix, Purpose, RngStream};
use crate::sampler::{ExchangeScope, SamplerKind, SamplingPolicy};

/// `W̄ = Σ_i (κ_i / Σκ) · W_i`.
pub fn aggregate(weights: &[GcnWeights], kappa: &[usize]) -> Result<GcnWeights> {
    let first = weights
        .first()
        .ok_or_else(|| Error::Precondition("nothing to aggregate".into()))?;
    if weights.len() != kappa.len() {
        return Err(Error::Precondition(format!(
            "{} weight sets but {} batch sizes",
            weights.len(),
            kappa.len()
        )));
    }
    if let Some(bad) = weights.iter().position(|w| !w.same_shape(first)) {
        return Err(Error::shape("aggregate", format!("client {bad} weights differ in shape")));
    }
    let total: usize = kappa.iter().sum();
    if total == 0 {
        return Err(Error::Precondition("total batch size is zero".into()));
    }
    let mut out = GcnWeights::zeros(&first.dims());
    for (w, &k) in weights.iter().zip(kappa) {
        let share = k as f64 / total as f64;
        for (acc, layer) in out.layers.iter_mut().zip(&w.layers) {
            acc.add_scaled(layer, share)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    #[default]
    Simulated,
    Wallclock,
}

/// Round duration model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClockModel {
    pub mode: ClockMode,
    /// Cost per processed adjacency entry.
    pub c1: f64,
    /// Cost per received real.
    pub c2: f64,
}

impl Default for ClockModel {
    fn default() -> Self {
        ClockModel {
            mode: ClockMode::Simulated,
            c1: 1.0,
            c2: 0.01,
        }
    }
}

impl ClockModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 >= 0.0 && self.c2 >= 0.0) {
            return Err(Error::Config(format!("clock costs must be ≥ 0 (c1={}, c2={})", self.c1, self.c2)));
        }
        Ok(())
    }

    /// `max_i (c1·edges_i + c2·values_i)`.
    pub fn simulated(&self, loads: &[(usize, usize)]) -> f64 {
        loads
            .iter()
            .map(|&(e, v)| self.c1 * e as f64 + self.c2 * v as f64)
            .fold(0.0, f64::max)
    }
}

/// When served rows are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ExchangeMode {
    /// Once per round, from the downloaded global weights.
    #[default]
    Stale,
    /// Before every local iteration, from each owner's current weights.
    Sync,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientRoundStats {
    pub client: usize,
    pub loss: f64,
    pub kappa: usize,
    pub nodes: usize,
    pub edges: usize,
    pub values: usize,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub delta: f64,
    pub lambda: f64,
    pub reward: Option<f64>,
    pub clients: Vec<ClientRoundStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    pub weights: GcnWeights,
    pub policies: Vec<SamplingPolicy>,
    pub round: usize,
    pub history: Vec<RoundRecord>,
}

/// The server's held-out evaluation data.
#[derive(Debug, Clone)]
pub struct EvalSet {
    pub adj: CsrMatrix,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub nodes: Vec<usize>,
}

impl EvalSet {
    /// Full-neighbourhood evaluation on `g` over nodes with split `split`.
    pub fn from_graph(g: &Graph, split: Split) -> Result<Self> {
        let nodes = g.nodes_with_split(split);
        if nodes.is_empty() {
            return Err(Error::Precondition(format!("evaluation graph has no {split:?} nodes")));
        }
        Ok(EvalSet {
            adj: normalized_adjacency(g).0,
            features: g.features.clone(),
            labels: g.labels.clone(),
            nodes,
        })
    }

    pub fn accuracy(&self, w: &GcnWeights) -> Result<f64> {
        evaluate(&self.adj, &self.features, &self.labels, w, &self.nodes)
    }
}

/// Static settings of a federated run.
#[derive(Debug, Clone, PartialEq)]
pub struct FedSetup {
    pub train: TrainConfig,
    pub sampler: SamplerKind,
    pub scope: ExchangeScope,
    pub exchange: ExchangeMode,
    pub clock: ClockModel,
    pub seed: u64,
    pub workers: usize,
}

impl Default for FedSetup {
    fn default() -> Self {
        FedSetup {
            train: TrainConfig::default(),
            sampler: SamplerKind::ModelConstruct,
            scope: ExchangeScope::Share,
            exchange: ExchangeMode::Stale,
            clock: ClockModel::default(),
            seed: 0,
            workers: 0,
        }
    }
}

/// Server plus clients plus broker.
pub struct Federation<'a> {
    partition: &'a Partition,
    eval: EvalSet,
    setup: FedSetup,
    dims: Vec<usize>,
    trainers: Vec<LocalTrainer>,
    /// Latest weights reported by each client.
    reported: Vec<GcnWeights>,
    broker: Broker<'a>,
    pool: rayon::ThreadPool,
    episode: u64,
}

impl<'a> Federation<'a> {
    pub fn new(partition: &'a Partition, eval: EvalSet, setup: FedSetup) -> Result<Self> {
        setup.train.validate()?;
        setup.clock.validate()?;
        if partition.clients.is_empty() {
            return Err(Error::Config("a federation needs at least one client".into()));
        }
        if eval.features.cols() != partition.feature_dim() {
            return Err(Error::Config("evaluation features differ in width from client features".into()));
        }
        let dims = setup.train.dims(partition.feature_dim(), partition.num_classes());
        let workers = if setup.workers == 0 { partition.num_clients() } else { setup.workers };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
        let broker = Broker::new(&partition.clients).allow_first_layer(setup.scope == ExchangeScope::AllShare);
        let init = GcnWeights::zeros(&dims);
        let trainers = partition
            .clients
            .iter()
            .map(|c| LocalTrainer::new(c.id, setup.train.clone(), &init))
            .collect();
        Ok(Federation {
            partition,
            eval,
            reported: vec![init; partition.num_clients()],
            setup,
            dims,
            trainers,
            broker,
            pool,
            episode: 0,
        })
    }

    pub fn setup(&self) -> &FedSetup {
        &self.setup
    }

    pub fn broker(&self) -> &Broker<'a> {
        &self.broker
    }

    pub fn eval(&self) -> &EvalSet {
        &self.eval
    }

    pub fn num_clients(&self) -> usize {
        self.partition.num_clients()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn reported(&self) -> &[GcnWeights] {
        &self.reported
    }

    /// Starts episode `episode`: fresh random `W̄`, clients reset to it,
    /// optimizer moments cleared. Controller state is not touched.
    pub fn start_episode(&mut self, episode: u64, policies: Vec<SamplingPolicy>) -> Result<ServerState> {
        if policies.len() != self.num_clients() {
            return Err(Error::Config(format!(
                "{} policies for {} clients",
                policies.len(),
                self.num_clients()
            )));
        }
        for p in &policies {
            p.validate(self.setup.train.layers)?;
        }
        self.episode = episode;
        let mut rng = RngStream::derive(self.setup.seed, Purpose::Init, episode);
        let weights = GcnWeights::glorot(&self.dims, &mut rng);
        for t in &mut self.trainers {
            t.reset(&weights);
        }
        self.reported = vec![weights.clone(); self.num_clients()];
        self.broker.clear();
        Ok(ServerState {
            weights,
            policies,
            round: 0,
            history: Vec::new(),
        })
    }

    /// Flattened `(W̄, W_1, …, W_|C|)`: what the controller observes.
    pub fn observed_weights(&self, state: &ServerState) -> Vec<f64> {
        let mut v = state.weights.flatten();
        for w in &self.reported {
            v.extend(w.flatten());
        }
        v
    }

    fn client_rng(&self, round: usize, client: usize) -> RngStream {
        let episode_seed = self.setup.seed ^ self.episode.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        RngStream::derive(episode_seed, Purpose::Sampling, ((round as u64) << 20) | client as u64)
    }

    /// One global round. On failure nothing is committed: `state`,
    /// client weights and optimizer moments are as before the call.
    pub fn run_round(&mut self, state: &mut ServerState) -> Result<RoundRecord> {
        let round = state.round;
        let snapshot = self.trainers.clone();
        let started = Instant::now();
        let result = self.train_clients(state, round);
        let elapsed = started.elapsed().as_secs_f64();
        let updates = match result {
            Ok(u) => u,
            Err(e) => {
                self.trainers = snapshot;
                warn!("round {round} aborted: {e}");
                return Err(Error::RoundAborted {
                    round,
                    reason: e.to_string(),
                });
            }
        };
        let kappas: Vec<usize> = updates.iter().map(|u| u.batch).collect();
        let new_weights = aggregate(
            &updates.iter().map(|u| u.weights.clone()).collect::<Vec<_>>(),
            &kappas,
        )
        .and_then(|w| {
            if w.is_finite() {
                Ok(w)
            } else {
                Err(Error::Model("aggregated weights are not finite".into()))
            }
        });
        let new_weights = match new_weights {
            Ok(w) => w,
            Err(e) => {
                self.trainers = snapshot;
                return Err(Error::RoundAborted {
                    round,
                    reason: e.to_string(),
                });
            }
        };
        let lambda = self.eval.accuracy(&new_weights)?;
        let delta = match self.setup.clock.mode {
            ClockMode::Simulated => self
                .setup
                .clock
                .simulated(&updates.iter().map(|u| (u.edges, u.values)).collect::<Vec<_>>()),
            ClockMode::Wallclock => elapsed,
        };
        let clients = updates
            .iter()
            .enumerate()
            .map(|(i, u)| ClientRoundStats {
                client: i,
                loss: u.mean_loss(),
                kappa: u.batch,
                nodes: u.nodes,
                edges: u.edges,
                values: u.values,
                bytes: u.bytes,
            })
            .collect();
        self.reported = updates.into_iter().map(|u| u.weights).collect();
        state.weights = new_weights;
        state.round += 1;
        let record = RoundRecord {
            round,
            delta,
            lambda,
            reward: None,
            clients,
        };
        debug!("round {round}: λ={lambda:.4} δ={delta:.1}");
        state.history.push(record.clone());
        Ok(record)
    }

    fn train_clients(&mut self, state: &ServerState, round: usize) -> Result<Vec<LocalUpdate>> {
        let clients = &self.partition.clients;
        let setup = &self.setup;
        let broker = &self.broker;
        let mut rngs: Vec<RngStream> = (0..clients.len()).map(|i| self.client_rng(round, i)).collect();
        let trainers = &mut self.trainers;
        let pool = &self.pool;
        let uses_exchange = setup.scope != ExchangeScope::NonShare;

        for t in trainers.iter_mut() {
            t.begin_round(&state.weights)?;
        }
        let mut updates: Vec<LocalUpdate> = (0..clients.len()).map(|_| LocalUpdate::empty()).collect();
        let step_all = |trainers: &mut [LocalTrainer], rngs: &mut [RngStream]| -> Result<Vec<IterStats>> {
            pool.install(|| {
                trainers
                    .par_iter_mut()
                    .zip(rngs.par_iter_mut())
                    .enumerate()
                    .map(|(i, (t, rng))| {
                        t.step(&clients[i], &state.policies[i], &setup.sampler, setup.scope, broker, rng)
                    })
                    .collect()
            })
        };
        match setup.exchange {
            ExchangeMode::Stale => {
                if uses_exchange {
                    for i in 0..clients.len() {
                        broker.publish(i, round, &state.weights)?;
                    }
                }
                for _ in 0..setup.train.local_iterations {
                    for (u, s) in updates.iter_mut().zip(step_all(trainers, &mut rngs)?) {
                        u.absorb(&s);
                    }
                }
            }
            ExchangeMode::Sync => {
                for _ in 0..setup.train.local_iterations {
                    if uses_exchange {
                        for (i, t) in trainers.iter().enumerate() {
                            broker.publish(i, round, t.weights())?;
                        }
                    }
                    for (u, s) in updates.iter_mut().zip(step_all(trainers, &mut rngs)?) {
                        u.absorb(&s);
                    }
                }
            }
        }
        for (u, t) in updates.iter_mut().zip(trainers.iter()) {
            u.weights = t.weights().clone();
            if setup.train.local_iterations == 0 {
                u.batch = state.policies[t.client].kappa.min(clients[t.client].train_nodes().len());
            }
        }
        Ok(updates)
    }

    /// Runs `rounds` rounds with the current policies.
    pub fn run(&mut self, state: &mut ServerState, rounds: usize) -> Result<Vec<RoundRecord>> {
        (0..rounds).map(|_| self.run_round(state)).collect()
    }
}
