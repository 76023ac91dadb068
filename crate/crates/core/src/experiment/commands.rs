use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};

use crate::ddpg::{reward, train_controller, write_controller, ActionCodec, ControllerEnv, DdpgAgent, RewardConfig};
use crate::error::{Error, Result};
use crate::experiment::{DataSource, RunConfig, RunMode};
use crate::federation::{
    EvalSet, FedSetup, Federation, MetricsWriter, ReturnsWriter, RoundRecord, ServerState,
};
use crate::gcn::{read_weights, write_weights, GcnWeights};
use crate::graphstore::{
    load_citation_graph, partition, read_partition, synth_sbm, write_partition, Graph, Partition, PartitionSpec,
    Split,
};
use crate::sampler::SamplingPolicy;

/// How many fresh partition seeds to try when a client ends up without
/// training nodes.
pub const PARTITION_ATTEMPTS: u64 = 8;

pub fn load_graph(cfg: &RunConfig) -> Result<Graph> {
    let mut g = match &cfg.data {
        DataSource::Citation { node_file, edge_file } => load_citation_graph(node_file, edge_file)?,
        DataSource::Sbm(spec) => synth_sbm(spec)?,
    };
    g.assign_splits(cfg.split, cfg.seeds.partition);
    Ok(g)
}

/// Partitions `g`, moving to the next seed when a draw leaves some client
/// without training nodes.
pub fn build_partition(g: &Graph, spec: &PartitionSpec) -> Result<Partition> {
    let mut last = None;
    for attempt in 0..PARTITION_ATTEMPTS {
        let s = PartitionSpec {
            seed: spec.seed.wrapping_add(attempt * 0x1000_0000),
            ..spec.clone()
        };
        match partition(g, &s) {
            Ok(p) => return Ok(p),
            Err(Error::Partition(msg)) => {
                warn!("partition attempt {attempt} failed: {msg}");
                last = Some(msg);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::Partition(format!(
        "no valid partition after {PARTITION_ATTEMPTS} seeds: {}",
        last.unwrap_or_default()
    )))
}

/// Graph, partition and the server's test set.
pub struct Prepared {
    pub graph: Graph,
    pub partition: Partition,
    pub eval: EvalSet,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let graph = load_graph(cfg)?;
    let partition = match &cfg.run.partition_cache {
        Some(path) => {
            let p = read_partition(&mut BufReader::new(File::open(path)?))?;
            if p.num_global_nodes != graph.num_nodes() || p.num_clients() != cfg.partition.num_clients {
                return Err(Error::Config(format!(
                    "partition cache {} does not match the configured data and client count",
                    path.display()
                )));
            }
            p
        }
        None => build_partition(&graph, &cfg.partition)?,
    };
    let eval = EvalSet::from_graph(&partition.evaluation_graph(&graph), Split::Test)?;
    Ok(Prepared {
        graph,
        partition,
        eval,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientSummary {
    pub id: usize,
    pub nodes: usize,
    pub train: usize,
    pub internal_edges: usize,
    pub boundary_edges: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSummary {
    pub clients: Vec<ClientSummary>,
    pub retained: usize,
    /// Internal plus boundary degree equals retained degree at every node.
    pub degree_conserved: bool,
}

impl std::fmt::Display for PartitionSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "client,nodes,train,internal_edges,boundary_edges")?;
        for c in &self.clients {
            writeln!(f, "{},{},{},{},{}", c.id, c.nodes, c.train, c.internal_edges, c.boundary_edges)?;
        }
        write!(
            f,
            "retained nodes: {}; degree conservation: {}",
            self.retained,
            if self.degree_conserved { "ok" } else { "VIOLATED" }
        )
    }
}

pub fn summarize(p: &Partition) -> PartitionSummary {
    let clients = p
        .clients
        .iter()
        .map(|c| ClientSummary {
            id: c.id,
            nodes: c.num_nodes(),
            train: c.train_nodes().len(),
            internal_edges: (0..c.num_nodes()).map(|v| c.internal_degree(v)).sum::<usize>() / 2,
            boundary_edges: c.boundary_edges().len(),
        })
        .collect();
    let degree_conserved = p
        .clients
        .iter()
        .all(|c| (0..c.num_nodes()).all(|v| c.neighbor_count(v) + 1 == c.degree_tilde[v]));
    PartitionSummary {
        clients,
        retained: p.retained.len(),
        degree_conserved,
    }
}

/// Writes the partition cache to `out` and returns its summary.
pub fn cmd_partition(cfg: &RunConfig, out: &Path) -> Result<PartitionSummary> {
    cfg.validate()?;
    let g = load_graph(cfg)?;
    let p = build_partition(&g, &cfg.partition)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(out)?);
    write_partition(&p, &mut w)?;
    w.flush()?;
    Ok(summarize(&p))
}

pub fn fed_setup(cfg: &RunConfig, mode: RunMode) -> FedSetup {
    let (sampler, scope) = cfg.sampler(mode);
    FedSetup {
        train: cfg.train.clone(),
        sampler,
        scope,
        exchange: cfg.run.exchange,
        clock: cfg.clock,
        seed: cfg.seeds.training,
        workers: cfg.run.workers,
    }
}

/// Runs `rounds` rounds of a fixed-policy or baseline mode, handing every
/// record to `on_record`.
pub fn run_fixed(
    cfg: &RunConfig,
    prepared: &Prepared,
    mode: RunMode,
    rounds: usize,
    mut on_record: impl FnMut(&RoundRecord) -> Result<()>,
) -> Result<ServerState> {
    if mode == RunMode::FedgraphDdpg {
        return Err(Error::Config("the controller mode is run by train-drl".into()));
    }
    let mut fed = Federation::new(&prepared.partition, prepared.eval.clone(), fed_setup(cfg, mode))?;
    let mut state = fed.start_episode(0, cfg.policies())?;
    for _ in 0..rounds {
        let rec = fed.run_round(&mut state)?;
        on_record(&rec)?;
    }
    Ok(state)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub records: Vec<RoundRecord>,
    pub weights: GcnWeights,
    pub metrics: PathBuf,
    pub checkpoint: PathBuf,
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.run.out_dir)?;
    Ok(cfg.run.out_dir.clone())
}

/// Fixed-policy or baseline training: `metrics.csv` plus `weights.bin`.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let prepared = prepare(cfg)?;
    let dir = out_dir(cfg)?;
    let metrics = dir.join("metrics.csv");
    let mut writer = MetricsWriter::new(BufWriter::new(File::create(&metrics)?))?;
    let mut records = Vec::new();
    let result = run_fixed(cfg, &prepared, cfg.run.mode, cfg.run.rounds, |r| {
        info!("round {}: λ={:.4} δ={:.1}", r.round, r.lambda, r.delta);
        writer.write(r)?;
        records.push(r.clone());
        Ok(())
    });
    writer.flush()?;
    let state = result?;
    let checkpoint = dir.join("weights.bin");
    let mut w = BufWriter::new(File::create(&checkpoint)?);
    write_weights(&state.weights, &mut w)?;
    w.flush()?;
    Ok(TrainOutcome {
        records,
        weights: state.weights,
        metrics,
        checkpoint,
    })
}

/// A federation seen as a controller environment. Rounds are numbered
/// globally across episodes.
pub struct FedEnv<'f, 'p> {
    pub fed: &'f mut Federation<'p>,
    pub codec: ActionCodec,
    pub reward: RewardConfig,
    pub initial: Vec<SamplingPolicy>,
    state: Option<ServerState>,
    global_round: usize,
    on_record: Box<dyn FnMut(&RoundRecord) -> Result<()> + 'f>,
}

impl<'f, 'p> FedEnv<'f, 'p> {
    pub fn new(
        fed: &'f mut Federation<'p>,
        codec: ActionCodec,
        reward: RewardConfig,
        initial: Vec<SamplingPolicy>,
        on_record: impl FnMut(&RoundRecord) -> Result<()> + 'f,
    ) -> Self {
        FedEnv {
            fed,
            codec,
            reward,
            initial,
            state: None,
            global_round: 0,
            on_record: Box::new(on_record),
        }
    }

    pub fn state(&self) -> Option<&ServerState> {
        self.state.as_ref()
    }
}

impl ControllerEnv for FedEnv<'_, '_> {
    fn reset(&mut self, episode: usize) -> Result<Vec<f64>> {
        let state = self.fed.start_episode(episode as u64, self.initial.clone())?;
        let obs = self.fed.observed_weights(&state);
        self.state = Some(state);
        Ok(obs)
    }

    fn step(&mut self, action: &[f64]) -> Result<(f64, Vec<f64>)> {
        let state = self
            .state
            .as_mut()
            .ok_or_else(|| Error::State("environment stepped before reset".into()))?;
        state.policies = self.codec.decode(action)?;
        let mut rec = self.fed.run_round(state)?;
        self.reward.calibrate(rec.delta);
        let r = reward(rec.lambda, rec.delta, &self.reward);
        rec.reward = Some(r);
        rec.round = self.global_round;
        self.global_round += 1;
        if let Some(last) = state.history.last_mut() {
            last.reward = Some(r);
        }
        (self.on_record)(&rec)?;
        Ok((r, self.fed.observed_weights(state)))
    }
}

#[derive(Debug, Clone)]
pub struct DrlOutcome {
    pub returns: Vec<f64>,
    pub records: Vec<RoundRecord>,
    pub metrics: PathBuf,
    pub returns_csv: PathBuf,
    pub checkpoint: PathBuf,
}

/// Trains the controller online: `metrics.csv`, `returns.csv`,
/// `controller.bin` and the final model in `weights.bin`.
pub fn cmd_train_drl(cfg: &RunConfig) -> Result<DrlOutcome> {
    cfg.validate()?;
    let prepared = prepare(cfg)?;
    let dir = out_dir(cfg)?;
    let metrics = dir.join("metrics.csv");
    let returns_csv = dir.join("returns.csv");
    let codec = cfg.codec();
    let mut agent = DdpgAgent::new(
        crate::ddpg::DdpgConfig {
            seed: cfg.seeds.controller,
            ..cfg.ddpg.clone()
        },
        codec.dim(),
        cfg.reward.gamma,
    )?;
    let mut fed = Federation::new(&prepared.partition, prepared.eval.clone(), fed_setup(cfg, RunMode::FedgraphDdpg))?;
    let mut writer = MetricsWriter::new(BufWriter::new(File::create(&metrics)?))?;
    let mut records = Vec::new();
    let (returns, final_weights) = {
        let mut env = FedEnv::new(&mut fed, codec, cfg.reward, cfg.policies(), |r| {
            writer.write(r)?;
            records.push(r.clone());
            Ok(())
        });
        let returns = train_controller(&mut env, &mut agent);
        let weights = env.state().map(|s| s.weights.clone());
        (returns, weights)
    };
    writer.flush()?;
    let returns = returns?;
    let mut rw = ReturnsWriter::new(BufWriter::new(File::create(&returns_csv)?))?;
    for (ep, r) in returns.iter().enumerate() {
        rw.write(ep, *r)?;
    }
    rw.flush()?;
    let checkpoint = dir.join("controller.bin");
    let mut w = BufWriter::new(File::create(&checkpoint)?);
    write_controller(&agent, &mut w)?;
    w.flush()?;
    if let Some(weights) = final_weights {
        let mut w = BufWriter::new(File::create(dir.join("weights.bin"))?);
        write_weights(&weights, &mut w)?;
        w.flush()?;
    }
    Ok(DrlOutcome {
        returns,
        records,
        metrics,
        returns_csv,
        checkpoint,
    })
}

/// Test accuracy of a weight checkpoint on the configured data.
pub fn cmd_eval(cfg: &RunConfig, checkpoint: &Path) -> Result<f64> {
    cfg.validate()?;
    let w = read_weights(&mut BufReader::new(File::open(checkpoint)?))?;
    let prepared = prepare(cfg)?;
    if w.dims().first() != Some(&prepared.eval.features.cols()) {
        return Err(Error::Config(format!(
            "checkpoint expects {} features, data has {}",
            w.dims()[0],
            prepared.eval.features.cols()
        )));
    }
    prepared.eval.accuracy(&w)
}

/// One cell of the benchmark matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub mode: RunMode,
    pub variance: f64,
    /// Simulated time to first reach the target, per seed (`None` if never).
    pub times: Vec<Option<f64>>,
    pub median: Option<f64>,
    pub final_lambda: f64,
}

/// Median with unreached runs counted as +∞.
pub fn median_time(times: &[Option<f64>]) -> Option<f64> {
    let mut v: Vec<f64> = times.iter().map(|t| t.unwrap_or(f64::INFINITY)).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = if v.len() % 2 == 1 {
        v[v.len() / 2]
    } else {
        (v[v.len() / 2 - 1] + v[v.len() / 2]) / 2.0
    };
    m.is_finite().then_some(m)
}

/// Cumulative δ until λ first reaches `target`.
pub fn time_to_target(records: &[RoundRecord], target: f64) -> Option<f64> {
    let mut t = 0.0;
    for r in records {
        t += r.delta;
        if r.lambda >= target {
            return Some(t);
        }
    }
    None
}

/// Time-to-accuracy for every (mode, variance) pair over `bench.seeds`
/// seeds. Rows are sorted by mode name, then variance.
pub fn cmd_bench(cfg: &RunConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    if cfg.bench.seeds == 0 {
        return Err(Error::Config("bench needs at least one seed".into()));
    }
    let mut rows = Vec::new();
    for &mode in &cfg.bench.modes {
        for &variance in &cfg.bench.variances {
            let mut times = Vec::new();
            let mut lambdas = Vec::new();
            for s in 0..cfg.bench.seeds as u64 {
                let mut c = cfg.clone();
                c.reseed(cfg.seeds.partition.wrapping_add(s));
                c.partition.fraction_variance = variance;
                c.run.partition_cache = None;
                let prepared = prepare(&c)?;
                let mut records = Vec::new();
                run_fixed(&c, &prepared, mode, c.run.rounds, |r| {
                    records.push(r.clone());
                    Ok(())
                })?;
                times.push(time_to_target(&records, c.bench.target));
                lambdas.push(records.last().map_or(0.0, |r| r.lambda));
            }
            info!("bench {} variance {variance}: {:?}", mode.name(), times);
            rows.push(BenchRow {
                mode,
                variance,
                median: median_time(&times),
                final_lambda: lambdas.iter().sum::<f64>() / lambdas.len() as f64,
                times,
            });
        }
    }
    rows.sort_by(|a, b| a.mode.name().cmp(b.mode.name()).then(a.variance.total_cmp(&b.variance)));
    Ok(rows)
}

pub fn write_bench(rows: &[BenchRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sampler", "variance", "seeds", "reached", "median_time_to_target", "mean_final_lambda"])?;
    for r in rows {
        w.write_record([
            r.mode.name().to_string(),
            r.variance.to_string(),
            r.times.len().to_string(),
            r.times.iter().filter(|t| t.is_some()).count().to_string(),
            r.median.map_or_else(|| "inf".to_string(), |m| m.to_string()),
            r.final_lambda.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
