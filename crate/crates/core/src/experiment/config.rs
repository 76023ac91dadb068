use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ddpg::{ActionCodec, DdpgConfig, RewardConfig};
use crate::error::{Error, Result};
use crate::federation::{ClockModel, ExchangeMode};
use crate::gcn::TrainConfig;
use crate::graphstore::{PartitionSpec, SbmSpec, SplitRatios};
use crate::sampler::{ExchangeScope, SamplerKind, SamplingPolicy};

/// Where the graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// `id f_1 … f_d label` node file plus `id id` edge file.
    Citation { node_file: PathBuf, edge_file: PathBuf },
    Sbm(SbmSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    FedgraphFixed,
    FedgraphDdpg,
    FullBatch,
    NodeWise,
    LayerWise,
    Nonshare,
    Allshare,
}

impl RunMode {
    pub const ALL: [RunMode; 7] = [
        RunMode::FedgraphFixed,
        RunMode::FedgraphDdpg,
        RunMode::FullBatch,
        RunMode::NodeWise,
        RunMode::LayerWise,
        RunMode::Nonshare,
        RunMode::Allshare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RunMode::FedgraphFixed => "fedgraph_fixed",
            RunMode::FedgraphDdpg => "fedgraph_ddpg",
            RunMode::FullBatch => "full_batch",
            RunMode::NodeWise => "node_wise",
            RunMode::LayerWise => "layer_wise",
            RunMode::Nonshare => "nonshare",
            RunMode::Allshare => "allshare",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        RunMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = RunMode::ALL.iter().map(|m| m.name()).collect();
                Error::Config(format!("unknown mode '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub mode: RunMode,
    /// Rounds `T` for fixed-policy and baseline runs.
    pub rounds: usize,
    /// Mini-batch size κ for every client.
    pub kappa: usize,
    /// Fixed-policy neighbour probabilities, one per convolution.
    pub probs: Vec<f64>,
    pub fanouts: Vec<usize>,
    pub layer_size: usize,
    pub exchange: ExchangeMode,
    /// Worker threads; 0 means one per client.
    pub workers: usize,
    pub out_dir: PathBuf,
    /// Optional partition cache to load instead of partitioning inline.
    pub partition_cache: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            mode: RunMode::FedgraphFixed,
            rounds: 300,
            kappa: 256,
            probs: vec![0.5, 0.5],
            fanouts: vec![25, 10],
            layer_size: 512,
            exchange: ExchangeMode::Stale,
            workers: 0,
            out_dir: PathBuf::from("out"),
            partition_cache: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub partition: u64,
    pub training: u64,
    pub controller: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            partition: 0,
            training: 1,
            controller: 2,
        }
    }
}

/// Controller settings beyond the network hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    pub kappa_min: usize,
    pub kappa_max: usize,
    pub p_min: f64,
    /// Keep κ at `run.kappa` and let the controller set only the
    /// probabilities.
    pub pin_kappa: bool,
}

impl Default for ControlSection {
    fn default() -> Self {
        ControlSection {
            kappa_min: 32,
            kappa_max: 512,
            p_min: 0.1,
            pin_kappa: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub modes: Vec<RunMode>,
    pub variances: Vec<f64>,
    pub seeds: usize,
    /// Accuracy that stops the clock.
    pub target: f64,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection {
            modes: vec![RunMode::FullBatch],
            variances: vec![0.1, 0.5, 1.0],
            seeds: 5,
            target: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    #[serde(default)]
    pub split: SplitRatios,
    #[serde(default)]
    pub partition: PartitionSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub clock: ClockModel,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub ddpg: DdpgConfig,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub bench: BenchSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config; relative paths in it are resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut paths = vec![&mut cfg.run.out_dir];
        if let Some(p) = &mut cfg.run.partition_cache {
            paths.push(p);
        }
        if let DataSource::Citation { node_file, edge_file } = &mut cfg.data {
            paths.extend([node_file, edge_file]);
        }
        for p in paths {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Sets every seed from one value.
    pub fn reseed(&mut self, seed: u64) {
        self.seeds = Seeds {
            partition: seed,
            training: seed.wrapping_add(1),
            controller: seed.wrapping_add(2),
        };
        self.partition.seed = seed;
        self.ddpg.seed = seed.wrapping_add(2);
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.clock.validate()?;
        self.reward.validate()?;
        self.ddpg.validate()?;
        if let DataSource::Citation { node_file, edge_file } = &self.data {
            for p in [node_file, edge_file] {
                if !p.is_file() {
                    return Err(Error::Config(format!("data file {} does not exist", p.display())));
                }
            }
        }
        if let Some(p) = &self.run.partition_cache {
            if !p.is_file() {
                return Err(Error::Config(format!("partition cache {} does not exist", p.display())));
            }
        }
        if self.partition.num_clients == 0 {
            return Err(Error::Config("at least one client is required".into()));
        }
        self.policy().validate(self.train.layers).map_err(|e| Error::Config(e.to_string()))?;
        if self.run.fanouts.len() + 1 != self.train.layers {
            return Err(Error::Config(format!(
                "{} fanouts for a {}-layer model",
                self.run.fanouts.len(),
                self.train.layers
            )));
        }
        if self.run.fanouts.contains(&0) || self.run.layer_size == 0 {
            return Err(Error::Config("fanouts and layer size must be positive".into()));
        }
        let s = self.split;
        if !(s.train >= 0.0 && s.val >= 0.0 && s.train + s.val <= 1.0) {
            return Err(Error::Config(format!("split ratios train={} val={} are invalid", s.train, s.val)));
        }
        self.codec().validate()?;
        Ok(())
    }

    /// The fixed policy given to every client.
    pub fn policy(&self) -> SamplingPolicy {
        SamplingPolicy::new(self.run.kappa, self.run.probs.clone())
    }

    pub fn policies(&self) -> Vec<SamplingPolicy> {
        vec![self.policy(); self.partition.num_clients]
    }

    pub fn sampler(&self, mode: RunMode) -> (SamplerKind, ExchangeScope) {
        match mode {
            RunMode::FedgraphFixed | RunMode::FedgraphDdpg => (SamplerKind::ModelConstruct, ExchangeScope::Share),
            RunMode::Nonshare => (SamplerKind::ModelConstruct, ExchangeScope::NonShare),
            RunMode::Allshare => (SamplerKind::ModelConstruct, ExchangeScope::AllShare),
            RunMode::FullBatch => (SamplerKind::FullBatch, ExchangeScope::Share),
            RunMode::NodeWise => (
                SamplerKind::NodeWise {
                    fanouts: self.run.fanouts.clone(),
                },
                ExchangeScope::Share,
            ),
            RunMode::LayerWise => (
                SamplerKind::LayerWise {
                    layer_size: self.run.layer_size,
                },
                ExchangeScope::Share,
            ),
        }
    }

    pub fn codec(&self) -> ActionCodec {
        ActionCodec {
            clients: self.partition.num_clients,
            layers: self.train.layers,
            kappa_min: self.control.kappa_min,
            kappa_max: self.control.kappa_max,
            p_min: self.control.p_min,
            pinned_kappa: self.control.pin_kappa.then_some(self.run.kappa),
        }
    }
}
