use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{pca_fit, PcaModel, RngStream};
use crate::sampler::SamplingPolicy;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Bounded FIFO of transitions; the oldest entry is evicted when full.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity: capacity.max(1),
            items: VecDeque::with_capacity(capacity.clamp(1, 1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `k` distinct transitions chosen uniformly.
    pub fn sample(&self, k: usize, rng: &mut RngStream) -> Vec<&Transition> {
        let k = k.min(self.items.len());
        rng.sample_indices(self.items.len(), k)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

/// Reward shape `r = Ω^(λ − Λ) − α(δ − β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Ω, the exponential base.
    pub omega: f64,
    /// Λ, the target accuracy.
    pub target: f64,
    /// α. `None` calibrates it on the first observed round so that
    /// `α(δ − β) = 1` there.
    pub alpha: Option<f64>,
    /// β.
    pub beta: f64,
    /// γ, the discount.
    pub gamma: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            omega: 128.0,
            target: 0.8,
            alpha: None,
            beta: 0.0,
            gamma: 0.99,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 1.0) {
            return Err(Error::Config(format!("Ω = {} must exceed 1", self.omega)));
        }
        if !(self.target > 0.0 && self.target <= 1.0) {
            return Err(Error::Config(format!("target accuracy {} outside (0, 1]", self.target)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("discount γ = {} outside [0, 1)", self.gamma)));
        }
        if self.alpha.is_some_and(|a| !(a >= 0.0)) {
            return Err(Error::Config("α must be non-negative".into()));
        }
        Ok(())
    }

    /// Fixes `α` from a reference round time if it is still unset.
    pub fn calibrate(&mut self, delta_ref: f64) {
        if self.alpha.is_none() && delta_ref - self.beta > 0.0 {
            self.alpha = Some(1.0 / (delta_ref - self.beta));
        }
    }
}

pub fn reward(lambda: f64, delta: f64, cfg: &RewardConfig) -> f64 {
    cfg.omega.powf(lambda - cfg.target) - cfg.alpha.unwrap_or(0.0) * (delta - cfg.beta)
}

/// Maps actor outputs in `[-1, 1]` to per-client policies. Each client owns
/// `layers` consecutive slots: one for κ, then one per convolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionCodec {
    pub clients: usize,
    pub layers: usize,
    pub kappa_min: usize,
    pub kappa_max: usize,
    pub p_min: f64,
    /// When set, every decoded κ equals this value and the κ slot is ignored.
    pub pinned_kappa: Option<usize>,
}

impl ActionCodec {
    pub fn dim(&self) -> usize {
        self.clients * self.layers
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers < 2 || self.clients == 0 {
            return Err(Error::Config("action codec needs ≥ 1 client and ≥ 2 layers".into()));
        }
        if self.kappa_min == 0 || self.kappa_min > self.kappa_max {
            return Err(Error::Config(format!(
                "κ bounds [{}, {}] are invalid",
                self.kappa_min, self.kappa_max
            )));
        }
        if !(self.p_min > 0.0 && self.p_min <= 1.0) {
            return Err(Error::Config(format!("p_min {} outside (0, 1]", self.p_min)));
        }
        Ok(())
    }

    pub fn decode(&self, raw: &[f64]) -> Result<Vec<SamplingPolicy>> {
        if raw.len() != self.dim() {
            return Err(Error::shape("decode_action", format!("{} values for dimension {}", raw.len(), self.dim())));
        }
        let unit = |x: f64| (x.clamp(-1.0, 1.0) + 1.0) / 2.0;
        Ok(raw
            .chunks(self.layers)
            .map(|slots| {
                let kappa = match self.pinned_kappa {
                    Some(k) => k,
                    None => {
                        let span = (self.kappa_max - self.kappa_min) as f64;
                        (self.kappa_min as f64 + unit(slots[0]) * span).round() as usize
                    }
                };
                let probs = slots[1..]
                    .iter()
                    .map(|&x| (self.p_min + unit(x) * (1.0 - self.p_min)).clamp(self.p_min, 1.0))
                    .collect();
                SamplingPolicy::new(kappa, probs)
            })
            .collect())
    }

    pub fn encode(&self, policies: &[SamplingPolicy]) -> Result<Vec<f64>> {
        if policies.len() != self.clients {
            return Err(Error::shape("encode_action", format!("{} policies for {} clients", policies.len(), self.clients)));
        }
        let raw = |unit: f64| (2.0 * unit - 1.0).clamp(-1.0, 1.0);
        let mut out = Vec::with_capacity(self.dim());
        for p in policies {
            if p.probs.len() + 1 != self.layers {
                return Err(Error::shape("encode_action", format!("{} probabilities", p.probs.len())));
            }
            out.push(match self.pinned_kappa {
                Some(_) => 0.0,
                None if self.kappa_max == self.kappa_min => 0.0,
                None => raw((p.kappa as f64 - self.kappa_min as f64) / (self.kappa_max - self.kappa_min) as f64),
            });
            let span = 1.0 - self.p_min;
            out.extend(p.probs.iter().map(|&q| if span == 0.0 { 0.0 } else { raw((q - self.p_min) / span) }));
        }
        Ok(out)
    }
}

/// Raw weight vectors → compressed controller state. Raw states are
/// buffered until `warmup` of them have been seen; PCA is then fitted once
/// and frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEncoder {
    pub k: usize,
    pub warmup: usize,
    pca: Option<PcaModel>,
    pending: Vec<Vec<f64>>,
}

impl StateEncoder {
    pub fn new(k: usize, warmup: usize) -> Self {
        StateEncoder {
            k,
            warmup: warmup.max(2),
            pca: None,
            pending: Vec::new(),
        }
    }

    pub fn from_model(model: PcaModel, warmup: usize) -> Self {
        StateEncoder {
            k: model.k(),
            warmup: warmup.max(2),
            pca: Some(model),
            pending: Vec::new(),
        }
    }

    pub fn model(&self) -> Option<&PcaModel> {
        self.pca.as_ref()
    }

    pub fn is_fitted(&self) -> bool {
        self.pca.is_some()
    }

    /// Buffers `raw` while warming up. Returns true on the call that fits.
    pub fn observe(&mut self, raw: &[f64]) -> Result<bool> {
        if self.pca.is_some() {
            return Ok(false);
        }
        if let Some(first) = self.pending.first() {
            if first.len() != raw.len() {
                return Err(Error::State(format!(
                    "raw state length changed from {} to {}",
                    first.len(),
                    raw.len()
                )));
            }
        }
        self.pending.push(raw.to_vec());
        if self.pending.len() >= self.warmup {
            let d = raw.len();
            let model = pca_fit(&self.pending, self.k.min(d).min(self.pending.len()))?;
            self.pca = Some(pad_components(model, self.k));
            self.pending.clear();
            return Ok(true);
        }
        Ok(false)
    }

    pub fn encode(&self, raw: &[f64]) -> Result<Vec<f64>> {
        let pca = self
            .pca
            .as_ref()
            .ok_or_else(|| Error::State("state encoder used before PCA was fitted".into()))?;
        if raw.len() != pca.dim() {
            return Err(Error::State(format!(
                "state has {} entries but PCA was fitted on {}",
                raw.len(),
                pca.dim()
            )));
        }
        pca.project(raw)
    }
}

/// Pads a model with zero components so the encoded state always has
/// exactly `k` coordinates, even for low-dimensional raw states.
fn pad_components(model: PcaModel, k: usize) -> PcaModel {
    if model.k() >= k {
        return model;
    }
    let d = model.dim();
    let mut data = model.components.data().to_vec();
    data.resize(k * d, 0.0);
    let mut variances = model.variances;
    variances.resize(k, 0.0);
    PcaModel {
        mean: model.mean,
        components: crate::numkit::Matrix::from_vec(k, d, data).expect("padded shape"),
        variances,
    }
}
