use serde::{Deserialize, Serialize};

use crate::ddpg::{soft_update, Activation, ActionCodec, MlpNet, MlpOptimizer, ReplayBuffer, StateEncoder, Transition};
use crate::error::{Error, Result};
use crate::numkit::{Matrix, Purpose, RngStream};
use crate::sampler::SamplingPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Soft-update rate φ.
    pub tau: f64,
    /// Mini-batch size K.
    pub batch: usize,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    /// Compressed state dimension.
    pub state_dim: usize,
    /// Raw states observed before PCA is fitted and updates start.
    pub warmup: usize,
    pub noise_init: f64,
    /// Per-round multiplicative decay of the noise scale.
    pub noise_decay: f64,
    pub noise_floor: f64,
    /// Half-width of the uniform init of both output layers.
    pub final_init: f64,
    /// Episodes Z.
    pub episodes: usize,
    /// Rounds per episode T.
    pub rounds: usize,
    pub seed: u64,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        DdpgConfig {
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            tau: 0.01,
            batch: 32,
            buffer_capacity: 10_000,
            hidden: vec![512, 256],
            state_dim: 20,
            warmup: 20,
            noise_init: 0.3,
            noise_decay: 0.998,
            noise_floor: 0.05,
            final_init: 3e-3,
            episodes: 60,
            rounds: 30,
            seed: 0,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("soft-update rate φ = {} outside (0, 1]", self.tau)));
        }
        if self.batch == 0 {
            return Err(Error::Config("DDPG mini-batch size K must be ≥ 1".into()));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::Config("DDPG learning rates must be positive".into()));
        }
        if self.state_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::Config("DDPG layer widths must be positive".into()));
        }
        if !(self.noise_floor >= 0.0 && self.noise_init >= 0.0 && self.noise_decay > 0.0 && self.noise_decay <= 1.0) {
            return Err(Error::Config("noise schedule must be non-negative with decay in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Outcome of one learning step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_objective: f64,
}

#[derive(Debug, Clone)]
struct Pending {
    raw: Vec<f64>,
    action: Vec<f64>,
}

/// The controller: actor, critic, their targets, replay memory and state
/// compression.
#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub cfg: DdpgConfig,
    pub gamma: f64,
    pub actor: MlpNet,
    pub critic: MlpNet,
    pub actor_target: MlpNet,
    pub critic_target: MlpNet,
    actor_opt: MlpOptimizer,
    critic_opt: MlpOptimizer,
    pub buffer: ReplayBuffer,
    pub encoder: StateEncoder,
    /// Raw transitions seen before the encoder was fitted.
    early: Vec<(Vec<f64>, Vec<f64>, f64, Vec<f64>)>,
    pending: Option<Pending>,
    sigma: f64,
    acted: u64,
    rng: RngStream,
}

pub(crate) fn actor_dims(cfg: &DdpgConfig, action_dim: usize) -> Vec<usize> {
    let mut d = vec![cfg.state_dim];
    d.extend(&cfg.hidden);
    d.push(action_dim);
    d
}

pub(crate) fn critic_dims(cfg: &DdpgConfig, action_dim: usize) -> Vec<usize> {
    let mut d = vec![cfg.state_dim + action_dim];
    d.extend(&cfg.hidden);
    d.push(1);
    d
}

fn stack(rows: impl Iterator<Item = Vec<f64>>, cols: usize) -> Matrix {
    let data: Vec<f64> = rows.flatten().collect();
    Matrix::from_vec(data.len() / cols.max(1), cols, data).expect("uniform rows")
}

fn concat_cols(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), a.cols() + b.cols(), |i, j| {
        if j < a.cols() {
            a.get(i, j)
        } else {
            b.get(i, j - a.cols())
        }
    })
}

impl DdpgAgent {
    pub fn new(cfg: DdpgConfig, action_dim: usize, gamma: f64) -> Result<Self> {
        cfg.validate()?;
        if action_dim == 0 {
            return Err(Error::Config("action dimension must be ≥ 1".into()));
        }
        let mut init = RngStream::derive(cfg.seed, Purpose::Controller, 0);
        let actor = MlpNet::new(&actor_dims(&cfg, action_dim), Activation::Tanh, cfg.final_init, &mut init)?;
        let critic = MlpNet::new(&critic_dims(&cfg, action_dim), Activation::Linear, cfg.final_init, &mut init)?;
        Ok(DdpgAgent {
            actor_opt: MlpOptimizer::new(&actor, cfg.actor_lr),
            critic_opt: MlpOptimizer::new(&critic, cfg.critic_lr),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            encoder: StateEncoder::new(cfg.state_dim, cfg.warmup),
            early: Vec::new(),
            pending: None,
            sigma: cfg.noise_init,
            acted: 0,
            rng: RngStream::derive(cfg.seed, Purpose::Noise, 0),
            gamma,
            cfg,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.actor.output_dim()
    }

    /// Current exploration scale σ_t.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn rounds_acted(&self) -> u64 {
        self.acted
    }

    pub(crate) fn restore_schedule(&mut self, sigma: f64, acted: u64) {
        self.sigma = sigma;
        self.acted = acted;
    }

    /// Compressed state, or zeros while the encoder is warming up.
    fn state_of(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if self.encoder.is_fitted() {
            self.encoder.encode(raw)
        } else {
            Ok(vec![0.0; self.cfg.state_dim])
        }
    }

    /// Deterministic actor output `μ(s)` for a raw observation.
    pub fn policy_action(&self, raw: &[f64]) -> Result<Vec<f64>> {
        let s = self.state_of(raw)?;
        Ok(self.actor.forward(&Matrix::from_vec(1, s.len(), s)?)?.into_vec())
    }

    /// Chooses `a = clip(μ(s) + N(0, σ_t²))` and remembers `(s, a)` until
    /// the matching [`DdpgAgent::observe`].
    pub fn act(&mut self, raw: &[f64]) -> Result<Vec<f64>> {
        if self.encoder.observe(raw)? {
            self.flush_early()?;
        }
        let mut a = self.policy_action(raw)?;
        for v in &mut a {
            *v = (*v + self.sigma * self.rng.normal()).clamp(-1.0, 1.0);
        }
        self.pending = Some(Pending {
            raw: raw.to_vec(),
            action: a.clone(),
        });
        self.acted += 1;
        self.sigma = (self.cfg.noise_init * self.cfg.noise_decay.powf(self.acted as f64)).max(self.cfg.noise_floor);
        Ok(a)
    }

    /// Stores the transition for the last action and runs one learning
    /// step once the buffer holds `K` transitions.
    pub fn observe(&mut self, reward: f64, raw_next: &[f64]) -> Result<Option<UpdateStats>> {
        let Pending { raw, action } = self
            .pending
            .take()
            .ok_or_else(|| Error::State("observe called without a preceding act".into()))?;
        if self.encoder.is_fitted() {
            let t = Transition {
                state: self.encoder.encode(&raw)?,
                action,
                reward,
                next_state: self.encoder.encode(raw_next)?,
            };
            self.buffer.push(t);
        } else {
            self.early.push((raw, action, reward, raw_next.to_vec()));
        }
        if self.buffer.len() >= self.cfg.batch && self.encoder.is_fitted() {
            return self.learn().map(Some);
        }
        Ok(None)
    }

    fn flush_early(&mut self) -> Result<()> {
        for (s, a, r, s2) in std::mem::take(&mut self.early) {
            let t = Transition {
                state: self.encoder.encode(&s)?,
                action: a,
                reward: r,
                next_state: self.encoder.encode(&s2)?,
            };
            self.buffer.push(t);
        }
        Ok(())
    }

    /// Alg.-level hook: closes the previous transition with `r_prev` (when
    /// there is one) and emits the next policies.
    pub fn gen_sampling(&mut self, raw: &[f64], r_prev: Option<f64>, codec: &ActionCodec) -> Result<Vec<SamplingPolicy>> {
        if let (Some(r), true) = (r_prev, self.pending.is_some()) {
            self.observe(r, raw)?;
        }
        let a = self.act(raw)?;
        codec.decode(&a)
    }

    /// Critic step, actor step, then both soft updates.
    pub fn learn(&mut self) -> Result<UpdateStats> {
        if self.buffer.len() < self.cfg.batch {
            return Err(Error::State(format!(
                "replay buffer holds {} < K = {} transitions",
                self.buffer.len(),
                self.cfg.batch
            )));
        }
        let batch: Vec<Transition> = self.buffer.sample(self.cfg.batch, &mut self.rng).into_iter().cloned().collect();
        let critic_loss = critic_update(
            &mut self.critic,
            &mut self.critic_opt,
            &self.actor_target,
            &self.critic_target,
            &batch,
            self.gamma,
        )?;
        let actor_objective = actor_update(&mut self.actor, &mut self.actor_opt, &self.critic, &batch)?;
        soft_update(&mut self.actor_target, &self.actor, self.cfg.tau)?;
        soft_update(&mut self.critic_target, &self.critic, self.cfg.tau)?;
        if !(self.actor.is_finite() && self.critic.is_finite()) {
            return Err(Error::State("controller networks diverged".into()));
        }
        Ok(UpdateStats {
            critic_loss,
            actor_objective,
        })
    }
}

/// Gradient of the mean squared TD error with respect to the critic's
/// parameters, plus the loss.
pub fn critic_loss_grad(
    critic: &MlpNet,
    actor_target: &MlpNet,
    critic_target: &MlpNet,
    batch: &[Transition],
    gamma: f64,
) -> Result<(f64, crate::ddpg::MlpGrads)> {
    if batch.is_empty() {
        return Err(Error::Precondition("empty critic batch".into()));
    }
    let sd = batch[0].state.len();
    let ad = batch[0].action.len();
    let s = stack(batch.iter().map(|t| t.state.clone()), sd);
    let a = stack(batch.iter().map(|t| t.action.clone()), ad);
    let s2 = stack(batch.iter().map(|t| t.next_state.clone()), sd);
    let a2 = actor_target.forward(&s2)?;
    let q_next = critic_target.forward(&concat_cols(&s2, &a2))?;
    let (q, cache) = critic.forward_cached(&concat_cols(&s, &a))?;
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut dq = Matrix::zeros(batch.len(), 1);
    for (i, t) in batch.iter().enumerate() {
        let y = t.reward + gamma * q_next.get(i, 0);
        let err = q.get(i, 0) - y;
        loss += err * err / n;
        dq.set(i, 0, 2.0 * err / n);
    }
    let (grads, _) = critic.backward(&cache, &dq)?;
    Ok((loss, grads))
}

/// One descent step on the TD error. Returns the pre-step loss.
pub fn critic_update(
    critic: &mut MlpNet,
    opt: &mut MlpOptimizer,
    actor_target: &MlpNet,
    critic_target: &MlpNet,
    batch: &[Transition],
    gamma: f64,
) -> Result<f64> {
    let (loss, grads) = critic_loss_grad(critic, actor_target, critic_target, batch, gamma)?;
    opt.step(critic, &grads)?;
    Ok(loss)
}

/// Gradient of `−mean_s q(s, μ(s))` with respect to the actor's
/// parameters, plus the objective `mean q`.
pub fn actor_objective_grad(actor: &MlpNet, critic: &MlpNet, states: &Matrix) -> Result<(f64, crate::ddpg::MlpGrads)> {
    let (a, acache) = actor.forward_cached(states)?;
    let (q, ccache) = critic.forward_cached(&concat_cols(states, &a))?;
    let n = states.rows() as f64;
    let dq = Matrix::filled(states.rows(), 1, -1.0 / n);
    let (_, d_in) = critic.backward(&ccache, &dq)?;
    let sd = states.cols();
    let da = Matrix::from_fn(a.rows(), a.cols(), |i, j| d_in.get(i, sd + j));
    let (grads, _) = actor.backward(&acache, &da)?;
    Ok((q.sum() / n, grads))
}

/// One ascent step on `mean q(s, μ(s))`. Returns the pre-step objective.
pub fn actor_update(actor: &mut MlpNet, opt: &mut MlpOptimizer, critic: &MlpNet, batch: &[Transition]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Precondition("empty actor batch".into()));
    }
    let states = stack(batch.iter().map(|t| t.state.clone()), batch[0].state.len());
    let (obj, grads) = actor_objective_grad(actor, critic, &states)?;
    opt.step(actor, &grads)?;
    Ok(obj)
}

/// An environment the controller can be trained against.
pub trait ControllerEnv {
    /// Starts an episode and returns the first raw observation.
    fn reset(&mut self, episode: usize) -> Result<Vec<f64>>;
    /// Applies a raw action, returning the reward and next observation.
    fn step(&mut self, action: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// `Z` episodes of `T` rounds. Returns the discounted return of each
/// episode. Controller memory carries over between episodes.
pub fn train_controller(env: &mut dyn ControllerEnv, agent: &mut DdpgAgent) -> Result<Vec<f64>> {
    let (episodes, rounds) = (agent.cfg.episodes, agent.cfg.rounds);
    let mut returns = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let mut obs = env.reset(ep)?;
        let mut ret = 0.0;
        let mut discount = 1.0;
        for _ in 0..rounds {
            let a = agent.act(&obs)?;
            let (r, next) = env.step(&a)?;
            agent.observe(r, &next)?;
            ret += discount * r;
            discount *= agent.gamma;
            obs = next;
        }
        log::info!("episode {ep}: return {ret:.4}");
        returns.push(ret);
    }
    Ok(returns)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> DdpgConfig {
        DdpgConfig {
            hidden: vec![8, 6],
            state_dim: 3,
            warmup: 2,
            batch: 4,
            ..Default::default()
        }
    }

    #[test]
    fn zero_actor_and_no_noise_give_midpoints() {
        let cfg = DdpgConfig {
            noise_init: 0.0,
            noise_floor: 0.0,
            final_init: 0.0,
            ..small_cfg()
        };
        let codec = ActionCodec {
            clients: 2,
            layers: 3,
            kappa_min: 10,
            kappa_max: 30,
            p_min: 0.2,
            pinned_kappa: None,
        };
        let mut agent = DdpgAgent::new(cfg, codec.dim(), 0.9).unwrap();
        for r in 0..5 {
            let ps = agent.gen_sampling(&[r as f64, 1.0], Some(0.0), &codec).unwrap();
            for p in ps {
                assert_eq!(p.kappa, 20);
                assert!(p.probs.iter().all(|&x| (x - 0.6).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let run = || {
            let mut agent = DdpgAgent::new(small_cfg(), 2, 0.9).unwrap();
            let mut out = Vec::new();
            for k in 0..12 {
                let obs = vec![k as f64, (k * k) as f64 % 7.0];
                out.extend(agent.act(&obs).unwrap());
                agent.observe(-(k as f64), &obs).unwrap();
            }
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn noise_decays_to_floor() {
        let cfg = DdpgConfig {
            noise_init: 1.0,
            noise_decay: 0.5,
            noise_floor: 0.1,
            ..small_cfg()
        };
        let mut agent = DdpgAgent::new(cfg, 1, 0.0).unwrap();
        let mut last = agent.sigma();
        for _ in 0..10 {
            agent.act(&[0.0]).unwrap();
            agent.observe(0.0, &[0.0]).unwrap();
            assert!(agent.sigma() <= last);
            last = agent.sigma();
        }
        assert_eq!(last, 0.1);
    }

    #[test]
    fn warmup_transitions_reach_buffer_after_fit() {
        let cfg = DdpgConfig {
            warmup: 3,
            batch: 100,
            ..small_cfg()
        };
        let mut agent = DdpgAgent::new(cfg, 1, 0.5).unwrap();
        for k in 0..3 {
            agent.act(&[k as f64, 1.0]).unwrap();
            agent.observe(1.0, &[k as f64 + 1.0, 1.0]).unwrap();
        }
        // Two transitions completed before the third act fitted the PCA.
        assert_eq!(agent.buffer.len(), 3);
        assert!(agent.observe(0.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn learn_requires_full_batch() {
        let mut agent = DdpgAgent::new(small_cfg(), 1, 0.5).unwrap();
        assert!(matches!(agent.learn(), Err(Error::State(_))));
    }
}
