//! Criterion-sized checks shared by the focused tests and the acceptance
//! report. Each returns the measured quantity; callers decide thresholds.
#![allow(dead_code)]

use std::collections::BTreeMap;

use fedgraph_core::ddpg::{train_controller, ControllerEnv, DdpgAgent, DdpgConfig};
use fedgraph_core::federation::{aggregate, EvalSet, FedSetup, Federation};
use fedgraph_core::gcn::{backward, forward, ExternalRows, GcnWeights, TrainConfig};
use fedgraph_core::graphstore::{partition_with_assignment, ClientGraph, Graph, Partition, Split};
use fedgraph_core::numkit::{finite_diff_grad, softmax_cross_entropy, Matrix, RngStream};
use fedgraph_core::sampler::{full_batch_plan, model_construct, Col, ExchangeScope, LayerPlan, SamplerKind, SamplingPolicy};

use super::*;

/// Max |logit − oracle| over `count` random single-client graphs with at
/// most 15 nodes.
pub fn centralized_equivalence(count: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..count {
        let mut rng = RngStream::new(1000 + seed);
        let n = 1 + rng.below(15);
        let fdim = 1 + rng.below(6);
        let classes = 2 + rng.below(4);
        let hidden = 1 + rng.below(8);
        let layers = 2 + rng.below(3);
        let g = random_graph(n, rng.uniform_range(0.05, 0.6), fdim, classes, &mut rng);
        let part = single_client(&g);
        let cg = &part.clients[0];
        let mut dims = vec![fdim];
        dims.extend(std::iter::repeat_n(hidden, layers - 2));
        dims.push(classes);
        let w = GcnWeights::glorot(&dims, &mut rng);
        let plan = full_batch_plan(cg, layers, ExchangeScope::Share).unwrap();
        let (logits, _) = forward(&plan, cg, &w, &ExternalRows::new(), 0.0, None).unwrap();

        let ws: Vec<_> = w.layers.iter().map(to_dm).collect();
        let oracle = dense_gcn(&dense_q(&g), &to_dm(&g.features), &ws);
        for (i, &v) in plan.batch().iter().enumerate() {
            let gv = cg.global_ids[v];
            for c in 0..classes {
                worst = worst.max((logits.get(i, c) - oracle[(gv, c)]).abs());
            }
        }
    }
    worst
}

/// One random gradient fixture: a 2- or 3-client partition of a small
/// graph, a sampled plan, random external rows and dropout with a fixed
/// mask. Returns (max relative error, number of remote slots).
pub fn gradient_fixture(seed: u64) -> (f64, usize) {
    let mut rng = RngStream::new(5000 + seed);
    let n = 6 + rng.below(7);
    let fdim = 2 + rng.below(4);
    let classes = 2 + rng.below(3);
    let hidden = 2 + rng.below(5);
    let layers = 3 + rng.below(2);
    let g = random_graph(n, rng.uniform_range(0.25, 0.6), fdim, classes, &mut rng);
    let part = random_disjoint(&g, 2 + rng.below(2), &mut rng);
    let cg = &part.clients[rng.below(part.clients.len())];
    let probs: Vec<f64> = (0..layers - 1).map(|_| rng.uniform_range(0.4, 1.0)).collect();
    let plan = model_construct(cg, &SamplingPolicy::new(n, probs), ExchangeScope::Share, &mut rng).unwrap();
    let mut dims = vec![fdim];
    dims.extend(std::iter::repeat_n(hidden, layers - 2));
    dims.push(classes);
    let w = GcnWeights::glorot(&dims, &mut rng);
    let mut ext = ExternalRows::new();
    let mut remote_slots = 0;
    for l in 1..layers {
        for r in &plan.layer(l).remote {
            remote_slots += 1;
            ext.insert(l, *r, (0..dims[l]).map(|_| rng.normal()).collect());
        }
    }
    let labels: Vec<usize> = plan.batch().iter().map(|&v| cg.labels[v]).collect();
    let mask_seed = rng.next_u64();
    let loss_of = |w: &GcnWeights| -> (f64, Matrix, fedgraph_core::gcn::ForwardTrace) {
        let mut drop = RngStream::new(mask_seed);
        let (logits, trace) = forward(&plan, cg, w, &ext, 0.3, Some(&mut drop)).unwrap();
        let (loss, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
        (loss, grad, trace)
    };
    let (_, dlogits, trace) = loss_of(&w);
    let grads = backward(&trace, &dlogits).unwrap();
    let fd = finite_diff_grad(|x| loss_of(&GcnWeights::from_flat(&dims, x).unwrap()).0, &w.flatten(), 1e-6);
    let fd = GcnWeights::from_flat(&dims, &fd).unwrap();
    let mut worst: f64 = 0.0;
    for (a, b) in grads.layers.iter().zip(&fd.layers) {
        let scale = b.data().iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-3);
        worst = worst.max(a.max_abs_diff(b) / scale);
    }
    (worst, remote_slots)
}

/// Per tested node: |MC mean − exact| / SE of the mean (exact cases with
/// zero variance report 0 when they match to 1e-12, ∞ otherwise).
#[derive(Debug)]
pub struct McResult {
    pub nodes: Vec<usize>,
    pub z_scores: Vec<f64>,
    /// Confirmation z-scores for nodes that exceeded 3 SE.
    pub confirmed: Vec<(usize, f64)>,
}

impl McResult {
    pub fn worst(&self) -> f64 {
        self.z_scores.iter().fold(0.0, |m, &z| m.max(z))
    }

    /// Per-node z-score, replaced by its confirmation when there is one.
    pub fn effective(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .zip(&self.z_scores)
            .map(|(v, &z)| self.confirmed.iter().find(|&&(u, _)| u == *v).map_or(z, |&(_, c)| c))
            .collect()
    }

    /// Every node within 3 SE, directly or on confirmation.
    pub fn passes(&self) -> bool {
        self.effective().iter().all(|&z| z <= 3.0)
    }
}

/// Value of `Σ_u Q̃(v,u)h(u)` for every row of block `l`, keyed by the
/// row's local node.
pub fn block_estimates(plan: &LayerPlan, cg: &fedgraph_core::graphstore::ClientGraph, l: usize, h: &[f64]) -> Vec<(usize, f64)> {
    let below = plan.layer(l);
    let rows = &plan.layer(l + 1).local;
    let block = plan.block(l);
    rows.iter()
        .enumerate()
        .map(|(i, &v)| {
            let s = block
                .row(i)
                .map(|(c, q)| {
                    let gu = match c {
                        Col::Local(j) => cg.global_ids[below.local[j]],
                        Col::Remote(j) => below.remote[j].global,
                    };
                    q * h[gu]
                })
                .sum();
            (v, s)
        })
        .collect()
}

/// Monte Carlo check of the estimator behind block `l` of the sampler.
/// `expected(v)` is the exact target for local node `v`.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo(
    draws: usize,
    tested: &[usize],
    plan_of: &mut dyn FnMut(&mut RngStream) -> LayerPlan,
    cg: &fedgraph_core::graphstore::ClientGraph,
    l: usize,
    h: &[f64],
    expected: &dyn Fn(usize) -> f64,
    seed: u64,
) -> McResult {
    let mut sum: BTreeMap<usize, (f64, f64, usize)> = tested.iter().map(|&v| (v, (0.0, 0.0, 0))).collect();
    let mut rng = RngStream::new(seed);
    for _ in 0..draws {
        let plan = plan_of(&mut rng);
        for (v, s) in block_estimates(&plan, cg, l, h) {
            if let Some(e) = sum.get_mut(&v) {
                e.0 += s;
                e.1 += s * s;
                e.2 += 1;
            }
        }
    }
    let nodes: Vec<usize> = sum.keys().copied().collect();
    let z_scores = sum
        .into_iter()
        .map(|(v, (s, s2, k))| {
            assert_eq!(k, draws, "node {v} missing from some draws");
            let n = k as f64;
            let mean = s / n;
            let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
            let se = (var / n).sqrt();
            let diff = (mean - expected(v)).abs();
            if se < 1e-12 {
                if diff < 1e-12 { 0.0 } else { f64::INFINITY }
            } else {
                diff / se
            }
        })
        .collect();
    McResult {
        nodes,
        z_scores,
        confirmed: Vec::new(),
    }
}

/// [`monte_carlo`] at the 3-SE threshold, with a confirmation stage:
/// a node beyond 3 SE is re-drawn with ten times as many fresh samples
/// and must fall within 3 SE there. A genuine bias of `b` SE at the first
/// stage shows up as about `3.2·b` SE in the second.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_confirmed(
    draws: usize,
    tested: &[usize],
    plan_of: &mut dyn FnMut(&mut RngStream) -> LayerPlan,
    cg: &fedgraph_core::graphstore::ClientGraph,
    l: usize,
    h: &[f64],
    expected: &dyn Fn(usize) -> f64,
    seed: u64,
) -> McResult {
    let mut first = monte_carlo(draws, tested, plan_of, cg, l, h, expected, seed);
    let flagged: Vec<usize> = first
        .nodes
        .iter()
        .zip(&first.z_scores)
        .filter(|(_, &z)| z > 3.0)
        .map(|(&v, _)| v)
        .collect();
    if !flagged.is_empty() {
        let second = monte_carlo(10 * draws, &flagged, plan_of, cg, l, h, expected, seed ^ 0x5eed_0000_0000);
        first.confirmed = second.nodes.into_iter().zip(second.z_scores).collect();
    }
    first
}

/// Exact `Σ_u Q(v,u)h(u)` over the global neighbours of `gv` (and itself)
/// that satisfy `keep`.
pub fn exact_qh(g: &Graph, gv: usize, h: &[f64], keep: impl Fn(usize) -> bool) -> f64 {
    let q = dense_q(g);
    let mut s = q[(gv, gv)] * h[gv];
    for &u in g.neighbors(gv) {
        if keep(u) {
            s += q[(gv, u)] * h[u];
        }
    }
    s
}

/// Exact mean and variance of the Bernoulli-with-fallback estimator over
/// a universe of `terms` (each `Q(v,u)h(u)`), by enumerating all subsets.
pub fn enumerate_estimator(terms: &[f64], p: f64) -> (f64, f64) {
    let m = terms.len();
    let (mut mean, mut second) = (0.0, 0.0);
    for mask in 1u32..(1 << m) {
        let k = mask.count_ones() as usize;
        let prob = p.powi(k as i32) * (1.0 - p).powi((m - k) as i32);
        let est: f64 = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| terms[i]).sum::<f64>() * m as f64 / k as f64;
        mean += prob * est;
        second += prob * est * est;
    }
    let empty = (1.0 - p).powi(m as i32);
    for &t in terms {
        let est = t * m as f64;
        mean += empty / m as f64 * est;
        second += empty / m as f64 * est * est;
    }
    (mean, second - mean * mean)
}

/// κ-weighted aggregation checks: (random-case error vs oracle, κ=(1,3)
/// case value, single-client error).
pub fn aggregation_exactness() -> (f64, f64, f64) {
    let mut rng = RngStream::new(77);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let clients = 1 + rng.below(5);
        let dims = [3, 4, 2];
        let ws: Vec<GcnWeights> = (0..clients).map(|_| GcnWeights::glorot(&dims, &mut rng)).collect();
        let kappa: Vec<usize> = (0..clients).map(|_| 1 + rng.below(300)).collect();
        let agg = aggregate(&ws, &kappa).unwrap();
        let total: f64 = kappa.iter().map(|&k| k as f64).sum();
        for l in 0..2 {
            let mut oracle = to_dm(&ws[0].layers[l]) * (kappa[0] as f64 / total);
            for i in 1..clients {
                oracle += to_dm(&ws[i].layers[l]) * (kappa[i] as f64 / total);
            }
            worst = worst.max((to_dm(&agg.layers[l]) - oracle).abs().max());
        }
    }
    let zero = GcnWeights::zeros(&[2, 2]);
    let one = GcnWeights::new(vec![Matrix::filled(2, 2, 1.0)]).unwrap();
    let mixed = aggregate(&[zero, one], &[1, 3]).unwrap().layers[0].get(0, 0);
    let single = GcnWeights::glorot(&[3, 5, 2], &mut rng);
    let same = aggregate(std::slice::from_ref(&single), &[17]).unwrap();
    let single_err = same.layers.iter().zip(&single.layers).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max);
    (worst, mixed, single_err)
}

/// Federation over an explicit partition, evaluated on the global test
/// split of `g`.
pub fn federation_setup(sampler: SamplerKind, scope: ExchangeScope, seed: u64) -> FedSetup {
    FedSetup {
        train: TrainConfig::default(),
        sampler,
        scope,
        exchange: Default::default(),
        clock: Default::default(),
        seed,
        workers: 1,
    }
}

/// Final test accuracy after `rounds` rounds.
pub fn final_accuracy(g: &Graph, part: &Partition, setup: FedSetup, policy: &SamplingPolicy, rounds: usize) -> f64 {
    let eval = EvalSet::from_graph(&part.evaluation_graph(g), Split::Test).unwrap();
    let mut fed = Federation::new(part, eval, setup).unwrap();
    let mut state = fed.start_episode(0, vec![policy.clone(); part.num_clients()]).unwrap();
    let recs = fed.run(&mut state, rounds).unwrap();
    recs.last().unwrap().lambda
}

/// Rounds used by the sharing ablation.
pub const ABLATION_ROUNDS: usize = 100;

/// Four-block SBM with noisy features, nodes dealt round-robin to four
/// clients so three quarters of all edges cross clients.
pub fn dense_cross_fixture(seed: u64) -> (Graph, Partition) {
    let clients = 4;
    let mut spec = fedgraph_core::graphstore::SbmSpec::new(4, 150, 0.06, 0.003, 8, seed);
    spec.noise_std = 2.0;
    let mut g = fedgraph_core::graphstore::synth_sbm(&spec).unwrap();
    g.assign_splits(Default::default(), seed);
    let n = g.num_nodes();
    let mut rng = RngStream::new(seed ^ 0xabc);
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut sets = vec![Vec::new(); clients];
    for (i, v) in order.into_iter().enumerate() {
        sets[i % clients].push(v);
    }
    sets.iter_mut().for_each(|s| s.sort_unstable());
    let part = partition_with_assignment(&g, sets).unwrap();
    (g, part)
}

/// Final accuracy of (nonShare, share, allShare) on one seed of the
/// dense cross-client fixture.
pub fn sharing_ablation(seed: u64, rounds: usize) -> (f64, f64, f64) {
    let (g, part) = dense_cross_fixture(seed);
    let policy = SamplingPolicy::new(64, vec![0.5, 0.5]);
    let run = |scope| final_accuracy(&g, &part, federation_setup(SamplerKind::ModelConstruct, scope, seed), &policy, rounds);
    (run(ExchangeScope::NonShare), run(ExchangeScope::Share), run(ExchangeScope::AllShare))
}

/// One-step bandit with a fixed observation and reward `−(a − 0.5)²`.
pub struct Bandit {
    obs: Vec<f64>,
    actions: Vec<f64>,
}

impl ControllerEnv for Bandit {
    fn reset(&mut self, _episode: usize) -> fedgraph_core::Result<Vec<f64>> {
        Ok(self.obs.clone())
    }

    fn step(&mut self, action: &[f64]) -> fedgraph_core::Result<(f64, Vec<f64>)> {
        self.actions.push(action[0]);
        Ok((-(action[0] - 0.5).powi(2), self.obs.clone()))
    }
}

/// Mean emitted action over the last 300 of 3000 bandit rounds, and the
/// final deterministic action.
pub fn bandit_run(seed: u64) -> (f64, f64) {
    let cfg = DdpgConfig {
        actor_lr: 1e-3,
        critic_lr: 1e-3,
        hidden: vec![32, 32],
        state_dim: 2,
        warmup: 5,
        batch: 32,
        noise_init: 0.4,
        noise_decay: 0.999,
        noise_floor: 0.05,
        episodes: 1,
        rounds: 3000,
        seed,
        ..Default::default()
    };
    let mut agent = DdpgAgent::new(cfg, 1, 0.0).unwrap();
    let mut env = Bandit {
        obs: vec![0.2, -0.4, 1.0],
        actions: Vec::new(),
    };
    train_controller(&mut env, &mut agent).unwrap();
    assert_eq!(env.actions.len(), 3000);
    let tail = &env.actions[2700..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    (mean, agent.policy_action(&env.obs).unwrap()[0])
}

pub const DRAWS: usize = 10_000;

/// Two-client disjoint split of a small SBM, every node labelled train.
pub fn mc_fixture() -> (Graph, Partition) {
    let g = all_train(sbm(3, 14, 0.35, 0.1, 2, 5));
    let mut rng = RngStream::new(8);
    let part = random_disjoint(&g, 2, &mut rng);
    (g, part)
}

pub fn h_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = RngStream::new(seed);
    (0..n).map(|_| rng.normal() + 1.0).collect()
}

/// Tested rows: the five largest neighbourhoods plus the smallest.
pub fn tested_nodes(cg: &ClientGraph) -> Vec<usize> {
    let mut v: Vec<usize> = (0..cg.num_nodes()).collect();
    v.sort_by_key(|&u| std::cmp::Reverse((cg.neighbor_count(u), u)));
    let mut t: Vec<usize> = v[..5].to_vec();
    t.push(*v.last().unwrap());
    t.sort_unstable();
    t.dedup();
    t
}

/// Runs the model-construct unbiasedness check at layers 1 and 2 for
/// each `p`. Returns (checks, failures, worst confirmed |z|).
pub fn sampling_unbiasedness(ps: &[f64]) -> (usize, usize, f64) {
    let (g, part) = mc_fixture();
    let cg = &part.clients[0];
    let owned: std::collections::BTreeSet<usize> = cg.global_ids.iter().copied().collect();
    let h = h_vector(g.num_nodes(), 1);
    let tested = tested_nodes(cg);
    let (mut checks, mut failures, mut worst) = (0, 0, 0.0f64);
    for (k, &p) in ps.iter().enumerate() {
        for (probs, layer, seed) in [(vec![p], 1, 100), (vec![1.0, p], 2, 200)] {
            let policy = SamplingPolicy::new(usize::MAX, probs);
            let internal_only = layer == 1;
            let r = monte_carlo_confirmed(
                DRAWS,
                &tested,
                &mut |rng| model_construct(cg, &policy, ExchangeScope::Share, rng).unwrap(),
                cg,
                layer,
                &h,
                &|v| exact_qh(&g, cg.global_ids[v], &h, |u| !internal_only || owned.contains(&u)),
                seed + k as u64,
            );
            let z = r.effective();
            checks += z.len();
            failures += z.iter().filter(|&&z| z > 3.0).count();
            worst = z.iter().fold(worst, |m, &z| m.max(z));
        }
    }
    (checks, failures, worst)
}

/// Largest |bias| / SE of the fallback estimator over small universes.
pub fn fallback_bias() -> f64 {
    let mut rng = RngStream::new(2);
    let mut worst = 0.0f64;
    for m in 1..=10 {
        let terms: Vec<f64> = (0..m).map(|_| rng.normal()).collect();
        let truth: f64 = terms.iter().sum();
        for p in [0.3, 0.5, 0.8] {
            let (mean, var) = enumerate_estimator(&terms, p);
            let se = (var / DRAWS as f64).sqrt().max(1e-12);
            worst = worst.max((mean - truth).abs() / se);
        }
    }
    worst
}
