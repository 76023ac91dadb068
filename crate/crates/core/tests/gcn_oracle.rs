mod common;

use common::checks::{centralized_equivalence, gradient_fixture};
use common::*;
use fedgraph_core::federation::Broker;
use fedgraph_core::gcn::{backward, forward, ExternalRows, GcnWeights, LocalTrainer, NoExchange, TrainConfig};
use fedgraph_core::graphstore::{Graph, Split};
use fedgraph_core::numkit::{finite_diff_grad, softmax_cross_entropy, Matrix, OptimizerKind, RngStream};
use fedgraph_core::sampler::{full_batch_plan, model_construct, ExchangeScope, SamplerKind, SamplingPolicy};
use nalgebra::DMatrix;

#[test]
fn full_batch_forward_matches_dense_stack() {
    let worst = centralized_equivalence(100);
    assert!(worst <= 1e-9, "max deviation {worst:e}");
}

#[test]
fn gradients_match_finite_differences_with_external_rows() {
    let mut with_remote = 0;
    for seed in 0..100 {
        let (err, remote) = gradient_fixture(seed);
        assert!(err <= 1e-5, "fixture {seed}: relative error {err:e}");
        with_remote += (remote > 0) as usize;
    }
    assert!(with_remote >= 30, "only {with_remote} fixtures exercised external rows");
}

fn sgd_config(lr: f64) -> TrainConfig {
    TrainConfig {
        dropout: 0.0,
        lr,
        optimizer: OptimizerKind::Sgd,
        ..Default::default()
    }
}

#[test]
fn one_sgd_step_matches_hand_stepped_oracle() {
    let mut rng = RngStream::new(3);
    let g = random_graph(12, 0.3, 4, 3, &mut rng);
    let part = single_client(&g);
    let cg = &part.clients[0];
    let cfg = sgd_config(0.2);
    let dims = cfg.dims(4, 3);
    let w0 = GcnWeights::glorot(&dims, &mut rng);
    let mut trainer = LocalTrainer::new(0, cfg, &w0);
    let policy = SamplingPolicy::new(usize::MAX, vec![1.0, 1.0]);
    trainer
        .step(cg, &policy, &SamplerKind::FullBatch, ExchangeScope::Share, &NoExchange, &mut rng)
        .unwrap();

    // Oracle: finite differences of the dense loss, then one explicit step.
    let q = dense_q(&g);
    let x = to_dm(&g.features);
    let loss = |flat: &[f64]| {
        let w = GcnWeights::from_flat(&dims, flat).unwrap();
        let ws: Vec<DMatrix<f64>> = w.layers.iter().map(to_dm).collect();
        mean_ce(&dense_gcn(&q, &x, &ws), &g.labels)
    };
    let grad = finite_diff_grad(loss, &w0.flatten(), 1e-6);
    let expected: Vec<f64> = w0.flatten().iter().zip(&grad).map(|(w, g)| w - 0.2 * g).collect();
    let got = trainer.weights().flatten();
    let worst = got.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-8, "step deviates by {worst:e}");
}

/// Two clusters joined by one edge, labels by cluster, features carrying
/// the label.
fn separable_fixture() -> Graph {
    let mut rng = RngStream::new(9);
    let n = 16;
    let label = |v: usize| (v >= n / 2) as usize;
    let mut edges = vec![(n / 2 - 1, n / 2)];
    for a in 0..n {
        for b in a + 1..n {
            if label(a) == label(b) && rng.bernoulli(0.5) {
                edges.push((a, b));
            }
        }
    }
    let features = Matrix::from_fn(n, 2, |v, j| if j == label(v) { 1.0 } else { 0.0 } + 0.1 * rng.normal());
    let mut g = Graph::from_edges(n, &edges, features, (0..n).map(label).collect(), 2).unwrap();
    g.split = vec![Split::Train; n];
    g
}

#[test]
fn loss_decreases_monotonically_on_separable_fixture() {
    let g = separable_fixture();
    let part = single_client(&g);
    let cg = &part.clients[0];
    let cfg = sgd_config(0.1);
    let mut rng = RngStream::new(1);
    let w0 = GcnWeights::glorot(&cfg.dims(2, 2), &mut rng);
    let mut trainer = LocalTrainer::new(0, cfg, &w0);
    let policy = SamplingPolicy::new(usize::MAX, vec![1.0, 1.0]);
    let losses: Vec<f64> = (0..50)
        .map(|_| {
            trainer
                .step(cg, &policy, &SamplerKind::FullBatch, ExchangeScope::Share, &NoExchange, &mut rng)
                .unwrap()
                .loss
        })
        .collect();
    for w in losses.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "loss rose: {losses:?}");
    }
    assert!(losses[49] < losses[0]);
}

#[test]
fn gradients_ignore_remote_weights_once_rows_are_fixed() {
    let mut rng = RngStream::new(21);
    let g = random_graph(14, 0.4, 3, 2, &mut rng);
    let part = random_disjoint(&g, 2, &mut rng);
    let dims = [3, 4, 4, 2];
    let mine = GcnWeights::glorot(&dims, &mut rng);
    let theirs = GcnWeights::glorot(&dims, &mut rng);
    let other = GcnWeights::glorot(&dims, &mut rng);
    let cg = &part.clients[0];
    let plan = full_batch_plan(cg, 4, ExchangeScope::Share).unwrap();
    assert!(plan.nodes.iter().any(|s| !s.remote.is_empty()), "fixture has no boundary");

    let broker = Broker::new(&part.clients);
    broker.publish(1, 0, &theirs).unwrap();
    let (ext, _, _) = fedgraph_core::gcn::gather_external(&plan, 0, &broker).unwrap();
    let labels: Vec<usize> = plan.batch().iter().map(|&v| cg.labels[v]).collect();
    let grads_with = |ext: &ExternalRows| {
        let (logits, trace) = forward(&plan, cg, &mine, ext, 0.0, None).unwrap();
        let (_, d) = softmax_cross_entropy(&logits, &labels).unwrap();
        backward(&trace, &d).unwrap()
    };
    let before = grads_with(&ext);
    // The owner moves on; the rows already received are unchanged.
    broker.publish(1, 1, &other).unwrap();
    assert_eq!(grads_with(&ext), before);
    // Fresh rows from the new weights do change the gradient.
    let (ext2, _, _) = fedgraph_core::gcn::gather_external(&plan, 0, &broker).unwrap();
    assert_ne!(grads_with(&ext2), before);
    assert!(before.same_shape(&mine));
}

#[test]
fn sampled_forward_needs_every_external_row() {
    let mut rng = RngStream::new(4);
    let g = random_graph(12, 0.5, 3, 2, &mut rng);
    let part = random_disjoint(&g, 2, &mut rng);
    let cg = &part.clients[0];
    let plan = model_construct(cg, &SamplingPolicy::new(12, vec![1.0, 1.0]), ExchangeScope::Share, &mut rng).unwrap();
    let w = GcnWeights::glorot(&[3, 4, 2], &mut rng);
    let r = plan.layer(2).remote.first().copied().expect("boundary at layer 2");
    let err = forward(&plan, cg, &w, &ExternalRows::new(), 0.0, None).unwrap_err();
    assert!(
        matches!(err, fedgraph_core::Error::MissingExternal { client, layer: 2, node } if client == r.client && node == r.global),
        "{err}"
    );
}
