use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphstore::Graph;
use crate::numkit::{Matrix, Purpose, RngStream};

/// Stochastic block model with block-indicator features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub blocks: usize,
    pub nodes_per_block: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Standard deviation of the Gaussian noise added to every feature.
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    pub seed: u64,
}

fn default_noise() -> f64 {
    1.0
}

impl SbmSpec {
    pub fn new(blocks: usize, nodes_per_block: usize, p_in: f64, p_out: f64, feature_dim: usize, seed: u64) -> Self {
        SbmSpec {
            blocks,
            nodes_per_block,
            p_in,
            p_out,
            feature_dim,
            noise_std: default_noise(),
            seed,
        }
    }
}

/// Node `v` belongs to block `v / nodes_per_block`; its label is the block
/// id and its features are the one-hot block indicator (at column
/// `block % feature_dim`) plus Gaussian noise.
pub fn synth_sbm(spec: &SbmSpec) -> Result<Graph> {
    let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
    if !prob_ok(spec.p_in) || !prob_ok(spec.p_out) {
        return Err(Error::Precondition(format!(
            "SBM probabilities must lie in [0,1] (p_in={}, p_out={})",
            spec.p_in, spec.p_out
        )));
    }
    if spec.blocks == 0 || spec.feature_dim == 0 {
        return Err(Error::Precondition("SBM needs at least one block and one feature".into()));
    }
    let n = spec.blocks * spec.nodes_per_block;
    let block = |v: usize| v / spec.nodes_per_block.max(1);
    let mut rng = RngStream::derive(spec.seed, Purpose::Synth, 0);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let p = if block(a) == block(b) { spec.p_in } else { spec.p_out };
            if rng.bernoulli(p) {
                edges.push((a, b));
            }
        }
    }
    let mut feat_rng = RngStream::derive(spec.seed, Purpose::Synth, 1);
    let features = Matrix::from_fn(n, spec.feature_dim, |v, j| {
        let signal = if j == block(v) % spec.feature_dim { 1.0 } else { 0.0 };
        signal + spec.noise_std * feat_rng.normal()
    });
    let labels = (0..n).map(block).collect();
    Graph::from_edges(n, &edges, features, labels, spec.blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disjoint_cliques() {
        let g = synth_sbm(&SbmSpec::new(2, 3, 1.0, 0.0, 2, 0)).unwrap();
        assert_eq!(g.num_edges(), 6);
        for v in 0..6 {
            assert_eq!(g.degree(v), 2);
            for &u in g.neighbors(v) {
                assert_eq!(u / 3, v / 3);
            }
        }
        assert_eq!(g.labels, vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn seed_stable() {
        let a = synth_sbm(&SbmSpec::new(3, 10, 0.3, 0.05, 4, 9)).unwrap();
        let b = synth_sbm(&SbmSpec::new(3, 10, 0.3, 0.05, 4, 9)).unwrap();
        let c = synth_sbm(&SbmSpec::new(3, 10, 0.3, 0.05, 4, 10)).unwrap();
        assert_eq!(a.csr(), b.csr());
        assert_ne!(a.csr(), c.csr());
    }

    #[test]
    fn bad_probability() {
        assert!(synth_sbm(&SbmSpec::new(2, 2, 1.5, 0.0, 1, 0)).is_err());
    }
}
