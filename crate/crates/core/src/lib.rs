//! Federated graph learning simulator.
//!
//! Clients each hold a subgraph and train a shared GCN. Raw node features
//! never leave a client: from the second layer on, clients exchange only
//! products of hidden embeddings and weights for boundary nodes. Each
//! client samples its computation graph from a policy (mini-batch size and
//! per-layer neighbour probabilities) that a DDPG controller on the server
//! can tune online from accuracy and round-time feedback.

pub mod ddpg;
pub mod error;
pub mod experiment;
pub mod federation;
pub mod gcn;
pub mod graphstore;
pub mod numkit;
pub mod sampler;

pub use error::{Error, Result};
