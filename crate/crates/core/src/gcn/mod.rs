//! Client-side GCN: sampled forward pass with cross-client terms, manual
//! backprop, local training and evaluation.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{read_weights, write_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION};
pub use model::{
    accuracy, backward, evaluate, forward, full_logits, full_products, ExternalRows, ForwardTrace, GcnWeights,
    TrainConfig,
};
pub use train::{
    gather_external, local_train_round, EmbeddingSource, IterStats, LocalTrainer, LocalUpdate, NoExchange,
};
