//! DDPG controller that tunes per-client sampling policies from observed
//! weights, accuracy and round time.

mod agent;
mod checkpoint;
mod mlp;
mod parts;

pub use agent::{
    actor_objective_grad, actor_update, critic_loss_grad, critic_update, train_controller, ControllerEnv, DdpgAgent,
    DdpgConfig, UpdateStats,
};
pub use checkpoint::{read_controller, write_controller, CONTROLLER_MAGIC, CONTROLLER_VERSION};
pub use mlp::{soft_update, Activation, MlpCache, MlpGrads, MlpNet, MlpOptimizer};
pub use parts::{reward, ActionCodec, ReplayBuffer, RewardConfig, StateEncoder, Transition};

/// Flattened `(W̄, W_1, …)` → compressed state vector.
pub fn state_encode(observed: &[f64], encoder: &StateEncoder) -> crate::Result<Vec<f64>> {
    encoder.encode(observed)
}
