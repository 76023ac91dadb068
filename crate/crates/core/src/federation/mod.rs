//! Parameter server, exchange broker, round clock and metrics.

mod broker;
mod metrics;
mod server;
pub mod wire;

pub use broker::{AuditRecord, AuditReport, Broker, EmbeddingShare};
pub use metrics::{MetricsWriter, ReturnsWriter, METRICS_HEADER, RETURNS_HEADER};
pub use server::{
    aggregate, ClientRoundStats, ClockMode, ClockModel, EvalSet, ExchangeMode, FedSetup, Federation, RoundRecord,
    ServerState,
};
