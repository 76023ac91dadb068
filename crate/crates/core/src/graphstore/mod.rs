//! Graph ingest, synthetic generation, normalised adjacency and
//! partitioning into client subgraphs.

mod cache;
mod csr;
mod graph;
mod ingest;
mod partition;
mod sbm;

pub use cache::{read_partition, write_partition, PARTITION_MAGIC, PARTITION_VERSION};
pub use csr::CsrMatrix;
pub use graph::{normalized_adjacency, Graph, NormalizedAdjacency, Split, SplitRatios};
pub use ingest::{l1_normalize_rows, load_citation_graph, parse_citation_graph};
pub use partition::{
    partition, partition_with_assignment, BoundaryEdge, ClientGraph, Partition, PartitionMode, PartitionSpec,
    MIN_FRACTION,
};
pub use sbm::{synth_sbm, SbmSpec};
